"""Text enrichment and frozen pair encoding.

The generated caption is appended after the original tweet (original
first, single-space joiner). Encoders own the token-limit policy: when
tweet + caption exceed the context window, the caption is truncated from
the end first; the tweet itself is only cut when it alone overflows.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import ModelLoadError

CLIP_TOKEN_LIMIT = 77  # context length incl. the two special tokens
CLIP_SPECIAL_TOKENS = 2


@dataclass(frozen=True)
class EnrichedText:
    """The generated caption and its concatenation with the original tweet."""

    x_t_prime: str
    x_t_doubleprime: str


def concat_text(tweet: str, caption: str) -> EnrichedText:
    """Join tweet and caption, original first, without a dangling separator."""
    if not caption:
        joined = tweet
    elif not tweet:
        joined = caption
    else:
        joined = f"{tweet} {caption}"
    return EnrichedText(x_t_prime=caption, x_t_doubleprime=joined)


def allocate_token_budget(
    tweet_tokens: Sequence, caption_tokens: Sequence, limit: int
) -> tuple[list, list]:
    """Keep the whole tweet when possible; the caption absorbs the truncation."""
    tweet_tokens = list(tweet_tokens)
    caption_tokens = list(caption_tokens)
    if len(tweet_tokens) >= limit:
        return tweet_tokens[:limit], []
    return tweet_tokens, caption_tokens[: limit - len(tweet_tokens)]


class PairEncoder(Protocol):
    d_i: int
    d_t: int

    def encode(self, image_path: Path, tweet: str, caption: str) -> tuple[np.ndarray, np.ndarray]: ...


class StubPairEncoder:
    """Deterministic hash-seeded vectors honoring the real encoder's contract:
    fixed dims, f32 output, and the caption-first truncation policy
    (whitespace tokens stand in for the tokenizer)."""

    def __init__(self, d_i: int = 512, d_t: int = 512, token_limit: int = CLIP_TOKEN_LIMIT):
        self.d_i = d_i
        self.d_t = d_t
        self.token_limit = token_limit

    def _vector(self, payload: bytes, dim: int) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
        rng = np.random.default_rng(seed)
        return rng.standard_normal(dim).astype(np.float32)

    def encode(self, image_path: Path, tweet: str, caption: str) -> tuple[np.ndarray, np.ndarray]:
        budget = self.token_limit - CLIP_SPECIAL_TOKENS
        kept_tweet, kept_caption = allocate_token_budget(tweet.split(), caption.split(), budget)
        text = " ".join(kept_tweet + kept_caption)
        f_i = self._vector(Path(image_path).read_bytes(), self.d_i)
        f_t = self._vector(text.encode("utf-8"), self.d_t)
        return f_i, f_t


class ClipPairEncoder:
    """Frozen CLIP encoders via transformers (512-wide base checkpoints)."""

    def __init__(self, model_id: str = "openai/clip-vit-base-patch32"):
        self.model_id = model_id
        self.d_i = 512
        self.d_t = 512
        self._model = None
        self._processor = None

    def _load(self):
        if self._model is not None:
            return
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ModelLoadError(f"transformers/torch not installed: {exc}") from exc
        try:
            self._processor = CLIPProcessor.from_pretrained(self.model_id)
            self._model = CLIPModel.from_pretrained(self.model_id)
            self._model.eval()
        except Exception as exc:
            raise ModelLoadError(f"cannot load {self.model_id}: {exc}") from exc
        self.d_i = self._model.config.projection_dim
        self.d_t = self._model.config.projection_dim

    def _text_ids(self, tweet: str, caption: str):
        tok = self._processor.tokenizer
        budget = tok.model_max_length - CLIP_SPECIAL_TOKENS
        tweet_ids = tok(tweet, add_special_tokens=False)["input_ids"]
        caption_ids = tok(" " + caption if caption else "", add_special_tokens=False)["input_ids"]
        kept_tweet, kept_caption = allocate_token_budget(tweet_ids, caption_ids, budget)
        return [tok.bos_token_id, *kept_tweet, *kept_caption, tok.eos_token_id]

    def encode(self, image_path: Path, tweet: str, caption: str) -> tuple[np.ndarray, np.ndarray]:
        self._load()
        import torch
        from PIL import Image

        image = Image.open(image_path).convert("RGB")
        pixel = self._processor(images=image, return_tensors="pt")["pixel_values"]
        ids = torch.tensor([self._text_ids(tweet, caption)])
        with torch.no_grad():
            f_i = self._model.get_image_features(pixel_values=pixel)
            f_t = self._model.get_text_features(input_ids=ids)
        return (
            f_i[0].numpy().astype(np.float32),
            f_t[0].numpy().astype(np.float32),
        )
