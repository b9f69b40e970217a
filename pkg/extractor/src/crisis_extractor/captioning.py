"""Caption generation with an on-disk cache.

Captions are cached by (image hash, tweet hash): one UTF-8 text file per
cached caption, so reruns are free and byte-deterministic regardless of
the backend. Backends implement a single `caption(request) -> str`
method; the real one runs a LLaVA checkpoint via transformers, the stub
produces deterministic text for pipeline testing without model weights.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .errors import CaptionError, ModelLoadError
from .prompt import CaptionRequest


def image_hash(path: Path | str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CaptionKey:
    image_sha: str
    tweet_sha: str


class CaptionCache:
    """Directory of cached captions, one UTF-8 text file per key."""

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: CaptionKey) -> Path:
        # tweet-hash suffix keeps distinct tweets for one image from colliding
        return self.directory / f"{key.image_sha}_{key.tweet_sha[:16]}.txt"

    def get(self, key: CaptionKey) -> str | None:
        path = self._path(key)
        if not path.exists():
            return None
        return path.read_text(encoding="utf-8")

    def put(self, key: CaptionKey, caption: str) -> None:
        path = self._path(key)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(caption, encoding="utf-8")
        os.replace(tmp, path)


class Captioner(Protocol):
    def caption(self, request: CaptionRequest) -> str: ...


class StubCaptioner:
    """Deterministic offline stand-in: descriptive text keyed by content hashes.

    Lets the export pipeline run end to end where no model weights are
    available; not a substitute for real captions.
    """

    def caption(self, request: CaptionRequest) -> str:
        fingerprint = image_hash(request.image_path)[:12]
        return (
            f"The image shows a scene related to the post '{request.tweet_text}' "
            f"(content fingerprint {fingerprint})."
        )


class LlavaCaptioner:
    """LLaVA captioning through transformers; the model stays frozen."""

    def __init__(self, model_id: str = "llava-hf/llava-1.5-7b-hf", max_new_tokens: int = 200):
        self.model_id = model_id
        self.max_new_tokens = max_new_tokens
        self._model = None
        self._processor = None

    def _load(self):
        if self._model is not None:
            return
        try:
            import torch
            from transformers import AutoProcessor, LlavaForConditionalGeneration
        except ImportError as exc:
            raise ModelLoadError(f"transformers/torch not installed: {exc}") from exc
        try:
            self._processor = AutoProcessor.from_pretrained(self.model_id)
            self._model = LlavaForConditionalGeneration.from_pretrained(
                self.model_id,
                torch_dtype=torch.float16 if torch.cuda.is_available() else torch.float32,
                device_map="auto" if torch.cuda.is_available() else None,
            )
            self._model.eval()
        except Exception as exc:
            raise ModelLoadError(f"cannot load {self.model_id}: {exc}") from exc

    def caption(self, request: CaptionRequest) -> str:
        self._load()
        import torch
        from PIL import Image

        image = Image.open(request.image_path).convert("RGB")
        inputs = self._processor(images=image, text=request.instruction, return_tensors="pt")
        inputs = {k: v.to(self._model.device) for k, v in inputs.items()}
        with torch.no_grad():
            output = self._model.generate(
                **inputs, max_new_tokens=self.max_new_tokens, do_sample=False
            )
        generated = output[0][inputs["input_ids"].shape[1] :]
        return self._processor.decode(generated, skip_special_tokens=True).strip()


def generate_caption(request: CaptionRequest, captioner: Captioner, cache: CaptionCache) -> str:
    """Cached caption lookup; runs the backend only on a cold key."""
    key = CaptionKey(image_hash(request.image_path), text_hash(request.tweet_text))
    cached = cache.get(key)
    if cached is not None:
        return cached
    caption = captioner.caption(request).strip()
    if not caption:
        raise CaptionError(f"backend produced an empty caption for {request.image_path}")
    cache.put(key, caption)
    return caption
