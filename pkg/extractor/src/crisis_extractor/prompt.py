"""The captioning instruction prompt and its rendering.

The template is frozen byte-for-byte; rendering may only substitute text
at the two placeholder slots (<tweet_text> for the post's text, <image>
kept for the vision-language backend to expand).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

TWEET_SLOT = "<tweet_text>"
IMAGE_SLOT = "<image>"

PROMPT_TEMPLATE = (
    "<|im_start|>system\n"
    "- You are LLaVA, a large multimodal assistant trained by UW Madison WAIV Lab.\n"
    "- You can understand and analyze visual content provided by the user and assist "
    "with a variety of tasks using natural language.\n"
    "- Follow the instructions carefully and provide detailed, context-aware "
    "explanations. <|im_end|>\n"
    "<|im_start|>user\n"
    "Given the caption: <tweet_text>, analyze the corresponding image and describe it "
    "in a very detailed and informative manner, focusing on crisis-relevant visual "
    "elements such as damage level, people, infrastructure, or rescue efforts. "
    "<image> <|im_end|>\n"
    "<|im_start|>assistant\n"
)


def render_instruction(tweet_text: str) -> str:
    """Substitute the tweet into the template; everything else stays verbatim."""
    return PROMPT_TEMPLATE.replace(TWEET_SLOT, tweet_text, 1)


@dataclass(frozen=True)
class CaptionRequest:
    """One captioning job: an image plus the tweet-aware instruction."""

    image_path: Path
    tweet_text: str

    @property
    def instruction(self) -> str:
        return render_instruction(self.tweet_text)
