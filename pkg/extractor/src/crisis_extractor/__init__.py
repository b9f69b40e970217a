"""crisis_extractor: raw CrisisMMD posts -> MMEB embedding files."""

__version__ = "0.1.0"

from .captioning import (
    CaptionCache,
    CaptionKey,
    LlavaCaptioner,
    StubCaptioner,
    generate_caption,
    image_hash,
    text_hash,
)
from .crisismmd import RawPost, read_annotations, with_identical_labels
from .encoding import (
    ClipPairEncoder,
    EnrichedText,
    StubPairEncoder,
    allocate_token_budget,
    concat_text,
)
from .errors import CaptionError, ExtractorError, LabelError, ModelLoadError
from .export import SplitSummary, describe_counts, export_dataset, export_split
from .labels import TASK_LABELS, TaskLabels, map_category, normalize_category
from .mmeb import MmebRecord, write_mmeb
from .prompt import IMAGE_SLOT, PROMPT_TEMPLATE, TWEET_SLOT, CaptionRequest, render_instruction
