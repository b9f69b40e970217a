"""End-to-end export: raw posts -> captions -> CLIP pair encodings -> MMEB.

Captioning may fan out over worker threads (the cache makes that safe);
the MMEB writer itself is single-threaded and records are ordered by id,
so two runs over a warm cache produce byte-identical files.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .captioning import CaptionCache, Captioner, generate_caption
from .crisismmd import RawPost, with_identical_labels
from .encoding import PairEncoder, concat_text
from .errors import ExtractorError
from .labels import TASK_LABELS, map_category
from .mmeb import MmebRecord, write_mmeb
from .prompt import CaptionRequest

EXPECTED_TOTALS = {1: 12706, 2: 3802, 3: 3526}


@dataclass
class SplitSummary:
    split_name: str
    path: Path
    n_raw: int
    n_pairs: int
    n_exported: int


def export_split(
    posts: list[RawPost],
    task_id: int,
    split_name: str,
    out_path: Path,
    captioner: Captioner,
    encoder: PairEncoder,
    cache: CaptionCache,
    workers: int = 1,
) -> SplitSummary:
    labels = TASK_LABELS[task_id]
    pairs = with_identical_labels(posts)
    kept: list[tuple[RawPost, int]] = []
    for post in pairs:
        cls = map_category(labels, post.label)
        if cls is not None:
            kept.append((post, cls))
    kept.sort(key=lambda item: (item[0].tweet_id, item[0].image_id))

    requests = [CaptionRequest(post.image_path, post.tweet_text) for post, _ in kept]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            captions = list(pool.map(lambda r: generate_caption(r, captioner, cache), requests))
    else:
        captions = [generate_caption(r, captioner, cache) for r in requests]

    records = []
    for (post, cls), caption in zip(kept, captions):
        enriched = concat_text(post.tweet_text, caption)
        f_i, f_t = encoder.encode(post.image_path, post.tweet_text, enriched.x_t_prime)
        records.append(MmebRecord(f"{post.tweet_id}_{post.image_id}", cls, f_i, f_t))

    write_mmeb(out_path, task_id, split_name, list(labels.class_names), records)
    return SplitSummary(split_name, out_path, len(posts), len(pairs), len(records))


def export_dataset(
    splits: dict[str, list[RawPost]],
    task_id: int,
    out_dir: Path | str,
    captioner: Captioner,
    encoder: PairEncoder,
    cache: CaptionCache,
    workers: int = 1,
) -> list[SplitSummary]:
    """Export the three splits of one task; returns per-split summaries."""
    if task_id not in TASK_LABELS:
        raise ExtractorError(f"task_id must be one of {sorted(TASK_LABELS)}, got {task_id}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = []
    for split_name in ("train", "validation", "test"):
        if split_name not in splits:
            raise ExtractorError(f"missing {split_name!r} annotations")
        summaries.append(
            export_split(
                splits[split_name],
                task_id,
                split_name,
                out_dir / f"{split_name}.mmeb",
                captioner,
                encoder,
                cache,
                workers=workers,
            )
        )
    return summaries


def describe_counts(task_id: int, summaries: list[SplitSummary]) -> str:
    total = sum(s.n_exported for s in summaries)
    lines = [
        f"{s.split_name}: {s.n_exported} records ({s.n_pairs} agreeing pairs of {s.n_raw} rows)"
        for s in summaries
    ]
    expected = EXPECTED_TOTALS.get(task_id)
    if expected is not None:
        delta = total - expected
        lines.append(f"total: {total} (reference corpus total {expected}, delta {delta:+d})")
    else:
        lines.append(f"total: {total}")
    return "\n".join(lines)
