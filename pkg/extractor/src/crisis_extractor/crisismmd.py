"""CrisisMMD annotation TSV parsing and pair filtering."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import ExtractorError
from .labels import normalize_category


@dataclass
class RawPost:
    tweet_id: str
    image_id: str
    tweet_text: str
    image_path: Path
    label_text: str
    label_image: str

    @property
    def labels_agree(self) -> bool:
        return self.label_text == self.label_image

    @property
    def label(self) -> str:
        return self.label_text


def read_annotations(tsv_path: Path | str, images_root: Path | str) -> list[RawPost]:
    """Parse one annotation TSV; image paths are resolved against images_root.

    Accepts the published column layout (tweet_id, image_id, tweet_text,
    image, label_text, label_image) and degrades to a single `label`
    column when per-modality labels are absent.
    """
    images_root = Path(images_root)
    posts: list[RawPost] = []
    with open(tsv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None:
            raise ExtractorError(f"{tsv_path}: empty annotation file")
        missing = {"tweet_id", "image_id", "tweet_text", "image"} - set(reader.fieldnames)
        if missing:
            raise ExtractorError(f"{tsv_path}: missing columns {sorted(missing)}")
        has_pair_labels = {"label_text", "label_image"} <= set(reader.fieldnames)
        if not has_pair_labels and "label" not in reader.fieldnames:
            raise ExtractorError(f"{tsv_path}: no label column found")
        for row in reader:
            if has_pair_labels:
                label_text = normalize_category(row["label_text"])
                label_image = normalize_category(row["label_image"])
            else:
                label_text = label_image = normalize_category(row["label"])
            posts.append(
                RawPost(
                    tweet_id=row["tweet_id"].strip(),
                    image_id=row["image_id"].strip(),
                    tweet_text=row["tweet_text"].strip(),
                    image_path=images_root / row["image"].strip(),
                    label_text=label_text,
                    label_image=label_image,
                )
            )
    return posts


def with_identical_labels(posts: list[RawPost]) -> list[RawPost]:
    """Keep only image-text pairs whose two modality labels agree."""
    return [p for p in posts if p.labels_agree]
