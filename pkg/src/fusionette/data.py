"""On-disk embedding datasets, label maps, and synthetic generators.

A dataset is three MMEB files (train/validation/test) sharing a
directory; splits are discovered by the split_name stored in the file,
not by filename. Embeddings are stored as f32 (matching upstream encoder
precision) and widened to f64 at the compute boundary.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .binio import open_container, pack_string, pack_u8, pack_u16, pack_u32, pack_u64, seal, verify_crc
from .errors import DataError, FormatError

MMEB_MAGIC = b"MMEB"
MMEB_VERSION = 1
SPLIT_NAMES = ("train", "validation", "test")
SYNTHETIC_KINDS = ("separable", "xor", "noise")


@dataclass
class EmbeddingRecord:
    """One sample: image embedding, text embedding, class label, id."""

    id: str
    f_i: np.ndarray
    f_t: np.ndarray
    label: int


@dataclass
class DatasetSplit:
    records: list[EmbeddingRecord]
    num_classes: int
    class_names: list[str]
    task_id: int
    split_name: str

    def __len__(self) -> int:
        return len(self.records)

    @property
    def d_i(self) -> int:
        return len(self.records[0].f_i) if self.records else 0

    @property
    def d_t(self) -> int:
        return len(self.records[0].f_t) if self.records else 0

    def validate(self) -> None:
        """Check every split invariant; raises DataError on the first violation."""
        if self.task_id not in (1, 2, 3):
            raise DataError(f"task_id must be 1, 2 or 3, got {self.task_id}")
        if self.split_name not in SPLIT_NAMES:
            raise DataError(f"split_name must be one of {SPLIT_NAMES}, got {self.split_name!r}")
        if self.num_classes < 2 or len(self.class_names) != self.num_classes:
            raise DataError(
                f"{self.num_classes} classes declared but {len(self.class_names)} names given"
            )
        seen: set[str] = set()
        d_i, d_t = self.d_i, self.d_t
        for rec in self.records:
            if not rec.id:
                raise DataError("record id must be nonempty")
            if rec.id in seen:
                raise DataError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)
            if len(rec.f_i) != d_i or len(rec.f_t) != d_t:
                raise DataError(f"record {rec.id!r} has inconsistent embedding dims")
            if not (0 <= rec.label < self.num_classes):
                raise DataError(f"record {rec.id!r} label {rec.label} outside [0, {self.num_classes})")
            if not (np.isfinite(rec.f_i).all() and np.isfinite(rec.f_t).all()):
                raise DataError(f"record {rec.id!r} has a non-finite embedding value")


def split_arrays(split: DatasetSplit) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack a split into f64 feature matrices and an int label vector."""
    f_i = np.stack([r.f_i for r in split.records]).astype(np.float64)
    f_t = np.stack([r.f_t for r in split.records]).astype(np.float64)
    y = np.array([r.label for r in split.records], dtype=np.int64)
    return f_i, f_t, y


def write_split(split: DatasetSplit, path: str | os.PathLike) -> None:
    """Write one MMEB file; the round trip through read_split is bit-exact."""
    split.validate()
    body = bytearray()
    body += MMEB_MAGIC
    body += pack_u16(MMEB_VERSION)
    body += pack_u8(split.task_id)
    body += pack_string(split.split_name)
    body += pack_u16(split.num_classes)
    for name in split.class_names:
        body += pack_string(name)
    body += pack_u32(split.d_i)
    body += pack_u32(split.d_t)
    body += pack_u64(len(split.records))
    for rec in split.records:
        body += pack_string(rec.id)
        body += pack_u32(rec.label)
        body += np.asarray(rec.f_i, dtype="<f4").tobytes(order="C")
        body += np.asarray(rec.f_t, dtype="<f4").tobytes(order="C")
    blob = seal(body)
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def read_split(path: str | os.PathLike) -> DatasetSplit:
    with open(path, "rb") as fh:
        raw = fh.read()
    reader = open_container(raw, MMEB_MAGIC)
    version = reader.u16()
    if version != MMEB_VERSION:
        raise FormatError(f"unsupported MMEB version {version}")
    task_id = reader.u8()
    split_name = reader.string()
    num_classes = reader.u16()
    class_names = [reader.string() for _ in range(num_classes)]
    d_i = reader.u32()
    d_t = reader.u32()
    n = reader.u64()
    records = []
    for _ in range(n):
        rec_id = reader.string()
        label = reader.u32()
        f_i = reader.f32_array(d_i)
        f_t = reader.f32_array(d_t)
        records.append(EmbeddingRecord(rec_id, f_i, f_t, int(label)))
    if reader.remaining:
        raise FormatError(f"{reader.remaining} unexpected trailing bytes before CRC")
    verify_crc(raw)
    split = DatasetSplit(records, num_classes, class_names, task_id, split_name)
    split.validate()
    return split


def load_dataset_dir(directory: str | os.PathLike) -> dict[str, DatasetSplit]:
    """Read every .mmeb file in a directory, keyed by the stored split_name."""
    directory = Path(directory)
    splits: dict[str, DatasetSplit] = {}
    for path in sorted(directory.glob("*.mmeb")):
        split = read_split(path)
        if split.split_name in splits:
            raise DataError(f"two files in {directory} both claim split {split.split_name!r}")
        splits[split.split_name] = split
    if not splits:
        raise DataError(f"no .mmeb files found in {directory}")
    return splits


# --- CrisisMMD label spaces -------------------------------------------------


@dataclass(frozen=True)
class LabelMap:
    """Raw annotation category -> class index for one task.

    Categories in `excluded` are dropped upstream (they are not part of
    the task's label space); any other unknown category is an error.
    """

    task_id: int
    mapping: dict[str, int]
    class_names: tuple[str, ...]
    excluded: frozenset[str] = frozenset()

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


LABEL_MAPS: dict[int, LabelMap] = {
    1: LabelMap(
        task_id=1,
        mapping={"informative": 0, "not_informative": 1},
        class_names=("informative", "not_informative"),
    ),
    # Three sparse person-centred categories share one merged class.
    2: LabelMap(
        task_id=2,
        mapping={
            "infrastructure_and_utility_damage": 0,
            "vehicle_damage": 1,
            "rescue_volunteering_or_donation_effort": 2,
            "affected_individuals": 3,
            "injured_or_dead_people": 3,
            "missing_or_found_people": 3,
            "other_relevant_information": 4,
        },
        class_names=(
            "infrastructure_and_utility_damage",
            "vehicle_damage",
            "rescue_volunteering_or_donation_effort",
            "affected_individuals",
            "other_relevant_information",
        ),
        excluded=frozenset({"not_humanitarian"}),
    ),
    3: LabelMap(
        task_id=3,
        mapping={"severe_damage": 0, "mild_damage": 1, "little_or_no_damage": 2},
        class_names=("severe_damage", "mild_damage", "little_or_no_damage"),
    ),
}


@dataclass
class RawRow:
    """An embedding pair still carrying its raw annotation category."""

    id: str
    f_i: np.ndarray
    f_t: np.ndarray
    category: str


def apply_label_map(raw_rows: Iterable[RawRow], label_map: LabelMap, split_name: str) -> DatasetSplit:
    """Map raw categories to class indices, dropping excluded categories."""
    records = []
    for row in raw_rows:
        if row.category in label_map.excluded:
            continue
        if row.category not in label_map.mapping:
            raise DataError(f"unknown raw category {row.category!r} for task {label_map.task_id}")
        records.append(
            EmbeddingRecord(
                row.id,
                np.asarray(row.f_i, dtype=np.float32),
                np.asarray(row.f_t, dtype=np.float32),
                label_map.mapping[row.category],
            )
        )
    return DatasetSplit(
        records,
        label_map.num_classes,
        list(label_map.class_names),
        label_map.task_id,
        split_name,
    )


# --- Synthetic datasets ------------------------------------------------------

# Each modality gets one high-variance salient direction, mimicking the
# strong anisotropy of real encoder embeddings; labels derive from the
# salient-direction signs, so the label-relevant structure is findable
# by gradient descent at desk scale.
SIGNAL_BOOST = 10.0

# Global magnitude per kind. The separable kind is scaled up so the
# reference learning rate of 1e-3 makes visible progress on tiny
# overfitting runs; xor keeps unit scale, where the sigmoid gates stay
# in their trainable range for cross-modal learning.
KIND_SCALE = {"separable": 8.0, "xor": 1.0, "noise": 1.0}


def synthetic_directions(d_i: int, d_t: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """The fixed unit functionals the generators label with (construction oracle)."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(d_i)
    u /= np.linalg.norm(u)
    v = rng.standard_normal(d_t)
    v /= np.linalg.norm(v)
    return u, v


def gen_synthetic(
    kind: str,
    n_per_split: int | Sequence[int],
    d_i: int = 512,
    d_t: int = 512,
    seed: int = 0,
    scale: float | None = None,
) -> tuple[DatasetSplit, DatasetSplit, DatasetSplit]:
    """Seeded synthetic datasets for property-based verification.

    separable: label = sign of a fixed linear functional of the image
    embedding (image-only solvable). xor: label = XOR of the two
    per-modality signs, so either modality alone carries zero mutual
    information with the label by construction. noise: labels independent
    of both embeddings.

    Labels are computed from the f32-rounded embeddings that get stored,
    so the construction stays exact after a round trip through disk.
    """
    if kind not in SYNTHETIC_KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {SYNTHETIC_KINDS}")
    if isinstance(n_per_split, int):
        sizes = (n_per_split,) * 3
    else:
        sizes = tuple(int(n) for n in n_per_split)
    if len(sizes) != 3 or any(n <= 0 for n in sizes):
        raise ValueError(f"n_per_split must be a positive int or three positive ints, got {sizes}")
    if scale is None:
        scale = KIND_SCALE[kind]
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(d_i)
    u /= np.linalg.norm(u)
    v = rng.standard_normal(d_t)
    v /= np.linalg.norm(v)
    boost = SIGNAL_BOOST - 1.0
    splits = []
    for split_name, n in zip(SPLIT_NAMES, sizes):
        g_i = rng.standard_normal((n, d_i))
        g_t = rng.standard_normal((n, d_t))
        f_i = (scale * (g_i + np.outer(boost * (g_i @ u), u))).astype(np.float32)
        f_t = (scale * (g_t + np.outer(boost * (g_t @ v), v))).astype(np.float32)
        s_i = f_i.astype(np.float64) @ u > 0
        s_t = f_t.astype(np.float64) @ v > 0
        if kind == "separable":
            labels = s_i.astype(np.int64)
        elif kind == "xor":
            labels = (s_i ^ s_t).astype(np.int64)
        else:
            labels = rng.integers(0, 2, size=n, dtype=np.int64)
        records = [
            EmbeddingRecord(f"{kind}-{split_name}-{i:05d}", f_i[i], f_t[i], int(labels[i]))
            for i in range(n)
        ]
        splits.append(DatasetSplit(records, 2, ["class_0", "class_1"], task_id=1, split_name=split_name))
    return tuple(splits)


# --- Table-style count bookkeeping -------------------------------------------


@dataclass(frozen=True)
class Table1Row:
    """Expected per-split record counts for one task."""

    train: int
    validation: int
    test: int

    @property
    def total(self) -> int:
        return self.train + self.validation + self.test


TABLE1: dict[int, Table1Row] = {
    1: Table1Row(train=9599, validation=1573, test=1534),
    2: Table1Row(train=2874, validation=477, test=451),
    3: Table1Row(train=2468, validation=529, test=529),
}


@dataclass
class SplitDelta:
    split_name: str
    expected: int
    actual: int

    @property
    def delta(self) -> int:
        return self.actual - self.expected


@dataclass
class CountReport:
    ok: bool
    deltas: list[SplitDelta] = field(default_factory=list)

    @property
    def total_expected(self) -> int:
        return sum(d.expected for d in self.deltas)

    @property
    def total_actual(self) -> int:
        return sum(d.actual for d in self.deltas)

    def describe(self) -> str:
        lines = [
            f"{d.split_name}: expected {d.expected}, got {d.actual} ({d.delta:+d})"
            for d in self.deltas
        ]
        lines.append("counts match" if self.ok else "counts differ")
        return "\n".join(lines)


def validate_counts(splits: Iterable[DatasetSplit], expected: Table1Row) -> CountReport:
    """Compare split sizes against an expected distribution row (non-fatal)."""
    actual = {name: 0 for name in SPLIT_NAMES}
    for split in splits:
        actual[split.split_name] = len(split)
    deltas = [
        SplitDelta("train", expected.train, actual["train"]),
        SplitDelta("validation", expected.validation, actual["validation"]),
        SplitDelta("test", expected.test, actual["test"]),
    ]
    return CountReport(ok=all(d.delta == 0 for d in deltas), deltas=deltas)
