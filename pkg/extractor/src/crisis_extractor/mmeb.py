"""MMEB writer: the binary contract consumed by the training package.

Layout (little-endian): magic "MMEB", version u16, task_id u8, split
name (u16 length + UTF-8), num_classes u16, class names (u16 length +
UTF-8 each), D_I u32, D_T u32, record count u64, then per record the id
(u16 length + UTF-8), label u32, f_i as f32[D_I], f_t as f32[D_T];
trailing CRC32 over every preceding byte.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ExtractorError

MAGIC = b"MMEB"
VERSION = 1
SPLIT_NAMES = ("train", "validation", "test")


@dataclass
class MmebRecord:
    id: str
    label: int
    f_i: np.ndarray
    f_t: np.ndarray


def _string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def write_mmeb(
    path: Path | str,
    task_id: int,
    split_name: str,
    class_names: Sequence[str],
    records: Sequence[MmebRecord],
) -> None:
    if split_name not in SPLIT_NAMES:
        raise ExtractorError(f"split_name must be one of {SPLIT_NAMES}, got {split_name!r}")
    if task_id not in (1, 2, 3):
        raise ExtractorError(f"task_id must be 1, 2 or 3, got {task_id}")
    d_i = len(records[0].f_i) if records else 0
    d_t = len(records[0].f_t) if records else 0
    seen: set[str] = set()
    for rec in records:
        if not rec.id or rec.id in seen:
            raise ExtractorError(f"record ids must be nonempty and unique; offender: {rec.id!r}")
        seen.add(rec.id)
        if len(rec.f_i) != d_i or len(rec.f_t) != d_t:
            raise ExtractorError(f"record {rec.id!r} has inconsistent embedding dims")
        if not (0 <= rec.label < len(class_names)):
            raise ExtractorError(f"record {rec.id!r} label {rec.label} out of range")
        if not (np.isfinite(rec.f_i).all() and np.isfinite(rec.f_t).all()):
            raise ExtractorError(f"record {rec.id!r} has non-finite embedding values")

    body = bytearray()
    body += MAGIC
    body += struct.pack("<H", VERSION)
    body += struct.pack("<B", task_id)
    body += _string(split_name)
    body += struct.pack("<H", len(class_names))
    for name in class_names:
        body += _string(name)
    body += struct.pack("<I", d_i)
    body += struct.pack("<I", d_t)
    body += struct.pack("<Q", len(records))
    for rec in records:
        body += _string(rec.id)
        body += struct.pack("<I", rec.label)
        body += np.asarray(rec.f_i, dtype="<f4").tobytes(order="C")
        body += np.asarray(rec.f_t, dtype="<f4").tobytes(order="C")
    blob = bytes(body) + struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)
