"""Little-endian binary container helpers shared by the dataset and model files.

Both formats follow the same conventions: a 4-byte magic, a u16 version,
length-prefixed UTF-8 strings, raw numeric payloads, and a trailing CRC32
of every preceding byte.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import ChecksumError, FormatError, TruncationError


class ByteReader:
    """Bounded cursor over a byte buffer; running past the end raises TruncationError."""

    def __init__(self, buf: bytes, end: int | None = None):
        self._buf = buf
        self._pos = 0
        self._end = len(buf) if end is None else end

    @property
    def remaining(self) -> int:
        return self._end - self._pos

    def take(self, n: int) -> bytes:
        if n > self.remaining:
            raise TruncationError(f"file ends early: wanted {n} bytes, {self.remaining} left")
        out = self._buf[self._pos : self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def string(self, len_bytes: int = 2) -> str:
        n = self.u16() if len_bytes == 2 else self.u32()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"invalid UTF-8 in string field: {exc}") from exc

    def f32_array(self, count: int) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4", count=count).copy()

    def f64_array(self, count: int) -> np.ndarray:
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<f8", count=count).copy()


def pack_u8(v: int) -> bytes:
    return struct.pack("<B", v)


def pack_u16(v: int) -> bytes:
    return struct.pack("<H", v)


def pack_u32(v: int) -> bytes:
    return struct.pack("<I", v)


def pack_u64(v: int) -> bytes:
    return struct.pack("<Q", v)


def pack_string(s: str, len_bytes: int = 2) -> bytes:
    raw = s.encode("utf-8")
    if len_bytes == 2:
        if len(raw) > 0xFFFF:
            raise ValueError(f"string too long for u16 length prefix: {len(raw)} bytes")
        return pack_u16(len(raw)) + raw
    return pack_u32(len(raw)) + raw


def open_container(raw: bytes, magic: bytes) -> ByteReader:
    """Check magic and split off the CRC; returns a reader bounded to the body.

    The caller checks the version and parses the body, then calls
    verify_crc once the structure parsed cleanly.
    """
    if len(raw) < len(magic) + 2 + 4:
        raise TruncationError(f"file too short to be a {magic.decode()} container")
    got = raw[: len(magic)]
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    reader = ByteReader(raw, end=len(raw) - 4)
    reader.take(len(magic))
    return reader


def verify_crc(raw: bytes) -> None:
    stored = struct.unpack("<I", raw[-4:])[0]
    actual = zlib.crc32(raw[:-4]) & 0xFFFFFFFF
    if stored != actual:
        raise ChecksumError(f"CRC32 mismatch: stored {stored:#010x}, computed {actual:#010x}")


def seal(body: bytes | bytearray) -> bytes:
    """Append the CRC32 trailer."""
    return bytes(body) + pack_u32(zlib.crc32(bytes(body)) & 0xFFFFFFFF)
