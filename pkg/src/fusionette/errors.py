"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand or record shapes are incompatible."""


class FormatError(Exception):
    """A binary file does not look like the expected container."""


class TruncationError(FormatError):
    """A binary file ends before its declared content does."""


class ChecksumError(FormatError):
    """A binary file's trailing CRC32 does not match its content."""


class DataError(ValueError):
    """A record or split violates a data invariant (label range, NaN payload, ...)."""


class TrainingError(RuntimeError):
    """Training cannot proceed (empty split, missing gradient, ...)."""
