"""Extractor exception types."""


class ExtractorError(Exception):
    """Base class for extraction failures."""


class ModelLoadError(ExtractorError):
    """A captioning or encoding model could not be loaded."""


class CaptionError(ExtractorError):
    """Caption generation produced no usable text."""


class LabelError(ExtractorError):
    """An annotation category is not part of the task's label space."""
