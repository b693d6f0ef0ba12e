"""Exception types raised across the pipeline.

Everything derived from :class:`ValidationError` is a problem with the
input data or arguments (CLI exit code 1). Filesystem problems surface as
plain :class:`OSError` (CLI exit code 2).
"""


class WWRError(Exception):
    """Base class for all package errors."""


class ValidationError(WWRError, ValueError):
    pass


class AnnotationParseError(ValidationError):
    """Annotation file is not well-formed JSON."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class SchemaError(ValidationError):
    """A required annotation field is missing or has the wrong type."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ShapeError(ValidationError):
    """Two rasters that must agree in size do not."""


class AmbiguityError(ValidationError):
    pass


class DecodeError(ValidationError):
    pass


class FormatError(ValidationError):
    pass


class DegeneracyError(ValidationError):
    pass


class DetectionError(ValidationError):
    pass


class PairingError(ValidationError):
    def __init__(self, message: str, id: str):
        super().__init__(message)
        self.id = id
