"""Exception types shared across the package."""


class ProsepError(ValueError):
    """Base class for all prosep-specific errors."""


class CoverageError(ProsepError):
    """Detector grid does not cover the object support disk."""


class InsufficientAnglesError(ProsepError):
    """Too few view angles for the requested operation."""


class SupportError(ProsepError):
    """Object leaves the reconstruction support disk."""


class TensorFormatError(ProsepError):
    """Malformed binary tensor file."""
