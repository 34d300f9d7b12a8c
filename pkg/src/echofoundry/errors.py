"""Exception types shared across the package."""


class EchoFoundryError(Exception):
    """Base class for all package errors."""


class ArgumentError(EchoFoundryError, ValueError):
    """An argument violates an operation's contract."""


class GeometryError(EchoFoundryError, ValueError):
    """Cone / box / volume geometry is inconsistent with the image."""


class ShapeError(EchoFoundryError, ValueError):
    """Array or tensor shapes do not line up."""


class DataError(EchoFoundryError, ValueError):
    """Dataset or manifest content is missing or malformed."""


class NumericError(EchoFoundryError, ValueError):
    """Non-finite values where finite ones are required."""


class DetectionError(EchoFoundryError, RuntimeError):
    """A detection stage found nothing usable (e.g. no ED/ES extrema)."""


class CorruptionError(EchoFoundryError, IOError):
    """A stored artifact fails its integrity check."""
