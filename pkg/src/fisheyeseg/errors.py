"""Exception types raised across the package."""


class FisheyeSegError(Exception):
    """Base class for all package errors."""


class DomainError(FisheyeSegError, ValueError):
    """An argument lies outside the domain of a function."""


class OutOfFovError(DomainError):
    """A ray or pixel lies outside the camera field of view."""


class CalibrationError(FisheyeSegError, ValueError):
    """A calibration or mounting description violates a type invariant."""


class FormatError(FisheyeSegError, ValueError):
    """A binary or text file does not match its declared format."""


class CoverageError(FisheyeSegError, ValueError):
    """Odometry samples do not cover the requested time interval."""


class SceneError(FisheyeSegError, ValueError):
    """A scene description is invalid or produces no usable data."""
