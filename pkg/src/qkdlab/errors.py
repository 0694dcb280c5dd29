"""Exception hierarchy shared by all qkdlab modules."""


class QkdLabError(Exception):
    """Base class for every error raised deliberately by qkdlab."""


class OutOfRangeError(QkdLabError, ValueError):
    """A query falls outside the span covered by the input data."""


class SingularGeometryError(QkdLabError, ValueError):
    """Geometry is degenerate (e.g. zero range to the target)."""


class InsufficientHistoryError(QkdLabError, ValueError):
    """Not enough valid samples to form an estimate."""


class NoSignalError(QkdLabError, ValueError):
    """Measured counts carry no signal."""


class UnidentifiableChannelError(QkdLabError, ValueError):
    """Tomography data cannot pin down a polarization rotation."""


class OptimizationError(QkdLabError, RuntimeError):
    """An optimizer failed to improve on its starting point."""


class NoLockError(QkdLabError, RuntimeError):
    """Timing histogram shows no usable pulse-phase peak."""


class NoSinglePhotonBoundError(QkdLabError, ValueError):
    """Decoy analysis yields a non-positive single-photon yield bound."""


class ConfigError(QkdLabError, ValueError):
    """Scenario or input file is malformed."""
