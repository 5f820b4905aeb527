"""Exception types shared across the package."""


class DedTwinError(Exception):
    """Base class for errors raised by this package."""


class EmptyOverlapError(DedTwinError):
    """Raised when time series passed for synchronization share no time span."""


class EmptyPoolError(DedTwinError):
    """Raised when a melt-pool mask contains no foreground pixels."""


class UnidentifiableError(DedTwinError):
    """Raised when input/output data cannot support the requested model fit."""


class NonConvergenceError(DedTwinError):
    """Raised when an iterative fit diverges.

    The best iterate found so far is attached as ``best`` so callers can
    still inspect or reuse it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class TrainingError(DedTwinError):
    """Raised when surrogate training fails; carries the best model so far."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class EmptyDatasetError(DedTwinError):
    """Raised when dataset extraction yields no usable rows."""


class TuningError(DedTwinError):
    """Raised when controller tuning cannot find a stabilizing gain set."""
