"""Exception types shared across the package."""


class MpinvError(Exception):
    """Base class for all package errors."""


class DomainError(MpinvError, ValueError):
    """A point lies on an atom / singularity of the map being evaluated."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SignedMeasureError(MpinvError, ValueError):
    """The requested measure would carry negative mass."""


class IterationError(MpinvError, ArithmeticError):
    """A fixed-point solve failed to converge."""

    def __init__(self, message, last_iterate=None, residual=None, index=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
        self.index = index


class SingularityError(MpinvError, ZeroDivisionError):
    """A denominator vanished (or nearly so)."""


class ConfigurationError(MpinvError, ValueError):
    """Inconsistent configuration."""


class EstimationError(MpinvError):
    """The estimator is undefined at some quadrature nodes."""

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = [] if nodes is None else list(nodes)
