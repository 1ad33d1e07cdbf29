"""Exception types raised across the package."""


class AggDiffError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(AggDiffError, ValueError):
    pass


class DomainMismatchError(AggDiffError, ValueError):
    pass


class ResolutionError(AggDiffError, ValueError):
    pass


class GridMismatchError(AggDiffError, ValueError):
    pass


class GeometryError(AggDiffError, ValueError):
    pass


class ConfigError(AggDiffError, ValueError):
    pass


class NumericalBlowupError(AggDiffError, ArithmeticError):
    """Raised when a time step produces non-finite or runaway values.

    ``t`` is the time of the last good state and ``last_good`` holds it
    (a Field, or the partial Trajectory when raised from ``simulate``).
    """

    def __init__(self, message, t=None, last_good=None):
        super().__init__(message)
        self.t = t
        self.last_good = last_good


class BracketError(AggDiffError, RuntimeError):
    """Bisection bracket does not separate the two predicate outcomes."""

    def __init__(self, message, low_verdict=None, high_verdict=None):
        super().__init__(message)
        self.low_verdict = low_verdict
        self.high_verdict = high_verdict
