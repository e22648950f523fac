"""Exception hierarchy shared by all modules."""


class TlbeeError(Exception):
    """Base class for library errors."""


class DomainError(TlbeeError, ValueError):
    """An argument lies outside the domain of the requested function."""


class NumericalFailure(TlbeeError, ArithmeticError):
    """A numerical approximation produced an invalid intermediate quantity."""


class ConvergenceWarning(UserWarning):
    """A truncated series did not reach its requested tolerance."""


class InsufficientDataError(TlbeeError, ValueError):
    """Too few samples for the requested operation."""


class DegenerateClassifierError(TlbeeError, ValueError):
    """The classifier direction vanishes or a required matrix is singular."""


class CalibrationError(TlbeeError, RuntimeError):
    """Bayes-error calibration did not converge.

    Attributes
    ----------
    best_error : float
        Closest measured error reached during the search.
    best_theta : float
        Mean offset at which ``best_error`` was measured.
    """

    def __init__(self, message, best_error=float("nan"), best_theta=float("nan")):
        super().__init__(message)
        self.best_error = best_error
        self.best_theta = best_theta


class ConfigError(TlbeeError, ValueError):
    """Invalid experiment or CLI configuration."""


class DataFormatError(TlbeeError, ValueError):
    """Malformed input data file."""
