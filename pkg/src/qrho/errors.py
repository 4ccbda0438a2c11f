"""Exception types shared across the package."""


class QrhoError(Exception):
    """Base class for all package-specific errors."""


class DomainError(QrhoError, ValueError):
    """Input outside the mathematical domain of an operation."""


class UnsupportedOrderError(QrhoError, ValueError):
    """Polynomial or state order above the supported cap."""


class AccuracyError(QrhoError):
    """Quadrature or solver could not reach the requested tolerance.

    Carries the best available estimate so callers can decide whether
    to degrade gracefully.
    """

    def __init__(self, message, value=None, err_est=None):
        super().__init__(message)
        self.value = value
        self.err_est = err_est


class BudgetError(QrhoError):
    """Step or subdivision budget exceeded."""


class StabilityError(QrhoError, ValueError):
    """Configuration violates an explicit-scheme stability bound."""


class TailMassError(QrhoError, ValueError):
    """Requested grid does not capture enough probability mass."""


class ResolutionError(QrhoError, ValueError):
    """Step size too coarse for the requested phase resolution."""


class EvaluationPointError(QrhoError, ValueError):
    """Evaluation requested too close to a node of the trajectory."""


class TimingError(QrhoError, ValueError):
    """Quantity requested outside the asymptotic regime it is defined in."""


class SingularConfigurationError(QrhoError, ValueError):
    """Degenerate configuration (vanishing Gaussian width parameter)."""


class SamplingError(QrhoError, ValueError):
    """Empty or unusable sample set."""


class FitError(QrhoError):
    """Regression preconditions violated (for example non-monotone residuals)."""


class DomainSizeError(QrhoError, ValueError):
    """Solution reached the grid boundary; the domain is too small."""


class ConfigError(QrhoError, ValueError):
    """Invalid run configuration; the message names the offending field."""


class PrecisionWarning(UserWarning):
    """Monte Carlo estimate has a large relative standard error."""
