"""
Exception hierarchy for the renyi_portfolio package.

Every error raised on purpose by the package derives from RenyiPortfolioError.
Errors that describe a bad argument also derive from ValueError so callers
catching ValueError keep working.
"""

from typing import Any, Optional, Sequence, Tuple


class RenyiPortfolioError(Exception):
    """Base class for all package errors."""


class InvalidMarginalError(RenyiPortfolioError, ValueError):
    """A Marginal was built with parameters outside its domain."""


class UnsupportedMarginalError(RenyiPortfolioError, ValueError):
    """The requested operation is not available for this marginal family."""


class ParameterError(RenyiPortfolioError, ValueError):
    """An argument (alpha, m, r, delta, cap, window sizes...) is out of range."""


class DegenerateSampleError(RenyiPortfolioError, ValueError):
    """The sample carries no spread information (constant values, zero spacings)."""


class SharpeUndefinedError(DegenerateSampleError):
    """The Sharpe ratio of a zero-variance series is undefined."""


class InsufficientDataError(RenyiPortfolioError, ValueError):
    """Too few observations for the requested estimator or window layout."""


class QuadratureError(RenyiPortfolioError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, estimate: float = float("nan"), interval: Tuple[float, float] = (0.0, 0.0)):
        super().__init__(message)
        self.estimate = estimate
        self.interval = interval


class DivergenceError(RenyiPortfolioError):
    """An entropy integral diverges or a density is unbounded."""


class InfeasibleError(RenyiPortfolioError):
    """No point satisfies the optimisation constraints."""


class ObjectiveError(RenyiPortfolioError):
    """The objective never evaluated to a finite number."""


class IngestionError(RenyiPortfolioError, ValueError):
    """A return file could not be turned into a ReturnMatrix."""

    def __init__(self, message: str, rows: Optional[Sequence[Any]] = None, columns: Optional[Sequence[str]] = None):
        super().__init__(message)
        self.rows = list(rows or [])
        self.columns = list(columns or [])


class StrategyError(RenyiPortfolioError):
    """A strategy failed while fitting a given rebalancing window."""

    def __init__(self, message: str, strategy: str = "", window: int = -1):
        super().__init__(message)
        self.strategy = strategy
        self.window = window

    def __reduce__(self):
        return (self.__class__, (str(self), self.strategy, self.window))


class StudyError(RenyiPortfolioError):
    """A synthetic study failed."""

    def __init__(self, message: str, study: str = ""):
        super().__init__(message)
        self.study = study

    def __reduce__(self):
        return (self.__class__, (str(self), self.study))
