"""
Long-only portfolio optimisation on the standard simplex.

Weights are searched through the reparameterisation w_i = v_i^2 / sum(v_j^2),
which turns the simplex into an unconstrained space where scipy's Nelder-Mead
direct search applies. Every strategy of the backtest (Renyi-optimal, minimum
variance, minimum modified VaR/CVaR, maximum Sharpe, equal weights, 60/40) is
defined here.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from renyi_portfolio.entropy import MRule, RenyiParams, m_spacings_estimate, resolve_m
from renyi_portfolio.errors import (
    DegenerateSampleError,
    InfeasibleError,
    InsufficientDataError,
    ObjectiveError,
    ParameterError,
)
from renyi_portfolio.metrics import annual_geometric_return, annual_volatility
from renyi_portfolio.risk import (
    CovarianceKind,
    ShrinkageIntensity,
    as_panel,
    modified_cvar_of_series,
    modified_var_of_series,
    sample_covariance,
    shrinkage_covariance,
)

logger = logging.getLogger(__name__)

Weights = np.ndarray
Objective = Callable[[Weights], float]

MIN_WINDOW = 30
# value handed to the direct search when the objective is not finite
_NONFINITE_PENALTY = 1e300


class StrategyKind(str, Enum):
    ROPT = "ropt"
    MV = "mv"
    MVAR = "mvar"
    MCVAR = "mcvar"
    MSR = "msr"
    EW = "ew"
    SIXTY_FORTY = "sixty_forty"


@dataclass(frozen=True)
class Strategy:
    """
    An allocation rule and its parameters.

    Only the fields relevant to `kind` are used: alpha/m/bias_correct for ROpt,
    covariance/delta for MV, r for MVaR and MCVaR, equity/bond (column
    positions) for 60/40. turnover_cap bounds the L1 change between consecutive
    rebalances.
    """

    name: str
    kind: StrategyKind
    alpha: float = 1.0
    m: MRule = "N^(1/1.5)"
    bias_correct: bool = False
    covariance: CovarianceKind = CovarianceKind.SAMPLE
    delta: ShrinkageIntensity = "auto"
    r: float = 0.05
    turnover_cap: Optional[float] = None
    equity: int = 0
    bond: int = 1
    restarts: int = 3
    annualization: int = 52

    def __post_init__(self) -> None:
        if self.turnover_cap is not None and not self.turnover_cap > 0:
            raise ParameterError(f"turnover_cap must be positive, got {self.turnover_cap}")
        if self.kind is StrategyKind.ROPT:
            RenyiParams(self.alpha, None, self.bias_correct)
        if self.kind in (StrategyKind.MVAR, StrategyKind.MCVAR) and not 0 < self.r <= 0.5:
            raise ParameterError(f"Tail level r must lie in (0, 0.5], got {self.r}")
        if self.kind is StrategyKind.SIXTY_FORTY and self.equity == self.bond:
            raise ParameterError("60/40 needs two distinct asset positions")
        if self.restarts < 1:
            raise ParameterError(f"restarts must be at least 1, got {self.restarts}")

    @classmethod
    def ropt(cls, alpha: float, m: MRule = "N^(1/1.5)", **kwargs) -> "Strategy":
        kwargs.setdefault("name", f"ROpt({alpha:g})")
        return cls(kind=StrategyKind.ROPT, alpha=alpha, m=m, **kwargs)

    @classmethod
    def mv(cls, covariance: CovarianceKind = CovarianceKind.SAMPLE, **kwargs) -> "Strategy":
        kwargs.setdefault("name", "MV" if covariance is CovarianceKind.SAMPLE else "MV-shrink")
        return cls(kind=StrategyKind.MV, covariance=covariance, **kwargs)

    @classmethod
    def mvar(cls, r: float = 0.05, **kwargs) -> "Strategy":
        kwargs.setdefault("name", f"MVaR({r:g})")
        return cls(kind=StrategyKind.MVAR, r=r, **kwargs)

    @classmethod
    def mcvar(cls, r: float = 0.05, **kwargs) -> "Strategy":
        kwargs.setdefault("name", f"MCVaR({r:g})")
        return cls(kind=StrategyKind.MCVAR, r=r, **kwargs)

    @classmethod
    def msr(cls, turnover_cap: Optional[float] = 0.075, **kwargs) -> "Strategy":
        kwargs.setdefault("name", "MSR")
        return cls(kind=StrategyKind.MSR, turnover_cap=turnover_cap, **kwargs)

    @classmethod
    def ew(cls, **kwargs) -> "Strategy":
        kwargs.setdefault("name", "EW")
        return cls(kind=StrategyKind.EW, **kwargs)

    @classmethod
    def sixty_forty(cls, equity: int = 0, bond: int = 1, **kwargs) -> "Strategy":
        kwargs.setdefault("name", "60/40")
        return cls(kind=StrategyKind.SIXTY_FORTY, equity=equity, bond=bond, **kwargs)


@dataclass(frozen=True)
class SolverConfig:
    """
    Settings of the simplex direct search.

    Attributes:
        start: First starting point (equal weights when None).
        extra_starts: Further starting points tried in order.
        restarts: Maximum number of starting points used.
        max_iters: Iteration cap; None means 500 * n.
        xatol: Simplex size tolerance.
        fatol: Objective spread tolerance.
        initial_step: Edge length of the initial simplex in v-space.
        penalty: Exact-penalty weight of constraint violations.
    """

    start: Optional[Weights] = None
    extra_starts: Tuple[Weights, ...] = ()
    restarts: int = 3
    max_iters: Optional[int] = None
    xatol: float = 1e-6
    fatol: float = 1e-12
    initial_step: float = 0.1
    penalty: float = 1e3

    def __post_init__(self) -> None:
        if not (self.xatol > 0 and self.fatol > 0 and self.initial_step > 0 and self.penalty > 0):
            raise ParameterError("Solver tolerances, step and penalty must be positive")
        if self.restarts < 1:
            raise ParameterError(f"restarts must be at least 1, got {self.restarts}")


@dataclass
class OptimizationResult:
    weights: Weights
    value: float
    start_index: int
    evaluations: int
    backstop_engaged: bool = False
    start_values: List[float] = field(default_factory=list)


# ----------------------------------------------------------------------
# Constraints
# ----------------------------------------------------------------------
def _l1(a: Weights, b: Weights) -> float:
    return float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def apply_turnover_cap(prev: Weights, proposed: Weights, cap: float) -> Weights:
    """
    Pull `proposed` back towards `prev` until the L1 turnover equals `cap`.

    Returns `proposed` unchanged when it already satisfies the cap.
    """
    if not cap > 0:
        raise ParameterError(f"Turnover cap must be positive, got {cap}")
    prev = np.asarray(prev, dtype=float)
    proposed = np.asarray(proposed, dtype=float)
    distance = _l1(prev, proposed)
    if distance <= cap:
        return proposed
    return prev + (cap / distance) * (proposed - prev)


@dataclass(frozen=True)
class TurnoverConstraint:
    """sum |w - prev| <= cap."""

    prev: Weights
    cap: float

    def violation(self, w: Weights) -> float:
        return max(0.0, _l1(w, self.prev) - self.cap)

    def repair(self, w: Weights) -> Weights:
        return apply_turnover_cap(self.prev, w, self.cap)


# ----------------------------------------------------------------------
# Simplex search
# ----------------------------------------------------------------------
def normalize_weights(w) -> Weights:
    """Clip tiny negatives and renormalise to sum exactly 1 (up to rounding)."""
    w = np.clip(np.asarray(w, dtype=float), 0.0, None)
    total = w.sum()
    if not total > 0:
        raise InfeasibleError("Weight vector has no positive entry")
    return w / total


def _to_weights(v: np.ndarray) -> Weights:
    squared = v * v
    total = squared.sum()
    if not total > 0:
        return np.full(v.size, 1.0 / v.size)
    return squared / total


def _initial_simplex(v0: np.ndarray, step: float) -> np.ndarray:
    simplex = np.tile(v0, (v0.size + 1, 1))
    for i in range(v0.size):
        simplex[i + 1, i] += step
    return simplex


def _solve(
    objective: Objective,
    n: int,
    cfg: SolverConfig,
    extra_constraints: Sequence[TurnoverConstraint] = (),
) -> OptimizationResult:
    if n < 2:
        raise ParameterError(f"Simplex search needs at least 2 assets, got {n}")

    stats = {"evaluations": 0, "finite": 0}

    def raw(w: Weights) -> float:
        stats["evaluations"] += 1
        try:
            value = float(objective(w))
        except (DegenerateSampleError, ArithmeticError, ValueError) as exc:
            logger.debug("Objective failed at w=%s: %s", np.round(w, 6), exc)
            return math.nan
        if math.isfinite(value):
            stats["finite"] += 1
        return value

    def penalized(v: np.ndarray) -> float:
        w = _to_weights(v)
        value = raw(w)
        if not math.isfinite(value):
            return _NONFINITE_PENALTY
        return value + cfg.penalty * sum(c.violation(w) for c in extra_constraints)

    def feasible(w: Weights) -> bool:
        return all(c.violation(w) <= 1e-12 for c in extra_constraints)

    starts: List[Weights] = [np.full(n, 1.0 / n) if cfg.start is None else normalize_weights(cfg.start)]
    for extra in cfg.extra_starts:
        candidate = normalize_weights(extra)
        if not any(np.array_equal(candidate, s) for s in starts):
            starts.append(candidate)
    starts = starts[: cfg.restarts]

    max_iters = cfg.max_iters or 500 * n
    best: Optional[Tuple[float, Weights, int]] = None
    start_values: List[float] = []
    for index, start in enumerate(starts):
        start_value = raw(start)
        start_values.append(start_value)
        if math.isfinite(start_value) and feasible(start):
            if best is None or start_value < best[0]:
                best = (start_value, start, index)

        v0 = np.sqrt(start)
        result = optimize.minimize(
            penalized,
            v0,
            method="Nelder-Mead",
            options={
                "initial_simplex": _initial_simplex(v0, cfg.initial_step),
                "xatol": cfg.xatol,
                "fatol": cfg.fatol,
                "maxiter": max_iters,
                "maxfev": 2 * max_iters,
            },
        )
        w = normalize_weights(_to_weights(result.x))
        value = raw(w)
        logger.debug("Start %d: %d iterations, objective %.6g -> %.6g", index, result.nit, start_value, value)
        if math.isfinite(value) and (best is None or value < best[0]):
            best = (value, w, index)

    if stats["finite"] == 0:
        raise ObjectiveError("Objective was not finite at any probed point")
    if best is None:
        raise InfeasibleError("No feasible point found")

    value, weights, index = best
    engaged = False
    for constraint in extra_constraints:
        if constraint.violation(weights) > 1e-12:
            weights = normalize_weights(constraint.repair(weights))
            engaged = True
    if engaged:
        value = raw(weights)
        # the repaired point may lose to a feasible start
        for start, start_value in zip(starts, start_values):
            if math.isfinite(start_value) and feasible(start) and start_value < value:
                weights, value = start, start_value
    if not feasible(weights):
        raise InfeasibleError("Constraints could not be satisfied")

    return OptimizationResult(
        weights=weights,
        value=value,
        start_index=index,
        evaluations=stats["evaluations"],
        backstop_engaged=engaged,
        start_values=start_values,
    )


def minimize_on_simplex(
    objective: Objective,
    n: int,
    cfg: SolverConfig = SolverConfig(),
    extra_constraints: Sequence[TurnoverConstraint] = (),
) -> Weights:
    """
    Minimise `objective` over the standard n-simplex.

    Args:
        objective: Function of a weight vector; may return nan/inf or raise
            DegenerateSampleError where undefined.
        n: Number of assets.
        cfg: Solver settings and starting points.
        extra_constraints: Constraints handled by exact penalty plus a
            feasibility repair at the end.

    Returns:
        Non-negative weights summing to 1. The objective there is no larger
        than at any feasible starting point.

    Raises:
        ObjectiveError: If the objective is not finite at any starting point.
        InfeasibleError: If no feasible point is found.
    """
    return _solve(objective, n, cfg, extra_constraints).weights


# ----------------------------------------------------------------------
# Strategies
# ----------------------------------------------------------------------
def ropt_objective(R, params: RenyiParams) -> Objective:
    """Exponential Renyi entropy estimate of the portfolio return series, as a function of w."""
    x = as_panel(R)
    m = resolve_m(params.m, x.shape[0])
    fixed = RenyiParams(params.alpha, m, params.bias_correct)

    def objective(w: Weights) -> float:
        return m_spacings_estimate(x @ w, fixed)

    return objective


def _variance_objective(cov: np.ndarray) -> Objective:
    def objective(w: Weights) -> float:
        return float(w @ cov @ w)

    return objective


def _series_objective(x: np.ndarray, measure: Callable[[np.ndarray], float]) -> Objective:
    def objective(w: Weights) -> float:
        return measure(x @ w)

    return objective


def _sharpe_objective(x: np.ndarray, periods: int) -> Objective:
    def objective(w: Weights) -> float:
        p = x @ w
        vol = annual_volatility(p, periods)
        if not vol > 0:
            return math.nan
        return -annual_geometric_return(p, periods) / vol

    return objective


def strategy_objective(s: Strategy, R) -> Objective:
    """The function of w minimised by an optimising strategy."""
    x = as_panel(R)
    if s.kind is StrategyKind.ROPT:
        return _ropt_with_rule(x, s)
    if s.kind is StrategyKind.MV:
        if s.covariance is CovarianceKind.SHRINKAGE:
            cov = shrinkage_covariance(x, s.delta).matrix
        else:
            cov = sample_covariance(x).matrix
        return _variance_objective(cov)
    if s.kind is StrategyKind.MVAR:
        return _series_objective(x, lambda p: modified_var_of_series(p, s.r))
    if s.kind is StrategyKind.MCVAR:
        return _series_objective(x, lambda p: modified_cvar_of_series(p, s.r))
    if s.kind is StrategyKind.MSR:
        return _sharpe_objective(x, s.annualization)
    raise ParameterError(f"Strategy {s.name} ({s.kind.value}) has no objective")


def _ropt_with_rule(x: np.ndarray, s: Strategy) -> Objective:
    m = resolve_m(s.m, x.shape[0])
    return ropt_objective(x, RenyiParams(s.alpha, m, s.bias_correct))


def _lowest_variance_vertex(x: np.ndarray) -> Weights:
    vertex = np.zeros(x.shape[1])
    vertex[int(np.argmin(x.var(axis=0, ddof=1)))] = 1.0
    return vertex


def solve_strategy_detailed(
    s: Strategy, R, prev: Optional[Weights] = None, cfg: Optional[SolverConfig] = None
) -> OptimizationResult:
    """
    solve_strategy with the full optimisation record.

    The turnover cap binds only when `prev` is given, so the first window of a
    backtest is fitted uncapped.
    """
    x = as_panel(R)
    t, n = x.shape
    if t < MIN_WINDOW:
        raise InsufficientDataError(f"Estimation window needs at least {MIN_WINDOW} rows, got {t}")

    if s.kind is StrategyKind.EW:
        w = np.full(n, 1.0 / n)
        return OptimizationResult(weights=w, value=math.nan, start_index=0, evaluations=0)
    if s.kind is StrategyKind.SIXTY_FORTY:
        if max(s.equity, s.bond) >= n or min(s.equity, s.bond) < 0:
            raise ParameterError(f"60/40 positions ({s.equity}, {s.bond}) out of range for {n} assets")
        w = np.zeros(n)
        w[s.equity] = 0.6
        w[s.bond] = 0.4
        return OptimizationResult(weights=w, value=math.nan, start_index=0, evaluations=0)

    objective = strategy_objective(s, x)
    extra_starts = [] if prev is None else [np.asarray(prev, dtype=float)]
    extra_starts.append(_lowest_variance_vertex(x))
    base = cfg or SolverConfig()
    solver_cfg = SolverConfig(
        start=base.start,
        extra_starts=tuple(extra_starts) + tuple(base.extra_starts),
        restarts=min(base.restarts, s.restarts) if cfg is not None else s.restarts,
        max_iters=base.max_iters,
        xatol=base.xatol,
        fatol=base.fatol,
        initial_step=base.initial_step,
        penalty=base.penalty,
    )
    constraints = []
    if s.turnover_cap is not None and prev is not None:
        constraints.append(TurnoverConstraint(prev=np.asarray(prev, dtype=float), cap=s.turnover_cap))
    result = _solve(objective, n, solver_cfg, constraints)
    logger.debug(
        "%s: objective %.6g from start %d after %d evaluations (backstop=%s)",
        s.name,
        result.value,
        result.start_index,
        result.evaluations,
        result.backstop_engaged,
    )
    return result


def solve_strategy(s: Strategy, R, prev: Optional[Weights] = None, cfg: Optional[SolverConfig] = None) -> Weights:
    """
    Fit the weights of strategy `s` on an estimation window.

    Args:
        s: Strategy definition.
        R: T x n window of returns (T >= 30).
        prev: Weights held before this rebalance; enables the turnover cap.
            The first allocation of a backtest has no previous weights and is
            not capped.
        cfg: Optional solver settings.

    Returns:
        Weights on the simplex.
    """
    return solve_strategy_detailed(s, R, prev, cfg).weights
