"""
Rolling-window rebalancing engine.

Window k fits each strategy on rows [k*roll, k*roll + estimation_window) and
holds the resulting target weights over the next `roll` rows. Trailing rows
short of a full holding window are dropped.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from renyi_portfolio.errors import InsufficientDataError, ParameterError, RenyiPortfolioError, StrategyError
from renyi_portfolio.optim import Strategy, SolverConfig, solve_strategy
from renyi_portfolio.risk import sample_covariance

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ReturnMatrix:
    """
    T x n panel of arithmetic per-period returns, indexed by strictly increasing dates.
    """

    frame: pd.DataFrame

    def __post_init__(self) -> None:
        frame = self.frame
        if frame.shape[1] < 1 or frame.shape[0] < 1:
            raise ParameterError(f"Return matrix must be non-empty, got shape {frame.shape}")
        if not frame.index.is_monotonic_increasing or frame.index.has_duplicates:
            raise ParameterError("Return dates must be strictly increasing")
        values = frame.to_numpy(dtype=float)
        if not np.all(np.isfinite(values)):
            raise ParameterError("Return matrix contains missing or non-finite cells")
        if np.any(values <= -1.0):
            raise ParameterError("Returns must be greater than -1")

    @classmethod
    def from_array(
        cls,
        returns,
        dates: Optional[Sequence] = None,
        asset_names: Optional[Sequence[str]] = None,
    ) -> "ReturnMatrix":
        values = np.asarray(returns, dtype=float)
        if values.ndim != 2:
            raise ParameterError(f"Expected a T x n array, got shape {values.shape}")
        t, n = values.shape
        index = pd.DatetimeIndex(dates) if dates is not None else pd.RangeIndex(t)
        names = list(asset_names) if asset_names is not None else [f"asset_{i}" for i in range(n)]
        return cls(pd.DataFrame(values, index=index, columns=names))

    @property
    def values(self) -> np.ndarray:
        return self.frame.to_numpy(dtype=float)

    @property
    def dates(self) -> pd.Index:
        return self.frame.index

    @property
    def asset_names(self) -> List[str]:
        return [str(c) for c in self.frame.columns]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.frame.shape


@dataclass(frozen=True)
class BacktestConfig:
    estimation_window: int = 260
    roll: int = 26
    strategies: Tuple[Strategy, ...] = ()
    workers: int = 1
    solver: Optional[SolverConfig] = None

    def __post_init__(self) -> None:
        if self.roll < 1:
            raise ParameterError(f"roll must be at least 1, got {self.roll}")
        if self.estimation_window < 2:
            raise ParameterError(f"estimation_window must be at least 2, got {self.estimation_window}")
        names = [s.name for s in self.strategies]
        if len(set(names)) != len(names):
            raise ParameterError(f"Strategy names must be unique, got {names}")


def window_count(t: int, estimation_window: int, roll: int) -> int:
    """floor((T - estimation_window) / roll)."""
    return max((t - estimation_window) // roll, 0)


@dataclass
class BacktestResult:
    """
    Output of run_backtest.

    `weights[name]` is a (windows x n) array of target weights, `returns[name]`
    the out-of-sample portfolio returns indexed by date. `windows` holds
    (fit_start, hold_start, hold_end) row positions, and `covariances` the
    sample covariance of each estimation window. Strategies whose track
    aborted appear in `errors` only.
    """

    asset_names: List[str]
    windows: List[Tuple[int, int, int]]
    covariances: List[np.ndarray]
    strategies: List[str] = field(default_factory=list)
    weights: Dict[str, np.ndarray] = field(default_factory=dict)
    returns: Dict[str, pd.Series] = field(default_factory=dict)
    errors: Dict[str, StrategyError] = field(default_factory=dict)

    @property
    def completed(self) -> List[str]:
        return [name for name in self.strategies if name in self.weights]

    def weights_frame(self) -> pd.DataFrame:
        """Long table: one row per (strategy, window) with one column per asset."""
        rows = []
        for name in self.completed:
            for k, w in enumerate(self.weights[name]):
                rows.append({"strategy": name, "window": k, **dict(zip(self.asset_names, w))})
        return pd.DataFrame(rows, columns=["strategy", "window"] + self.asset_names)

    def returns_frame(self) -> pd.DataFrame:
        return pd.DataFrame({name: self.returns[name] for name in self.completed})


def _run_track(
    strategy: Strategy,
    values: np.ndarray,
    estimation_window: int,
    roll: int,
    solver: Optional[SolverConfig],
) -> Tuple[np.ndarray, np.ndarray]:
    """Fit and hold one strategy through every window."""
    windows = window_count(values.shape[0], estimation_window, roll)
    weights = np.empty((windows, values.shape[1]))
    returns = np.empty(windows * roll)
    prev = None
    for k in range(windows):
        start = k * roll
        fit = values[start : start + estimation_window]
        hold = values[start + estimation_window : start + estimation_window + roll]
        try:
            w = solve_strategy(strategy, fit, prev, solver)
        except (RenyiPortfolioError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            raise StrategyError(f"{strategy.name} failed in window {k}: {exc}", strategy.name, k) from exc
        weights[k] = w
        returns[k * roll : (k + 1) * roll] = hold @ w
        prev = w
        logger.debug("%s window %d/%d fitted", strategy.name, k + 1, windows)
    return weights, returns


def run_backtest(R: ReturnMatrix, cfg: BacktestConfig) -> BacktestResult:
    """
    Rebalance every configured strategy over rolling windows.

    Args:
        R: Return panel.
        cfg: Window layout, strategies and worker count.

    Returns:
        BacktestResult. Assembly follows the configured strategy order whatever
        the completion order of the workers.

    Raises:
        InsufficientDataError: If estimation_window + roll exceeds T.
    """
    values = R.values
    t, n = values.shape
    if cfg.estimation_window + cfg.roll > t:
        raise InsufficientDataError(
            f"Need at least estimation_window + roll = {cfg.estimation_window + cfg.roll} rows, got {t}"
        )
    windows = window_count(t, cfg.estimation_window, cfg.roll)
    bounds = [
        (k * cfg.roll, k * cfg.roll + cfg.estimation_window, k * cfg.roll + cfg.estimation_window + cfg.roll)
        for k in range(windows)
    ]
    covariances = [sample_covariance(values[a:b]).matrix for a, b, _ in bounds]
    held_dates = R.dates[cfg.estimation_window : cfg.estimation_window + windows * cfg.roll]
    logger.info("Backtest: %d windows, %d assets, %d strategies", windows, n, len(cfg.strategies))

    result = BacktestResult(
        asset_names=R.asset_names,
        windows=bounds,
        covariances=covariances,
        strategies=[s.name for s in cfg.strategies],
    )
    args = (values, cfg.estimation_window, cfg.roll, cfg.solver)

    outcomes: Dict[str, object] = {}
    if cfg.workers > 1 and len(cfg.strategies) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {s.name: pool.submit(_run_track, s, *args) for s in cfg.strategies}
            for name, future in futures.items():
                try:
                    outcomes[name] = future.result()
                except StrategyError as exc:
                    outcomes[name] = exc
    else:
        for s in cfg.strategies:
            try:
                outcomes[s.name] = _run_track(s, *args)
            except StrategyError as exc:
                outcomes[s.name] = exc

    for s in cfg.strategies:
        outcome = outcomes[s.name]
        if isinstance(outcome, StrategyError):
            logger.warning("Strategy %s aborted: %s", s.name, outcome)
            result.errors[s.name] = outcome
            continue
        weights, returns = outcome
        result.weights[s.name] = weights
        result.returns[s.name] = pd.Series(returns, index=held_dates, name=s.name)
        logger.info("Strategy %s done", s.name)
    return result


def weight_trajectory_stats(res: BacktestResult) -> Dict[str, List[Tuple[np.ndarray, np.ndarray]]]:
    """(w_k, w_k+1) pairs at each rebalance date, per completed strategy."""
    return {name: list(zip(res.weights[name][:-1], res.weights[name][1:])) for name in res.completed}
