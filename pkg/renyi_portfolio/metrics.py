"""
Performance indicators of a backtested strategy and the Sharpe ratio difference test.

Returns are per-period arithmetic returns; annualisation uses `periods`
per year (52 for weekly data).
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import special, stats

from renyi_portfolio.errors import DegenerateSampleError, InsufficientDataError, ParameterError, SharpeUndefinedError
from renyi_portfolio.risk import historical_var_cvar, is_flat, portfolio_moments

logger = logging.getLogger(__name__)

PERIODS_PER_YEAR = 52

REPORT_COLUMNS = [
    "annual_return",
    "annual_volatility",
    "sharpe",
    "skewness",
    "excess_kurtosis",
    "hist_var",
    "hist_cvar",
    "max_drawdown",
    "entropy_of_weights",
    "volatility_concentration",
    "diversification_ratio",
    "turnover",
]


# ----------------------------------------------------------------------
# Return-based indicators
# ----------------------------------------------------------------------
def annual_geometric_return(x, periods: int = PERIODS_PER_YEAR) -> float:
    """(prod(1 + x_t)) ** (periods / T) - 1; -1 after a total loss."""
    values = np.asarray(x, dtype=float).ravel()
    if values.size == 0:
        raise InsufficientDataError("Empty return series")
    if np.any(values <= -1.0):
        return -1.0
    return math.expm1(periods / values.size * float(np.log1p(values).sum()))


def annual_volatility(x, periods: int = PERIODS_PER_YEAR) -> float:
    values = np.asarray(x, dtype=float).ravel()
    if values.size < 2:
        raise InsufficientDataError("Volatility needs at least 2 observations")
    return float(values.std(ddof=1)) * math.sqrt(periods)


def sharpe_ratio(x, periods: int = PERIODS_PER_YEAR) -> float:
    """Annual geometric return over annual volatility (zero risk-free rate)."""
    values = np.asarray(x, dtype=float).ravel()
    vol = annual_volatility(values, periods)
    if is_flat(values, vol):
        raise SharpeUndefinedError("Sharpe ratio is undefined for a zero-variance series")
    return annual_geometric_return(values, periods) / vol


def max_drawdown(x) -> float:
    """Largest peak-to-trough loss of the wealth path starting at 1 (a value <= 0)."""
    values = np.asarray(x, dtype=float).ravel()
    wealth = np.concatenate([[1.0], np.cumprod(1.0 + values)])
    peaks = np.maximum.accumulate(wealth)
    return float(np.min(wealth / peaks - 1.0))


# ----------------------------------------------------------------------
# Weight-based indicators
# ----------------------------------------------------------------------
def weights_entropy(w) -> float:
    """exp(-sum w_i ln w_i), from 1 at a vertex to n at equal weights."""
    return float(np.exp(special.entr(np.asarray(w, dtype=float)).sum()))


def euler_contributions(w, cov) -> np.ndarray:
    """Share of portfolio variance of each asset: w_i (Sigma w)_i / w' Sigma w."""
    w = np.asarray(w, dtype=float)
    cov = np.asarray(cov, dtype=float)
    marginal = cov @ w
    variance = float(w @ marginal)
    if not variance > 0:
        raise ParameterError("Euler contributions need a portfolio with positive variance")
    return w * marginal / variance


def volatility_concentration(w, cov) -> float:
    return float(np.max(euler_contributions(w, cov)))


def diversification_ratio(w, cov) -> float:
    """(sum w_i sigma_i - sqrt(w' Sigma w)) / sum w_i sigma_i."""
    w = np.asarray(w, dtype=float)
    cov = np.asarray(cov, dtype=float)
    stand_alone = float(w @ np.sqrt(np.clip(np.diag(cov), 0.0, None)))
    if not stand_alone > 0:
        return 0.0
    portfolio = math.sqrt(max(float(w @ cov @ w), 0.0))
    return (stand_alone - portfolio) / stand_alone


def turnover(trajectory: Sequence[np.ndarray]) -> float:
    """Average L1 change between consecutive target weights; 0 for a single window."""
    weights = np.asarray(trajectory, dtype=float)
    if weights.shape[0] < 2:
        return 0.0
    return float(np.abs(np.diff(weights, axis=0)).sum() / (weights.shape[0] - 1))


# ----------------------------------------------------------------------
# Report
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class PerformanceReport:
    annual_geometric_return: float
    annual_volatility: float
    sharpe: float
    skewness: float
    excess_kurtosis: float
    hist_var: float
    hist_cvar: float
    max_drawdown: float
    entropy_of_weights: float
    volatility_concentration: float
    diversification_ratio: float
    turnover: float

    def as_row(self) -> Dict[str, float]:
        """Indicators in report column order."""
        values = [
            self.annual_geometric_return,
            self.annual_volatility,
            self.sharpe,
            self.skewness,
            self.excess_kurtosis,
            self.hist_var,
            self.hist_cvar,
            self.max_drawdown,
            self.entropy_of_weights,
            self.volatility_concentration,
            self.diversification_ratio,
            self.turnover,
        ]
        return dict(zip(REPORT_COLUMNS, values))


def performance_report(
    series,
    weights: Sequence[np.ndarray],
    covariances: Sequence[np.ndarray],
    r: float = 0.05,
    periods: int = PERIODS_PER_YEAR,
) -> PerformanceReport:
    """
    Compute the indicator battery of one strategy.

    Args:
        series: Out-of-sample portfolio returns.
        weights: Target weights of each rebalancing window.
        covariances: Sample covariance of each window's estimation period.
        r: Tail level of the historical VaR and CVaR.
        periods: Periods per year.

    Returns:
        The PerformanceReport. Weight indicators are averaged over windows.

    Raises:
        InsufficientDataError: If the series has fewer than 8 observations or
            no weights are given.
        SharpeUndefinedError: If the series has zero variance.
    """
    values = np.asarray(series, dtype=float).ravel()
    if values.size < 8:
        raise InsufficientDataError(f"Performance report needs at least 8 observations, got {values.size}")
    if len(weights) == 0:
        raise InsufficientDataError("Performance report needs at least one weight vector")
    if len(covariances) != len(weights):
        raise ParameterError("Need one covariance matrix per weight vector")

    try:
        hist_var, hist_cvar = historical_var_cvar(values, r)
    except InsufficientDataError:
        logger.warning("Series too short for historical VaR at r=%g; reporting NaN", r)
        hist_var, hist_cvar = math.nan, math.nan

    concentration = []
    for w, cov in zip(weights, covariances):
        try:
            concentration.append(volatility_concentration(w, cov))
        except ParameterError:
            concentration.append(math.nan)
    finite = [c for c in concentration if not math.isnan(c)]

    return PerformanceReport(
        annual_geometric_return=annual_geometric_return(values, periods),
        annual_volatility=annual_volatility(values, periods),
        sharpe=sharpe_ratio(values, periods),
        skewness=float(stats.skew(values, bias=True)),
        excess_kurtosis=float(stats.kurtosis(values, fisher=True, bias=True)),
        hist_var=hist_var,
        hist_cvar=hist_cvar,
        max_drawdown=max_drawdown(values),
        entropy_of_weights=float(np.mean([weights_entropy(w) for w in weights])),
        volatility_concentration=float(np.mean(finite)) if finite else math.nan,
        diversification_ratio=float(np.mean([diversification_ratio(w, c) for w, c in zip(weights, covariances)])),
        turnover=turnover(weights),
    )


# ----------------------------------------------------------------------
# Data summary and sub-periods
# ----------------------------------------------------------------------
SUMMARY_COLUMNS = [
    "mean",
    "std",
    "annual_return",
    "annual_volatility",
    "sharpe",
    "skewness",
    "excess_kurtosis",
    "jarque_bera",
    "jarque_bera_p",
    "hist_var",
]

PERIOD_COLUMNS = [
    "annual_return",
    "annual_volatility",
    "sharpe",
    "hist_var",
    "hist_cvar",
    "max_drawdown",
    "turnover",
]


def _or_nan(indicator: Callable[..., float], *args) -> float:
    try:
        return float(indicator(*args))
    except (InsufficientDataError, DegenerateSampleError):
        return math.nan


def data_summary(frame: pd.DataFrame, r: float = 0.05, periods: int = PERIODS_PER_YEAR) -> pd.DataFrame:
    """
    Summary statistics of every column of a return panel.

    Besides the return and risk figures, each asset gets the Jarque-Bera
    normality statistic and its p-value. A flat column gets NaN for its Sharpe
    ratio, moments and test.

    Args:
        frame: Per-period returns, one column per asset.
        r: Tail level of the historical VaR.
        periods: Periods per year.

    Returns:
        One row per asset, indexed by asset name, in SUMMARY_COLUMNS order.

    Raises:
        InsufficientDataError: If the panel has fewer than 8 rows.
    """
    if len(frame) < 8:
        raise InsufficientDataError(f"Data summary needs at least 8 observations, got {len(frame)}")
    rows: Dict[str, Dict[str, float]] = {}
    for name in frame.columns:
        x = frame[name].to_numpy(dtype=float)
        row = dict.fromkeys(SUMMARY_COLUMNS, math.nan)
        row["mean"], row["std"] = float(x.mean()), float(x.std(ddof=1))
        row["annual_return"] = annual_geometric_return(x, periods)
        row["annual_volatility"] = annual_volatility(x, periods)
        row["hist_var"] = _or_nan(lambda v: historical_var_cvar(v, r)[0], x)
        try:
            row["sharpe"] = sharpe_ratio(x, periods)
            _, _, row["skewness"], row["excess_kurtosis"] = portfolio_moments(x)
        except DegenerateSampleError:
            logger.warning("Asset %s has a flat return series", name)
        else:
            statistic, p_value = stats.jarque_bera(x)
            row["jarque_bera"], row["jarque_bera_p"] = float(statistic), float(p_value)
        rows[str(name)] = row
    table = pd.DataFrame.from_dict(rows, orient="index", columns=SUMMARY_COLUMNS)
    table.index.name = "asset"
    return table


def period_bounds(dates: Sequence, count: int = 4, breaks: Sequence = ()) -> List[Tuple[int, int]]:
    """
    Row ranges [start, stop) of consecutive sub-periods of a dated series.

    With `breaks`, each break date opens a new sub-period. Otherwise the rows
    are cut into `count` blocks of near-equal length.

    Raises:
        ParameterError: If there are fewer rows than requested blocks.
    """
    index = pd.DatetimeIndex(dates)
    n = len(index)
    if breaks:
        cuts = {int(index.searchsorted(pd.Timestamp(b))) for b in breaks}
        edges = [0] + sorted(c for c in cuts if 0 < c < n) + [n]
    else:
        if not 1 <= count <= n:
            raise ParameterError(f"Cannot cut {n} observations into {count} sub-periods")
        edges = [int(e) for e in np.linspace(0, n, count + 1).round()]
    return list(zip(edges[:-1], edges[1:]))


def performance_by_period(
    returns: Mapping[str, pd.Series],
    weights: Mapping[str, np.ndarray],
    rebalance_dates: Sequence,
    count: int = 4,
    breaks: Sequence = (),
    r: float = 0.05,
    periods: int = PERIODS_PER_YEAR,
) -> pd.DataFrame:
    """
    Indicators of each strategy over consecutive sub-periods of its track.

    The turnover of a sub-period averages the weight changes between the
    rebalances that fall inside it. Indicators a short or flat sub-period
    cannot support are NaN.

    Args:
        returns: Out-of-sample returns per strategy, all on the same dates.
        weights: Target weights per strategy, one row per rebalance.
        rebalance_dates: First holding date of each rebalance.
        count: Number of equal blocks when no breaks are given.
        breaks: Dates that open a new sub-period.
        r: Tail level of the historical VaR and CVaR.
        periods: Periods per year.

    Returns:
        One row per (strategy, period) with the period's first and last date,
        its observation count and PERIOD_COLUMNS.
    """
    rows: List[Dict[str, object]] = []
    if not returns:
        return pd.DataFrame(rows, columns=["strategy", "period", "start", "end", "observations"] + PERIOD_COLUMNS)
    dates = pd.DatetimeIndex(next(iter(returns.values())).index)
    rebalances = pd.DatetimeIndex(rebalance_dates)
    bounds = period_bounds(dates, count, breaks)
    for name, series in returns.items():
        values = series.to_numpy(dtype=float)
        trajectory = np.asarray(weights[name], dtype=float)
        for k, (a, b) in enumerate(bounds, start=1):
            x = values[a:b]
            start, end = dates[a], dates[b - 1]
            inside = (rebalances >= start) & (rebalances <= end)
            rows.append(
                {
                    "strategy": name,
                    "period": k,
                    "start": start.date().isoformat(),
                    "end": end.date().isoformat(),
                    "observations": b - a,
                    "annual_return": annual_geometric_return(x, periods),
                    "annual_volatility": _or_nan(annual_volatility, x, periods),
                    "sharpe": _or_nan(sharpe_ratio, x, periods),
                    "hist_var": _or_nan(lambda v: historical_var_cvar(v, r)[0], x),
                    "hist_cvar": _or_nan(lambda v: historical_var_cvar(v, r)[1], x),
                    "max_drawdown": max_drawdown(x),
                    "turnover": turnover(trajectory[inside]),
                }
            )
    logger.info("Split %d strategies into %d sub-periods", len(returns), len(bounds))
    return pd.DataFrame(rows)


# ----------------------------------------------------------------------
# Sharpe ratio difference test
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class SharpeTestResult:
    sharpe_a: float
    sharpe_b: float
    difference: float
    two_sided_p: float
    resamples: int
    block_size: int


def _sharpe_difference(mu: np.ndarray, gamma: np.ndarray) -> float:
    return mu[0] / math.sqrt(gamma[0] - mu[0] ** 2) - mu[1] / math.sqrt(gamma[1] - mu[1] ** 2)


def _gradient(mu: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    va = (gamma[0] - mu[0] ** 2) ** 1.5
    vb = (gamma[1] - mu[1] ** 2) ** 1.5
    return np.array([gamma[0] / va, -gamma[1] / vb, -mu[0] / (2.0 * va), mu[1] / (2.0 * vb)])


def _parzen(x: np.ndarray) -> np.ndarray:
    x = np.abs(x)
    return np.where(x <= 0.5, 1.0 - 6.0 * x**2 + 6.0 * x**3, np.where(x <= 1.0, 2.0 * (1.0 - x) ** 3, 0.0))


def _parzen_bandwidth(v: np.ndarray) -> float:
    """Automatic bandwidth from AR(1) fits of each column (equal weights)."""
    t = v.shape[0]
    numerator = denominator = 0.0
    for column in v.T:
        lagged, current = column[:-1], column[1:]
        denom = float(lagged @ lagged)
        rho = float(np.clip(lagged @ current / denom, -0.97, 0.97)) if denom > 0 else 0.0
        sigma2 = float(np.mean((current - rho * lagged) ** 2))
        numerator += 4.0 * rho**2 * sigma2**2 / (1.0 - rho) ** 8
        denominator += sigma2**2 / (1.0 - rho) ** 4
    alpha2 = numerator / denominator if denominator > 0 else 0.0
    return 2.6614 * (alpha2 * t) ** 0.2


def _hac_covariance(y: np.ndarray) -> np.ndarray:
    """Parzen-kernel HAC estimate of the long-run covariance of the rows of y."""
    t = y.shape[0]
    v = y - y.mean(axis=0)
    bandwidth = _parzen_bandwidth(v)
    psi = v.T @ v / t
    if bandwidth > 0:
        for lag in range(1, t):
            weight = float(_parzen(np.array(lag / bandwidth)))
            if weight == 0.0:
                break
            gamma = v[lag:].T @ v[:-lag] / t
            psi += weight * (gamma + gamma.T)
    return psi * t / (t - 4)


def _standard_error(grad: np.ndarray, psi: np.ndarray, t: int) -> float:
    return math.sqrt(max(float(grad @ psi @ grad), 0.0) / t)


def _moment_series(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.column_stack([a, b, a * a, b * b])


def sharpe_test(
    a,
    b,
    resamples: int = 5000,
    block_size: int = 5,
    seed: int = 0,
) -> SharpeTestResult:
    """
    Two-sided test of equal Sharpe ratios by studentized circular block bootstrap.

    The paired series are resampled in circular blocks, so their cross
    dependence is preserved. The observed difference is studentized with a
    Parzen-kernel HAC standard error; each bootstrap difference, centred at the
    observed one, with the block-mean standard error of its resample.

    Args:
        a: First return series.
        b: Second return series, same length.
        resamples: Number of bootstrap resamples M.
        block_size: Block length.
        seed: Seed of the block start draws.

    Returns:
        SharpeTestResult with per-period Sharpe ratios and p = (1 + #{d* >= d}) / (M + 1).

    Raises:
        ParameterError: If the lengths differ or the settings are invalid.
        InsufficientDataError: If the series are shorter than 10 blocks.
    """
    x = np.asarray(a, dtype=float).ravel()
    y = np.asarray(b, dtype=float).ravel()
    if x.size != y.size:
        raise ParameterError(f"Series lengths differ: {x.size} vs {y.size}")
    if resamples < 1 or block_size < 1:
        raise ParameterError("resamples and block_size must be positive")
    t = x.size
    if t < 10 * block_size:
        raise InsufficientDataError(f"Sharpe test needs at least {10 * block_size} observations, got {t}")

    moments = _moment_series(x, y)
    mu = moments[:, :2].mean(axis=0)
    gamma = moments[:, 2:].mean(axis=0)
    flat = any(is_flat(s, float(s.std())) for s in (x, y))
    if flat or np.any(gamma - mu**2 <= 0):
        raise SharpeUndefinedError("Sharpe test needs series with positive variance")
    sharpe_a = mu[0] / math.sqrt(gamma[0] - mu[0] ** 2)
    sharpe_b = mu[1] / math.sqrt(gamma[1] - mu[1] ** 2)
    difference = sharpe_a - sharpe_b
    if np.array_equal(x, y) or difference == 0.0:
        return SharpeTestResult(sharpe_a, sharpe_b, 0.0, 1.0, resamples, block_size)

    se = _standard_error(_gradient(mu, gamma), _hac_covariance(moments), t)
    observed = abs(difference) / se if se > 0 else math.inf

    blocks = math.ceil(t / block_size)
    length = blocks * block_size
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, t, size=(resamples, blocks))
    offsets = np.arange(block_size)
    exceed = 0
    for row in starts:
        index = ((row[:, None] + offsets[None, :]) % t).ravel()
        sample = moments[index]
        mu_s = sample[:, :2].mean(axis=0)
        gamma_s = sample[:, 2:].mean(axis=0)
        if np.any(gamma_s - mu_s**2 <= 0):
            continue
        centred = sample - sample.mean(axis=0)
        zeta = centred.reshape(blocks, block_size, 4).sum(axis=1) / math.sqrt(block_size)
        psi_s = zeta.T @ zeta / blocks
        se_s = _standard_error(_gradient(mu_s, gamma_s), psi_s, length)
        if not se_s > 0:
            continue
        if abs(_sharpe_difference(mu_s, gamma_s) - difference) / se_s >= observed:
            exceed += 1

    p_value = (1 + exceed) / (resamples + 1)
    logger.debug("Sharpe test: diff=%.4f, d=%.3f, p=%.4f", difference, observed, p_value)
    return SharpeTestResult(sharpe_a, sharpe_b, difference, p_value, resamples, block_size)


def sharpe_test_matrix(
    series_by_name: Mapping[str, np.ndarray],
    resamples: int = 5000,
    block_size: int = 5,
    seed: int = 0,
    names: Optional[List[str]] = None,
) -> pd.DataFrame:
    """Symmetric matrix of pairwise Sharpe test p-values (1 on the diagonal)."""
    labels = list(names or series_by_name.keys())
    matrix = pd.DataFrame(np.ones((len(labels), len(labels))), index=labels, columns=labels)
    for left, right in itertools.combinations(labels, 2):
        try:
            p = sharpe_test(series_by_name[left], series_by_name[right], resamples, block_size, seed).two_sided_p
        except (SharpeUndefinedError, InsufficientDataError) as exc:
            logger.warning("Sharpe test %s vs %s skipped: %s", left, right, exc)
            p = math.nan
        matrix.loc[left, right] = p
        matrix.loc[right, left] = p
    return matrix
