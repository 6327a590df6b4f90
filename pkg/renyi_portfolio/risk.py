"""
Covariance estimators and tail risk measures.

Sample and constant-correlation shrinkage covariance, historical VaR/CVaR,
Cornish-Fisher VaR and the modified expected shortfall of the Edgeworth
expansion. All functions are pure.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from scipy import stats

from renyi_portfolio.errors import DegenerateSampleError, InsufficientDataError, ParameterError

logger = logging.getLogger(__name__)

ShrinkageIntensity = Union[float, str]

# Relative floor under which a standard deviation counts as zero.
FLAT_TOLERANCE = 1e-12


class CovarianceKind(str, Enum):
    SAMPLE = "sample"
    SHRINKAGE = "shrinkage"


class TailMethod(str, Enum):
    HISTORICAL = "historical"
    CORNISH_FISHER = "cornish_fisher"
    MODIFIED_ES = "modified_es"


@dataclass(frozen=True)
class CovarianceEstimate:
    """
    Covariance matrix and how it was obtained.

    `delta` is the shrinkage intensity actually applied (None for the sample
    estimator); `fallback` is set when the automatic intensity was degenerate
    and delta = 0 was used instead.
    """

    matrix: np.ndarray
    kind: CovarianceKind = CovarianceKind.SAMPLE
    delta: Optional[float] = None
    fallback: bool = False


@dataclass(frozen=True)
class TailSpec:
    r: float = 0.05
    method: TailMethod = TailMethod.HISTORICAL

    def __post_init__(self) -> None:
        _check_level(self.r)


def _check_level(r: float) -> None:
    if not 0 < r <= 0.5:
        raise ParameterError(f"Tail level r must lie in (0, 0.5], got {r}")


def as_panel(R) -> np.ndarray:
    """Return a T x n float array from a ReturnMatrix, DataFrame or array."""
    values = np.asarray(getattr(R, "values", R), dtype=float)
    if values.ndim != 2:
        raise ParameterError(f"Expected a T x n return panel, got an array of shape {values.shape}")
    return values


# ----------------------------------------------------------------------
# Covariance
# ----------------------------------------------------------------------
def sample_covariance(R) -> CovarianceEstimate:
    """Unbiased (divisor T-1) sample covariance of a T x n panel."""
    x = as_panel(R)
    if x.shape[0] < 2:
        raise InsufficientDataError(f"Sample covariance needs at least 2 rows, got {x.shape[0]}")
    matrix = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    return CovarianceEstimate(matrix=matrix, kind=CovarianceKind.SAMPLE)


def _correlation_scale(variances: np.ndarray) -> np.ndarray:
    sd = np.sqrt(variances)
    return np.outer(sd, sd)


def _average_correlation(cov: np.ndarray) -> float:
    n = cov.shape[0]
    scale = _correlation_scale(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(scale > 0, cov / scale, 0.0)
    return float((corr.sum() - np.trace(corr)) / (n * (n - 1)))


def constant_correlation_target(cov: np.ndarray) -> np.ndarray:
    """Target with the variances of `cov` and every correlation set to their average."""
    variances = np.diag(cov)
    target = _average_correlation(cov) * _correlation_scale(variances)
    np.fill_diagonal(target, variances)
    return target


def shrinkage_intensity(R) -> Tuple[float, bool]:
    """
    Optimal constant-correlation shrinkage intensity.

    Returns:
        (delta, fallback): delta clipped to [0, 1]; fallback is True when the
        target coincides with the sample matrix and delta = 0 was returned.
    """
    x = as_panel(R)
    t, n = x.shape
    y = x - x.mean(axis=0)
    sample = y.T @ y / t
    variances = np.diag(sample)
    sd = np.sqrt(variances)
    r_bar = _average_correlation(sample)
    prior = r_bar * _correlation_scale(variances)
    np.fill_diagonal(prior, variances)

    y2 = y * y
    phi_mat = y2.T @ y2 / t - 2.0 * (y.T @ y) * sample / t + sample * sample
    phi = float(phi_mat.sum())

    term1 = (y**3).T @ y / t
    term2 = variances[:, None] * sample
    theta = term1 - term2
    np.fill_diagonal(theta, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(sd[:, None] > 0, sd[None, :] / sd[:, None], 0.0)
    rho = float(np.trace(phi_mat)) + r_bar * float((ratio * theta).sum())

    gamma = float(np.linalg.norm(sample - prior, "fro") ** 2)
    # rounding noise only: the target is the sample matrix
    if not gamma > 1e-20 * float(np.linalg.norm(sample, "fro") ** 2) or not math.isfinite(gamma):
        logger.warning("Shrinkage target equals the sample covariance; falling back to delta = 0")
        return 0.0, True
    kappa = (phi - rho) / gamma
    return float(min(1.0, max(0.0, kappa / t))), False


def shrinkage_covariance(R, delta: ShrinkageIntensity = "auto") -> CovarianceEstimate:
    """
    Constant-correlation shrinkage: delta * F + (1 - delta) * S.

    S is the unbiased sample covariance and F the constant-correlation target
    built from it. delta = "auto" uses the Ledoit-Wolf optimal intensity.

    Raises:
        InsufficientDataError: If T <= n.
        ParameterError: If n < 2 or a fixed delta lies outside [0, 1].
    """
    x = as_panel(R)
    t, n = x.shape
    if n < 2:
        raise ParameterError(f"Shrinkage needs at least 2 assets, got {n}")
    if t <= n:
        raise InsufficientDataError(f"Shrinkage needs more rows than assets, got T={t}, n={n}")

    fallback = False
    if isinstance(delta, str):
        if delta != "auto":
            raise ParameterError(f"delta must be 'auto' or a number in [0, 1], got {delta!r}")
        intensity, fallback = shrinkage_intensity(x)
    else:
        intensity = float(delta)
        if not 0.0 <= intensity <= 1.0:
            raise ParameterError(f"delta must lie in [0, 1], got {intensity}")

    sample = sample_covariance(x).matrix
    target = constant_correlation_target(sample)
    matrix = intensity * target + (1.0 - intensity) * sample
    logger.debug("Shrinkage covariance with delta=%.4f (fallback=%s)", intensity, fallback)
    return CovarianceEstimate(matrix=matrix, kind=CovarianceKind.SHRINKAGE, delta=intensity, fallback=fallback)


# ----------------------------------------------------------------------
# Tail measures
# ----------------------------------------------------------------------
def historical_var_cvar(x, r: float = 0.05) -> Tuple[float, float]:
    """
    Historical VaR and CVaR of a return series.

    VaR is the negated empirical r-quantile with Hazen plotting positions
    (i - 0.5)/N and linear interpolation. CVaR is the negated mean of the
    observations at or below that quantile.

    Raises:
        InsufficientDataError: If len(x) < ceil(1/r).
    """
    _check_level(r)
    values = np.asarray(x, dtype=float).ravel()
    needed = math.ceil(1.0 / r - 1e-9)
    if values.size < needed:
        raise InsufficientDataError(f"Historical VaR at r={r} needs {needed} observations, got {values.size}")
    quantile = float(np.quantile(values, r, method="hazen"))
    tail = values[values <= quantile]
    if tail.size == 0:
        tail = np.array([values.min()])
    return -quantile, -float(tail.mean())


def _cornish_fisher_quantile(z: float, skew: float, exkurt: float) -> float:
    return (
        z
        + (z * z - 1.0) * skew / 6.0
        + (z**3 - 3.0 * z) * exkurt / 24.0
        - (2.0 * z**3 - 5.0 * z) * skew * skew / 36.0
    )


def cornish_fisher_var(mu: float, sigma: float, skew: float, exkurt: float, r: float = 0.05) -> float:
    """Modified VaR: -(mu + sigma * z_cf) with z_cf the Cornish-Fisher adjusted normal quantile."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    _check_level(r)
    z = float(stats.norm.ppf(r))
    return -(mu + sigma * _cornish_fisher_quantile(z, skew, exkurt))


def _truncated_normal_moments(g: float, order: int) -> np.ndarray:
    """J_q = integral of u^q phi(u) du over (-inf, g] for q = 0..order."""
    pdf = float(stats.norm.pdf(g))
    moments = np.zeros(order + 1)
    moments[0] = float(stats.norm.cdf(g))
    moments[1] = -pdf
    for q in range(2, order + 1):
        moments[q] = -(g ** (q - 1)) * pdf + (q - 1) * moments[q - 2]
    return moments


def modified_cvar(mu: float, sigma: float, skew: float, exkurt: float, r: float = 0.05) -> float:
    """
    Modified expected shortfall under the second order Edgeworth expansion.

    The tail expectation is integrated below the Cornish-Fisher quantile g and
    capped at g, so the result never falls below cornish_fisher_var.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    _check_level(r)
    g = _cornish_fisher_quantile(float(stats.norm.ppf(r)), skew, exkurt)
    j = _truncated_normal_moments(g, 7)
    tail = (
        j[1]
        + skew / 6.0 * (j[4] - 3.0 * j[2])
        + exkurt / 24.0 * (j[5] - 6.0 * j[3] + 3.0 * j[1])
        + skew * skew / 72.0 * (j[7] - 15.0 * j[5] + 45.0 * j[3] - 15.0 * j[1])
    ) / r
    if tail > g:
        logger.debug("Edgeworth tail mean %.6f above the CF quantile %.6f; capping", tail, g)
        tail = g
    return -mu - sigma * tail


def is_flat(values: np.ndarray, sigma: float) -> bool:
    """True when `sigma` is rounding noise on a series with no real spread."""
    if values.size == 0 or float(np.ptp(values)) == 0.0:
        return True
    return not sigma > FLAT_TOLERANCE * max(1.0, abs(float(values.mean())))


def portfolio_moments(x) -> Tuple[float, float, float, float]:
    """
    Mean, standard deviation (divisor N-1), skewness and excess kurtosis.

    Skewness and kurtosis are the plain standardized moments.

    Raises:
        DegenerateSampleError: If the series has zero variance.
    """
    values = np.asarray(x, dtype=float).ravel()
    if values.size < 3:
        raise InsufficientDataError(f"Moments need at least 3 observations, got {values.size}")
    sigma = float(values.std(ddof=1))
    if is_flat(values, sigma):
        raise DegenerateSampleError("Return series has zero variance")
    skew = float(stats.skew(values, bias=True))
    exkurt = float(stats.kurtosis(values, fisher=True, bias=True))
    return float(values.mean()), sigma, skew, exkurt


def modified_var_of_series(x, r: float = 0.05) -> float:
    mu, sigma, skew, exkurt = portfolio_moments(x)
    return cornish_fisher_var(mu, sigma, skew, exkurt, r)


def modified_cvar_of_series(x, r: float = 0.05) -> float:
    mu, sigma, skew, exkurt = portfolio_moments(x)
    return modified_cvar(mu, sigma, skew, exkurt, r)


def tail_risk(x, spec: TailSpec) -> Tuple[float, float]:
    """(VaR, CVaR) of a series under the method of `spec`."""
    if spec.method is TailMethod.HISTORICAL:
        return historical_var_cvar(x, spec.r)
    return modified_var_of_series(x, spec.r), modified_cvar_of_series(x, spec.r)
