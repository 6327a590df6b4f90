"""
Exponential Renyi entropy: quadrature oracle, m-spacings estimators and limit cases.

The exponential Renyi entropy of order alpha is

    H_alpha^exp(X) = (integral of f^alpha) ** (1 / (1 - alpha))

with the Shannon form exp(-integral of f ln f) at alpha = 1, the support measure at
alpha = 0 and 1 / sup f at alpha = inf. The sample estimators work on order
statistics only and are exactly translation invariant and absolutely
homogeneous.
"""

import logging
import math
import re
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import optimize, special

from renyi_portfolio.dists import Density, Marginal, MarginalKind, is_shannon
from renyi_portfolio.errors import DegenerateSampleError, DivergenceError, ParameterError
from renyi_portfolio.quadrature import DEFAULT_QUADRATURE, QuadratureSpec, integrate

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, list, tuple]
DensityLike = Union[Marginal, Density, Callable[[float], float]]
MRule = Union[int, str, None]

# relative size of the deterministic jitter that separates tied sample values
TIE_JITTER = 1e-12

_RULE_PATTERN = re.compile(r"^\s*N\s*\^\s*(?:\(\s*1\s*/\s*(?P<root>[0-9.]+)\s*\)|(?P<power>[0-9.]+))\s*$")


@dataclass(frozen=True)
class RenyiParams:
    """
    Order and spacing width of an m-spacings estimate.

    Attributes:
        alpha: Order of the entropy, >= 0.
        m: Spacing width, >= 1. None picks default_m(N) at call time.
        bias_correct: Multiply the alpha = 1 estimate by m / exp(digamma(m)).
    """

    alpha: float
    m: Optional[int] = None
    bias_correct: bool = False

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)
        if self.m is not None and self.m < 1:
            raise ParameterError(f"m must be at least 1, got {self.m}")
        if self.bias_correct and not is_shannon(self.alpha):
            raise ParameterError("bias_correct is only defined for alpha = 1")


def _check_alpha(alpha: float) -> None:
    if math.isnan(alpha) or alpha < 0:
        raise ParameterError(f"alpha must be non-negative, got {alpha}")


# ----------------------------------------------------------------------
# Spacing widths
# ----------------------------------------------------------------------
def _clip_m(m: int, n: int) -> int:
    return int(min(max(m, 1), max(n - 1, 1)))


def default_m(n: int) -> int:
    """ceil(N^(2/3)), clipped to [1, N-1]."""
    return _clip_m(math.ceil(n ** (2.0 / 3.0) - 1e-9), n)


def resolve_m(rule: MRule, n: int) -> int:
    """
    Turn a spacing rule into an integer width for a sample of size n.

    Args:
        rule: None (default_m), an integer, or a string "N^(1/p)" / "N^x".
        n: Sample size.

    Returns:
        ceil(N^x) clipped to [1, N-1] for rule strings; the integer itself otherwise.

    Raises:
        ParameterError: If the rule cannot be parsed or an integer width is >= n.
    """
    if rule is None:
        return default_m(n)
    if isinstance(rule, (int, np.integer)) and not isinstance(rule, bool):
        if not 1 <= rule <= n - 1:
            raise ParameterError(f"m must lie in [1, N-1] = [1, {n - 1}], got {rule}")
        return int(rule)
    if isinstance(rule, str):
        if rule.strip().isdigit():
            return resolve_m(int(rule), n)
        match = _RULE_PATTERN.match(rule)
        if match:
            exponent = 1.0 / float(match.group("root")) if match.group("root") else float(match.group("power"))
            if not 0 < exponent < 1:
                raise ParameterError(f"Spacing rule exponent must lie in (0, 1), got {exponent} from {rule!r}")
            return _clip_m(math.ceil(n**exponent - 1e-9), n)
    raise ParameterError(f"Unrecognised spacing rule {rule!r}; use an integer, 'N^(1/p)' or 'N^x'")


def copula_m_schedule(alpha: float, n: int) -> int:
    """Spacing width used by the copula study: wider spacings for larger alpha."""
    _check_alpha(alpha)
    if alpha < 0.5:
        root = 4.0
    elif alpha < 0.7:
        root = 3.0
    elif alpha < 1.0 and not is_shannon(alpha):
        root = 2.5
    else:
        root = 2.0
    return resolve_m(f"N^(1/{root})", n)


# ----------------------------------------------------------------------
# Sample estimators
# ----------------------------------------------------------------------
def _sorted_sample(values: ArrayLike, min_size: int = 2) -> np.ndarray:
    """Sort the sample and separate exact ties with a deterministic jitter."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size < min_size:
        raise ParameterError(f"Sample needs at least {min_size} values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ParameterError("Sample contains non-finite values")
    x = np.sort(x)
    spread = x[-1] - x[0]
    if spread == 0:
        return x
    if np.any(np.diff(x) == 0):
        n = x.size
        logger.warning("Sample of size %d has tied values; applying a %.0e relative jitter", n, TIE_JITTER)
        x = x + np.arange(n) * (TIE_JITTER * spread / n)
    return x


def _spacings_estimate(x: np.ndarray, alpha: float, m: int) -> float:
    """Core m-spacings formula on an already sorted sample."""
    n = x.size
    if not 1 <= m <= n - 1:
        raise ParameterError(f"m must lie in [1, N-1] = [1, {n - 1}], got {m}")
    if x[-1] == x[0]:
        raise DegenerateSampleError(f"All {n} sample values are equal")
    if alpha == 0 and m == 1:
        # the 1-spacings sum telescopes to the range
        return (n + 1) / (n - 1) * (x[-1] - x[0])

    spacings = x[m:] - x[:-m]
    if np.any(spacings <= 0) and alpha >= 1 - 1e-9:
        raise DegenerateSampleError(f"Zero {m}-spacing with alpha={alpha}; the estimate is undefined")
    with np.errstate(divide="ignore"):
        logs = np.log((n + 1) / m * spacings)
    count = n - m
    if is_shannon(alpha):
        return math.exp(float(np.mean(logs)))
    power = 1.0 - alpha
    log_mean = float(special.logsumexp(power * logs)) - math.log(count)
    return math.exp(log_mean / power)


def one_spacing_estimate(s: ArrayLike, alpha: float) -> float:
    """
    1-spacing estimate of the exponential Renyi entropy.

    Equal to m_spacings_estimate with m = 1. alpha = 1 uses the log form.

    Raises:
        DegenerateSampleError: If every sample value is equal.
    """
    _check_alpha(alpha)
    return _spacings_estimate(_sorted_sample(s), alpha, 1)


def m_spacings_estimate(s: ArrayLike, p: RenyiParams) -> float:
    """
    m-spacings estimate of the exponential Renyi entropy.

    ((1/(N-m)) * sum(((N+1)/m * (X(i+m) - X(i))) ** (1-alpha))) ** (1/(1-alpha)),
    or exp of the mean log-spacing at alpha = 1. With `p.bias_correct` the alpha = 1
    value is multiplied by m / exp(digamma(m)).

    Args:
        s: Sample values (any order).
        p: Order, spacing width and bias correction flag.

    Returns:
        The estimate, in the units of the sample.

    Raises:
        ParameterError: If m >= N or the sample contains non-finite values.
        DegenerateSampleError: On an all-equal sample, or a zero m-spacing with alpha >= 1.
    """
    x = _sorted_sample(s)
    m = resolve_m(p.m, x.size)
    estimate = _spacings_estimate(x, p.alpha, m)
    if p.bias_correct:
        estimate *= math.exp(-asymptotic_bias(m))
    return estimate


def renyi_entropy(s: ArrayLike, p: RenyiParams) -> float:
    """Log-domain m-spacings estimate, ln H_alpha^exp."""
    return math.log(m_spacings_estimate(s, p))


def h0_estimate(s: ArrayLike) -> float:
    """(N+1)/(N-1) * (max - min); 0 for a constant sample."""
    x = np.asarray(s, dtype=float).ravel()
    if x.size < 2:
        raise ParameterError(f"Sample needs at least 2 values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ParameterError("Sample contains non-finite values")
    n = x.size
    return (n + 1) / (n - 1) * float(x.max() - x.min())


def asymptotic_bias(m: int) -> float:
    """digamma(m) - ln(m): the log-domain bias of the alpha = 1 m-spacings estimate."""
    if m < 1:
        raise ParameterError(f"m must be at least 1, got {m}")
    return float(special.digamma(m)) - math.log(m)


# ----------------------------------------------------------------------
# Oracles
# ----------------------------------------------------------------------
def _as_density(f: DensityLike, q: QuadratureSpec) -> Density:
    if isinstance(f, Density):
        return f
    if isinstance(f, Marginal):
        return f.as_density(q)
    return Density(pdf=f, lower=-math.inf, upper=math.inf, open_lower=True, open_upper=True)


def _check_tail_integrability(f: DensityLike, alpha: float) -> None:
    """Reject orders for which the integral of f^alpha is known to diverge."""
    if not isinstance(f, Marginal) or alpha >= 1:
        return
    if f.kind is MarginalKind.STUDENT_T and alpha * (f.params[2] + 1.0) <= 1.0:
        raise DivergenceError(f"integral of f^{alpha} diverges for a Student-t with nu={f.params[2]}")
    if f.kind is MarginalKind.LEVY and alpha <= 2.0 / 3.0:
        raise DivergenceError(f"integral of f^{alpha} diverges for a Levy density")


def exp_renyi_oracle(f: DensityLike, alpha: float, q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """
    Exponential Renyi entropy of a density by adaptive quadrature.

    Args:
        f: A Marginal, a Density (e.g. from convolve_density) or a bare pdf callable
            assumed to live on the whole real line.
        alpha: Order, >= 0. alpha = 1 uses the Shannon form, alpha = inf the inverse mode height.
        q: Quadrature settings.

    Returns:
        (integral of f^alpha) ** (1/(1-alpha)), or exp(-integral of f ln f) at alpha = 1.

    Raises:
        DivergenceError: alpha = 0 on an unbounded support, a heavy tail that
            makes the integral diverge, or a non-finite result.
    """
    _check_alpha(alpha)
    if math.isinf(alpha):
        return h_infinity_oracle(f)
    _check_tail_integrability(f, alpha)
    dens = _as_density(f, q)
    pdf = dens.pdf

    if alpha == 0:
        if not dens.bounded:
            raise DivergenceError("H_0 of a density with unbounded support is infinite")
        return dens.upper - dens.lower

    lower, upper = dens.untruncated_bounds()
    if is_shannon(alpha):

        def neg_f_log_f(x: float) -> float:
            value = pdf(x)
            return -value * math.log(value) if value > 0 else 0.0

        result = math.exp(integrate(neg_f_log_f, lower, upper, q, dens.breakpoints))
    else:

        def f_power(x: float) -> float:
            value = pdf(x)
            return value**alpha if value > 0 else 0.0

        total = integrate(f_power, lower, upper, q, dens.breakpoints)
        if not total > 0:
            raise DivergenceError(f"integral of f^{alpha} is not positive ({total})")
        result = total ** (1.0 / (1.0 - alpha))

    if not math.isfinite(result):
        raise DivergenceError(f"Exponential Renyi entropy of order {alpha} is not finite")
    logger.debug("Oracle H_%g^exp = %.10g", alpha, result)
    return result


def h_infinity_oracle(f: DensityLike, q: QuadratureSpec = DEFAULT_QUADRATURE, grid_size: int = 2001) -> float:
    """
    1 / sup f, with the supremum found by a grid search plus bounded local refinement.

    Raises:
        DivergenceError: If the density is unbounded.
    """
    dens = _as_density(f, q)
    pdf = dens.pdf
    lower, upper = dens.lower, dens.upper
    if math.isinf(lower) or math.isinf(upper):
        # a bare callable: search a wide window around the origin
        lower, upper = -50.0, 50.0

    grid = np.unique(np.concatenate([np.linspace(lower, upper, grid_size), np.asarray(dens.breakpoints, dtype=float)]))
    if dens.mode is not None:
        grid = np.unique(np.append(grid, dens.mode))
    values = np.array([pdf(float(x)) for x in grid])
    if not np.all(np.isfinite(values)):
        raise DivergenceError("Density is unbounded; H_inf^exp is zero")
    best = int(np.argmax(values))
    peak = float(values[best])

    left = float(grid[max(best - 1, 0)])
    right = float(grid[min(best + 1, grid.size - 1)])
    if right > left:
        refined = optimize.minimize_scalar(
            lambda x: -pdf(x), bounds=(left, right), method="bounded", options={"xatol": 1e-12}
        )
        if refined.success and math.isfinite(refined.fun):
            peak = max(peak, -float(refined.fun))

    if not peak > 0:
        raise DivergenceError("Density has no positive mass on the searched support")
    return 1.0 / peak
