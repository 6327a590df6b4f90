"""
Analytic univariate distributions and the numerical oracles built on them.

A `Marginal` is a parametric return distribution (Gaussian, non-standardised
Student-t, skew-normal, Levy, uniform, exponential, beta). It provides a fast
scalar density for quadrature, scipy-backed cdf/ppf for truncation and copula
inversion, seeded samplers, and the closed-form exponential Renyi entropy
where one is known. `convolve_density` produces the density of a sum of two
independent marginals by adaptive Simpson quadrature.
"""

import functools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import special, stats

from renyi_portfolio.errors import InvalidMarginalError, ParameterError, UnsupportedMarginalError
from renyi_portfolio.quadrature import DEFAULT_QUADRATURE, QuadratureSpec, integrate

logger = logging.getLogger(__name__)

EULER_GAMMA = float(np.euler_gamma)

# Quantile levels used as panel edges when integrating over a density's support.
_PANEL_LEVELS = (
    1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2,
    0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95,
    1 - 1e-2, 1 - 1e-3, 1 - 1e-4, 1 - 1e-5, 1 - 1e-6, 1 - 1e-7, 1 - 1e-8,
)

# |alpha - 1| below this threshold is treated as the Shannon case.
SHANNON_THRESHOLD = 1e-9


def is_shannon(alpha: float) -> bool:
    """Return True when alpha should be routed to the Shannon (alpha=1) form."""
    return abs(alpha - 1.0) < SHANNON_THRESHOLD


class MarginalKind(str, Enum):
    GAUSSIAN = "gaussian"
    STUDENT_T = "student_t"
    SKEW_NORMAL = "skew_normal"
    LEVY = "levy"
    UNIFORM = "uniform"
    EXPONENTIAL = "exponential"
    BETA = "beta"


@dataclass(frozen=True)
class Density:
    """
    A univariate density together with the domain it should be integrated on.

    `lower`/`upper` are the (possibly truncated) support bounds, `breakpoints`
    are interior panel edges placed where the mass sits, and `bounded` tells
    whether the true support is a bounded interval. `open_lower`/`open_upper`
    flag the sides where the true support runs to infinity.
    """

    pdf: Callable[[float], float]
    lower: float
    upper: float
    breakpoints: Tuple[float, ...] = ()
    mode: Optional[float] = None
    bounded: bool = False
    open_lower: bool = False
    open_upper: bool = False

    def untruncated_bounds(self) -> Tuple[float, float]:
        """Support bounds with the truncated sides pushed back to infinity."""
        return (-math.inf if self.open_lower else self.lower, math.inf if self.open_upper else self.upper)

    def __call__(self, x: float) -> float:
        return self.pdf(x)

    def integrate(self, g: Callable[[float], float], q: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
        """Integrate g over the support of this density."""
        return integrate(g, self.lower, self.upper, q, self.breakpoints)


@dataclass(frozen=True)
class Marginal:
    """
    Parametric univariate return distribution.

    Use the named constructors (`Marginal.gaussian(...)`, `Marginal.student_t(...)`,
    ...) rather than building the tuple of parameters by hand.
    """

    kind: MarginalKind
    params: Tuple[float, ...]

    # ------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------
    @classmethod
    def gaussian(cls, mu: float, sigma: float) -> "Marginal":
        return cls(MarginalKind.GAUSSIAN, (float(mu), float(sigma)))

    @classmethod
    def student_t(cls, mu: float, sigma: float, nu: float) -> "Marginal":
        return cls(MarginalKind.STUDENT_T, (float(mu), float(sigma), float(nu)))

    @classmethod
    def skew_normal(cls, mu: float, sigma: float, xi: float) -> "Marginal":
        return cls(MarginalKind.SKEW_NORMAL, (float(mu), float(sigma), float(xi)))

    @classmethod
    def levy(cls, mu: float, sigma: float) -> "Marginal":
        return cls(MarginalKind.LEVY, (float(mu), float(sigma)))

    @classmethod
    def uniform(cls, a: float, b: float) -> "Marginal":
        return cls(MarginalKind.UNIFORM, (float(a), float(b)))

    @classmethod
    def exponential(cls, lam: float) -> "Marginal":
        return cls(MarginalKind.EXPONENTIAL, (float(lam),))

    @classmethod
    def beta(cls, a: float, b: float) -> "Marginal":
        return cls(MarginalKind.BETA, (float(a), float(b)))

    def __post_init__(self) -> None:
        expected = {
            MarginalKind.GAUSSIAN: 2,
            MarginalKind.STUDENT_T: 3,
            MarginalKind.SKEW_NORMAL: 3,
            MarginalKind.LEVY: 2,
            MarginalKind.UNIFORM: 2,
            MarginalKind.EXPONENTIAL: 1,
            MarginalKind.BETA: 2,
        }[self.kind]
        if len(self.params) != expected:
            raise InvalidMarginalError(f"{self.kind.value} takes {expected} parameters, got {len(self.params)}")
        if not all(math.isfinite(p) for p in self.params):
            raise InvalidMarginalError(f"{self.kind.value} parameters must be finite, got {self.params}")

        p = self.params
        if self.kind in (MarginalKind.GAUSSIAN, MarginalKind.STUDENT_T, MarginalKind.SKEW_NORMAL, MarginalKind.LEVY):
            if p[1] <= 0:
                raise InvalidMarginalError(f"{self.kind.value} scale must be positive, got {p[1]}")
        if self.kind is MarginalKind.STUDENT_T and p[2] <= 0:
            raise InvalidMarginalError(f"Student-t degrees of freedom must be positive, got {p[2]}")
        if self.kind is MarginalKind.UNIFORM and not p[1] > p[0]:
            raise InvalidMarginalError(f"Uniform bounds need b > a, got a={p[0]}, b={p[1]}")
        if self.kind is MarginalKind.EXPONENTIAL and p[0] <= 0:
            raise InvalidMarginalError(f"Exponential rate must be positive, got {p[0]}")
        if self.kind is MarginalKind.BETA and (p[0] <= 0 or p[1] <= 0):
            raise InvalidMarginalError(f"Beta shape parameters must be positive, got {p}")

    def __getstate__(self):
        # cached closures and scipy objects are rebuilt on demand after unpickling
        return {"kind": self.kind, "params": self.params}

    # ------------------------------------------------------------------
    # scipy backing
    # ------------------------------------------------------------------
    @functools.cached_property
    def frozen(self):
        """The equivalent frozen scipy.stats distribution."""
        p = self.params
        if self.kind is MarginalKind.GAUSSIAN:
            return stats.norm(loc=p[0], scale=p[1])
        if self.kind is MarginalKind.STUDENT_T:
            return stats.t(df=p[2], loc=p[0], scale=p[1])
        if self.kind is MarginalKind.SKEW_NORMAL:
            return stats.skewnorm(p[2], loc=p[0], scale=p[1])
        if self.kind is MarginalKind.LEVY:
            return stats.levy(loc=p[0], scale=p[1])
        if self.kind is MarginalKind.UNIFORM:
            return stats.uniform(loc=p[0], scale=p[1] - p[0])
        if self.kind is MarginalKind.EXPONENTIAL:
            return stats.expon(scale=1.0 / p[0])
        return stats.beta(p[0], p[1])

    def cdf(self, x):
        return self.frozen.cdf(x)

    def ppf(self, u):
        return self.frozen.ppf(u)

    def isf(self, u):
        return self.frozen.isf(u)

    @property
    def bounded(self) -> bool:
        return self.kind in (MarginalKind.UNIFORM, MarginalKind.BETA)

    def mean(self) -> float:
        return float(self.frozen.mean())

    def variance(self) -> float:
        return float(self.frozen.var())

    def kurtosis(self) -> float:
        """Full (not excess) kurtosis; inf when the fourth moment does not exist."""
        excess = float(self.frozen.stats(moments="k"))
        return excess + 3.0

    def scaled(self, c: float) -> "Marginal":
        """Return the marginal of c*X for c > 0."""
        if not c > 0:
            raise ParameterError(f"Scale factor must be positive, got {c}")
        p = self.params
        if self.kind in (MarginalKind.GAUSSIAN, MarginalKind.LEVY):
            return Marginal(self.kind, (c * p[0], c * p[1]))
        if self.kind in (MarginalKind.STUDENT_T, MarginalKind.SKEW_NORMAL):
            return Marginal(self.kind, (c * p[0], c * p[1], p[2]))
        if self.kind is MarginalKind.UNIFORM:
            return Marginal.uniform(c * p[0], c * p[1])
        if self.kind is MarginalKind.EXPONENTIAL:
            return Marginal.exponential(p[0] / c)
        raise UnsupportedMarginalError("Scaled beta marginals are not supported")

    # ------------------------------------------------------------------
    # Density
    # ------------------------------------------------------------------
    @functools.cached_property
    def pdf(self) -> Callable[[float], float]:
        """Scalar density written with the math module (fast inside quadrature loops)."""
        p = self.params
        if self.kind is MarginalKind.GAUSSIAN:
            mu, sigma = p
            norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

            def gaussian_pdf(x: float) -> float:
                z = (x - mu) / sigma
                return norm * math.exp(-0.5 * z * z)

            return gaussian_pdf

        if self.kind is MarginalKind.STUDENT_T:
            mu, sigma, nu = p
            log_norm = math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu) - 0.5 * math.log(nu * math.pi)
            log_norm -= math.log(sigma)
            power = 0.5 * (nu + 1.0)

            def student_t_pdf(x: float) -> float:
                z = (x - mu) / sigma
                return math.exp(log_norm - power * math.log1p(z * z / nu))

            return student_t_pdf

        if self.kind is MarginalKind.SKEW_NORMAL:
            mu, sigma, xi = p
            norm = 2.0 / (sigma * math.sqrt(2.0 * math.pi))

            def skew_normal_pdf(x: float) -> float:
                z = (x - mu) / sigma
                return norm * math.exp(-0.5 * z * z) * 0.5 * math.erfc(-xi * z / math.sqrt(2.0))

            return skew_normal_pdf

        if self.kind is MarginalKind.LEVY:
            mu, sigma = p
            norm = math.sqrt(sigma / (2.0 * math.pi))

            def levy_pdf(x: float) -> float:
                d = x - mu
                if d <= 0:
                    return 0.0
                return norm * math.exp(-sigma / (2.0 * d)) / (d * math.sqrt(d))

            return levy_pdf

        if self.kind is MarginalKind.UNIFORM:
            a, b = p
            height = 1.0 / (b - a)

            def uniform_pdf(x: float) -> float:
                return height if a <= x <= b else 0.0

            return uniform_pdf

        if self.kind is MarginalKind.EXPONENTIAL:
            (lam,) = p

            def exponential_pdf(x: float) -> float:
                return lam * math.exp(-lam * x) if x >= 0 else 0.0

            return exponential_pdf

        a, b = p
        log_beta = special.betaln(a, b)

        def beta_pdf(x: float) -> float:
            if x < 0 or x > 1:
                return 0.0
            return math.exp(float(special.xlogy(a - 1.0, x) + special.xlog1py(b - 1.0, -x)) - log_beta)

        return beta_pdf

    def mode(self) -> Optional[float]:
        """Analytic mode when known, None otherwise (flat or no simple formula)."""
        p = self.params
        if self.kind in (MarginalKind.GAUSSIAN, MarginalKind.STUDENT_T):
            return p[0]
        if self.kind is MarginalKind.LEVY:
            return p[0] + p[1] / 3.0
        if self.kind is MarginalKind.EXPONENTIAL:
            return 0.0
        if self.kind is MarginalKind.BETA and p[0] > 1 and p[1] > 1:
            return (p[0] - 1.0) / (p[0] + p[1] - 2.0)
        return None

    def support(self, q: QuadratureSpec = DEFAULT_QUADRATURE) -> Tuple[float, float]:
        """Support bounds, unbounded sides truncated at the q.support_truncation tail quantile."""
        p = self.params
        tail = q.support_truncation
        if self.kind is MarginalKind.UNIFORM:
            return p[0], p[1]
        if self.kind is MarginalKind.BETA:
            return 0.0, 1.0
        upper = float(self.isf(tail))
        if self.kind is MarginalKind.EXPONENTIAL:
            return 0.0, upper
        if self.kind is MarginalKind.LEVY:
            return p[0], upper
        return float(self.ppf(tail)), upper

    def as_density(self, q: QuadratureSpec = DEFAULT_QUADRATURE) -> Density:
        """Package the density with its truncated support and quantile panel edges."""
        lower, upper = self.support(q)
        tail = q.support_truncation
        levels = [lv for lv in _PANEL_LEVELS if tail < lv < 1 - tail]
        points = set()
        for level in levels:
            value = float(self.isf(1.0 - level)) if level > 0.5 else float(self.ppf(level))
            if math.isfinite(value) and lower < value < upper:
                points.add(value)
        mode = self.mode()
        if mode is not None and lower < mode < upper:
            points.add(mode)
        return Density(
            pdf=self.pdf,
            lower=lower,
            upper=upper,
            breakpoints=tuple(sorted(points)),
            mode=mode,
            bounded=self.bounded,
            open_lower=self.kind in (MarginalKind.GAUSSIAN, MarginalKind.STUDENT_T, MarginalKind.SKEW_NORMAL),
            open_upper=not self.bounded,
        )


# ----------------------------------------------------------------------
# Density and sampling
# ----------------------------------------------------------------------
def density(m: Marginal, x: float) -> float:
    """Evaluate the density of m at x (zero outside the support)."""
    return m.pdf(float(x))


def sample(m: Marginal, count: int, seed: int) -> np.ndarray:
    """
    Draw `count` i.i.d. values from m.

    The generator is numpy's PCG64 (`numpy.random.default_rng(seed)`), so the
    same (marginal, count, seed) always yields the same vector.
    """
    if count < 1:
        raise ParameterError(f"count must be at least 1, got {count}")
    rng = np.random.default_rng(seed)
    if m.kind is MarginalKind.LEVY:
        # Levy(mu, sigma) is mu + sigma / Z^2 with Z standard normal
        mu, sigma = m.params
        z = rng.standard_normal(count)
        return mu + sigma / (z * z)
    return np.asarray(m.frozen.rvs(size=count, random_state=rng), dtype=float)


@dataclass(frozen=True)
class CopulaSpec:
    """Bivariate Student-t copula with `nu` degrees of freedom and correlation `rho`."""

    nu: float
    rho: float
    sample_count: int

    def __post_init__(self) -> None:
        if not self.nu > 0:
            raise ParameterError(f"Copula degrees of freedom must be positive, got {self.nu}")
        if not -1.0 <= self.rho <= 1.0:
            raise ParameterError(f"Copula correlation must lie in [-1, 1], got {self.rho}")
        if self.sample_count < 1:
            raise ParameterError(f"sample_count must be at least 1, got {self.sample_count}")


def _t_scores_to_marginal(m: Marginal, scores: np.ndarray, nu: float) -> np.ndarray:
    """Map Student-t(nu) scores to m through the probability integral transform."""
    out = np.empty_like(scores)
    lower = scores <= 0
    # upper half goes through the survival function to keep precision near u = 1
    out[lower] = m.ppf(stats.t.cdf(scores[lower], nu))
    out[~lower] = m.isf(stats.t.sf(scores[~lower], nu))
    return out


def sample_copula(mx: Marginal, my: Marginal, c: CopulaSpec, seed: int) -> np.ndarray:
    """
    Draw pairs linked by a Student-t copula.

    The underlying normal and chi-square draws depend only on the seed, so the
    same seed gives the same uniforms for every rho. rho = +1 / -1 produces
    comonotonic / counter-monotonic pairs.

    Returns:
        Array of shape (sample_count, 2).

    Raises:
        UnsupportedMarginalError: If either marginal is Levy.
    """
    for m in (mx, my):
        if m.kind is MarginalKind.LEVY:
            raise UnsupportedMarginalError("Levy marginals are not supported in copula sampling")

    rng = np.random.default_rng(seed)
    z = rng.standard_normal((c.sample_count, 2))
    w = rng.chisquare(c.nu, c.sample_count)
    g1 = z[:, 0]
    g2 = c.rho * z[:, 0] + math.sqrt(max(0.0, 1.0 - c.rho * c.rho)) * z[:, 1]
    shrink = np.sqrt(c.nu / w)
    pairs = np.column_stack(
        [
            _t_scores_to_marginal(mx, g1 * shrink, c.nu),
            _t_scores_to_marginal(my, g2 * shrink, c.nu),
        ]
    )
    logger.debug("Drew %d t-copula pairs (nu=%g, rho=%g)", c.sample_count, c.nu, c.rho)
    return pairs


# ----------------------------------------------------------------------
# Convolution
# ----------------------------------------------------------------------
def convolve_density(mx: Marginal, my: Marginal, q: QuadratureSpec = DEFAULT_QUADRATURE) -> Density:
    """
    Density of X + Y for independent X ~ mx and Y ~ my.

    Each evaluation z -> integral of f_X(t) f_Y(z - t) dt runs adaptive Simpson over the
    overlap of the two truncated supports. Evaluations are memoised, so an
    oracle evaluated at several alpha values reuses the same convolution.
    """
    dx = mx.as_density(q)
    dy = my.as_density(q)
    fx, fy = dx.pdf, dy.pdf
    width = (dx.upper - dx.lower) + (dy.upper - dy.lower)
    inner = QuadratureSpec(
        abs_tol=q.abs_tol / max(1.0, width),
        max_depth=q.max_depth,
        support_truncation=q.support_truncation,
    )

    @functools.lru_cache(maxsize=1 << 16)
    def convolved_pdf(z: float) -> float:
        lo = max(dx.lower, z - dy.upper)
        hi = min(dx.upper, z - dy.lower)
        if not hi > lo:
            return 0.0
        edges = [t for t in dx.breakpoints if lo < t < hi]
        edges += [z - s for s in dy.breakpoints if lo < z - s < hi]
        value = integrate(lambda t: fx(t) * fy(z - t), lo, hi, inner, edges)
        return max(value, 0.0)

    xs = (dx.lower,) + dx.breakpoints + (dx.upper,)
    ys = (dy.lower,) + dy.breakpoints + (dy.upper,)
    # pair up panel edges by rank as a rough map of where the mass of X + Y sits
    count = min(len(xs), len(ys))
    xs_q = np.quantile(xs, np.linspace(0, 1, count))
    ys_q = np.quantile(ys, np.linspace(0, 1, count))
    lower, upper = dx.lower + dy.lower, dx.upper + dy.upper
    points = {float(a + b) for a, b in zip(xs_q, ys_q) if lower < a + b < upper}
    if dx.mode is not None and dy.mode is not None and lower < dx.mode + dy.mode < upper:
        points.add(dx.mode + dy.mode)

    return Density(
        pdf=convolved_pdf,
        lower=lower,
        upper=upper,
        breakpoints=tuple(sorted(points)),
        mode=None,
        bounded=dx.bounded and dy.bounded,
    )


# ----------------------------------------------------------------------
# Closed forms
# ----------------------------------------------------------------------
def closed_form_entropy(m: Marginal, alpha: float) -> Optional[float]:
    """
    Exponential Renyi entropy of m when a closed form exists, None otherwise.

    Available: Gaussian and exponential (all alpha), uniform (all alpha), Levy
    (alpha = 1 only). alpha = 1 uses the Shannon limit directly. alpha = 0 on an
    unbounded support returns inf.
    """
    if alpha < 0:
        raise ParameterError(f"alpha must be non-negative, got {alpha}")
    p = m.params
    shannon = is_shannon(alpha)

    if m.kind is MarginalKind.UNIFORM:
        return p[1] - p[0]

    if m.kind is MarginalKind.GAUSSIAN:
        sigma = p[1]
        if shannon:
            return sigma * math.sqrt(2.0 * math.pi * math.e)
        if alpha == 0:
            return math.inf
        return sigma * math.sqrt(2.0 * math.pi) * alpha ** (-1.0 / (2.0 * (1.0 - alpha)))

    if m.kind is MarginalKind.EXPONENTIAL:
        lam = p[0]
        if shannon:
            return math.e / lam
        if alpha == 0:
            return math.inf
        return alpha ** (-1.0 / (1.0 - alpha)) / lam

    if m.kind is MarginalKind.LEVY and shannon:
        # Shannon entropy of Levy(mu, sigma): (1 + 3*gamma + ln(16*pi*sigma^2)) / 2
        return p[1] * 4.0 * math.sqrt(math.pi) * math.exp((1.0 + 3.0 * EULER_GAMMA) / 2.0)

    return None


def levy_sum(mx: Marginal, my: Marginal) -> Marginal:
    """Law of X + Y for independent Levy X, Y (Levy is a stable family)."""
    if mx.kind is not MarginalKind.LEVY or my.kind is not MarginalKind.LEVY:
        raise UnsupportedMarginalError("levy_sum needs two Levy marginals")
    (mu_x, s_x), (mu_y, s_y) = mx.params, my.params
    return Marginal.levy(mu_x + mu_y, s_x + s_y + 2.0 * math.sqrt(s_x * s_y))


def kurtosis_of_independent_sum(vx: float, kx: float, vy: float, ky: float) -> float:
    """
    Kurtosis of X + Y for independent X, Y from their variances and full kurtoses.

    K[X+Y] = (K[X] V[X]^2 + K[Y] V[Y]^2 + 6 V[X] V[Y]) / (V[X] + V[Y])^2
    """
    if not (vx > 0 and vy > 0):
        raise ParameterError(f"Variances must be positive, got vx={vx}, vy={vy}")
    return (kx * vx * vx + ky * vy * vy + 6.0 * vx * vy) / (vx + vy) ** 2


def student_t_moments(sigma: float, nu: float, weight: float = 1.0) -> Tuple[float, float]:
    """Variance and full kurtosis of weight * t(0, sigma, nu); needs nu > 4."""
    if not nu > 4:
        raise ParameterError(f"Student-t kurtosis needs nu > 4, got {nu}")
    variance = sigma * sigma * weight * weight * nu / (nu - 2.0)
    return variance, 6.0 / (nu - 4.0) + 3.0


def scaled(m: Marginal, c: float) -> Marginal:
    """Marginal of c*X for X ~ m and c > 0."""
    return m.scaled(c)
