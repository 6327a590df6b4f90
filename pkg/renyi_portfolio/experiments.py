"""
Synthetic studies of the exponential Renyi entropy and the Renyi optimal portfolio.

Each study returns a pandas DataFrame holding its inputs and computed quantities,
enough to redraw the corresponding figure or table. Studies are deterministic for
a fixed seed: Monte Carlo repetitions draw from their own SeedSequence child, so
results do not depend on the worker count either.
"""

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Tuple

import numpy as np
import pandas as pd
from scipy import optimize, special

from renyi_portfolio.dists import (
    EULER_GAMMA,
    CopulaSpec,
    Density,
    Marginal,
    MarginalKind,
    closed_form_entropy,
    convolve_density,
    kurtosis_of_independent_sum,
    levy_sum,
    sample,
    sample_copula,
    student_t_moments,
)
from renyi_portfolio.entropy import (
    RenyiParams,
    asymptotic_bias,
    copula_m_schedule,
    default_m,
    exp_renyi_oracle,
    m_spacings_estimate,
    renyi_entropy,
    resolve_m,
)
from renyi_portfolio.errors import (
    DegenerateSampleError,
    ObjectiveError,
    ParameterError,
    RenyiPortfolioError,
    StudyError,
)
from renyi_portfolio.quadrature import QuadratureSpec, integrate

logger = logging.getLogger(__name__)

# tail probability cut from heavy-tailed supports in the quadrature studies
HEAVY_TAIL_TRUNCATION = 1e-12


class StudyKind(str, Enum):
    SUBADDITIVITY = "subadditivity"
    COPULA = "copula"
    TAIL = "tail"
    TRADEOFF = "tradeoff"
    BIAS = "bias"
    SMALL_SAMPLE = "small-sample"
    OUTLIERS = "outliers"
    COMONOTONIC = "comonotonic"
    LEVY = "levy"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class StudySpec:
    """
    Which study to run and how.

    Attributes:
        study: Study name (a StudyKind or its string value).
        parameters: Overrides of the study defaults, by key.
        seed: Root seed of every random draw of the study.
        desk_scale: Use the reduced repetition counts and sample sizes.
        workers: Processes used for repetition-heavy studies.
    """

    study: StudyKind
    parameters: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0
    desk_scale: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        try:
            kind = StudyKind(self.study)
        except ValueError:
            names = ", ".join(k.value for k in StudyKind)
            raise ParameterError(f"Unknown study {self.study!r}; expected one of: {names}") from None
        object.__setattr__(self, "study", kind)
        unknown = sorted(set(self.parameters) - set(_DEFAULTS[kind]))
        if unknown:
            raise ParameterError(f"Unknown parameters for study {kind.value}: {', '.join(unknown)}")
        if self.workers < 1:
            raise ParameterError(f"workers must be at least 1, got {self.workers}")

    def resolved_parameters(self) -> Dict[str, Any]:
        """Defaults, then desk-scale reductions, then explicit overrides."""
        params = dict(_DEFAULTS[self.study])
        if self.desk_scale:
            params.update(_DESK_SCALE.get(self.study, {}))
        params.update(self.parameters)
        return params


# ----------------------------------------------------------------------
# Helpers
# ----------------------------------------------------------------------
def _marginal(value: Any) -> Marginal:
    """Accept a Marginal or its JSON form {"kind": ..., "params": [...]}."""
    if isinstance(value, Marginal):
        return value
    if isinstance(value, Mapping):
        try:
            return Marginal(MarginalKind(value["kind"]), tuple(float(p) for p in value["params"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, RenyiPortfolioError):
                raise
            raise ParameterError(f"Cannot build a marginal from {value!r}") from exc
    raise ParameterError(f"Expected a marginal, got {value!r}")


def _floats(values: Any, name: str) -> Tuple[float, ...]:
    try:
        out = tuple(float(v) for v in values)
    except TypeError:
        out = (float(values),)
    if not out:
        raise ParameterError(f"Parameter {name} must not be empty")
    return out


def _count(value: Any, name: str, minimum: int = 1) -> int:
    count = int(value)
    if count < minimum:
        raise ParameterError(f"Parameter {name} must be at least {minimum}, got {value}")
    return count


def _truncated(m: Marginal, q: QuadratureSpec) -> Density:
    """Density of m integrated on its truncated support only."""
    return dataclasses.replace(m.as_density(q), open_lower=False, open_upper=False)


def _portfolio_density(mx: Marginal, my: Marginal, w: float, q: QuadratureSpec) -> Density:
    """Density of w X + (1 - w) Y for independent X, Y."""
    if w <= 0.0:
        return _truncated(my, q)
    if w >= 1.0:
        return _truncated(mx, q)
    return convolve_density(mx.scaled(w), my.scaled(1.0 - w), q)


def _child_seeds(seed: int, count: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


def _map_repetitions(fn: Callable[[Any], Any], tasks: List[Any], workers: int) -> List[Any]:
    """Run repetitions in order, in-process or over a process pool."""
    if workers > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks, chunksize=chunk))
    return [fn(task) for task in tasks]


def best_two_asset_weight(objective: Callable[[float], float], grid_size: int = 101) -> float:
    """
    Minimise a function of the weight w in [0, 1] of the first of two assets.

    A grid search locates the best cell, then a bounded scalar search refines it
    within the neighbouring grid points. Points where the objective is undefined
    are skipped.

    Raises:
        ObjectiveError: If the objective is undefined on the whole grid.
    """

    def safe(w: float) -> float:
        try:
            value = float(objective(float(w)))
        except (DegenerateSampleError, ArithmeticError):
            return math.inf
        return value if math.isfinite(value) else math.inf

    grid = np.linspace(0.0, 1.0, grid_size)
    values = np.array([safe(w) for w in grid])
    if not np.any(np.isfinite(values)):
        raise ObjectiveError("Objective is undefined for every weight on the grid")
    k = int(np.argmin(values))
    lo, hi = float(grid[max(k - 1, 0)]), float(grid[min(k + 1, grid_size - 1)])
    refined = optimize.minimize_scalar(safe, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    if refined.success and refined.fun < values[k]:
        return float(refined.x)
    return float(grid[k])


# ----------------------------------------------------------------------
# Sub-additivity
# ----------------------------------------------------------------------
def _subadditivity(params: Dict[str, Any], seed: int, workers: int) -> pd.DataFrame:
    q = QuadratureSpec(abs_tol=float(params["abs_tol"]), support_truncation=float(params["truncation"]))
    alphas = _floats(params["alphas"], "alphas")
    rows = []
    for label, x, y in params["pairs"]:
        mx, my = _marginal(x), _marginal(y)
        dx, dy = _truncated(mx, q), _truncated(my, q)
        dz = convolve_density(mx, my, q)
        for alpha in alphas:
            hx = exp_renyi_oracle(dx, alpha, q)
            hy = exp_renyi_oracle(dy, alpha, q)
            hz = exp_renyi_oracle(dz, alpha, q)
            gap = hz - hx - hy
            rows.append(
                {"pair": label, "alpha": alpha, "h_x": hx, "h_y": hy, "h_sum": hz, "gap": gap, "subadditive": gap < 0}
            )
            logger.debug("%s alpha=%g: gap %.6g", label, alpha, gap)
    return pd.DataFrame(rows)


def _copula(params: Dict[str, Any], seed: int, workers: int) -> pd.DataFrame:
    mx, my = _marginal(params["x"]), _marginal(params["y"])
    draws = _count(params["draws"], "draws", 2)
    alphas = _floats(params["alphas"], "alphas")
    rows = []
    for rho in _floats(params["rhos"], "rhos"):
        # same seed for every rho: the gap moves with rho only
        pairs = sample_copula(mx, my, CopulaSpec(float(params["nu"]), rho, draws), seed)
        x, y = pairs[:, 0], pairs[:, 1]
        for alpha in alphas:
            p = RenyiParams(alpha, copula_m_schedule(alpha, draws))
            hx, hy = m_spacings_estimate(x, p), m_spacings_estimate(y, p)
            hz = m_spacings_estimate(x + y, p)
            rows.append(
                {"rho": rho, "alpha": alpha, "m": p.m, "h_x": hx, "h_y": hy, "h_sum": hz, "gap": hz - hx - hy}
            )
        logger.info("Copula study: rho=%g done", rho)
    return pd.DataFrame(rows)


def _levy(params: Dict[str, Any], seed: int, workers: int) -> pd.DataFrame:
    sigmas = _floats(params["sigmas"], "sigmas")
    rows = []
    for i, sx in enumerate(sigmas):
        for sy in sigmas[i:]:
            mx, my = Marginal.levy(0.0, sx), Marginal.levy(0.0, sy)
            hx, hy = closed_form_entropy(mx, 1.0), closed_form_entropy(my, 1.0)
            hz = closed_form_entropy(levy_sum(mx, my), 1.0)
            unit = closed_form_entropy(Marginal.levy(0.0, 1.0), 1.0)
            rows.append(
                {
                    "sigma_x": sx,
                    "sigma_y": sy,
                    "h_x": hx,
                    "h_y": hy,
                    "h_sum": hz,
                    "gap": hz - hx - hy,
                    "analytic_gap": 2.0 * unit * math.sqrt(sx * sy),
                }
            )
    return pd.DataFrame(rows)


def _gaussian(params: Dict[str, Any], seed: int, workers: int) -> pd.DataFrame:
    sx, sy = float(params["sigma_x"]), float(params["sigma_y"])
    draws = _count(params["draws"], "draws", 0)
    rows = []
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((draws, 2)) if draws else None
    for rho in _floats(params["rhos"], "rhos"):
        if not -1.0 <= rho <= 1.0:
            raise ParameterError(f"Correlation must lie in [-1, 1], got {rho}")
        s_sum = math.sqrt(max(sx * sx + sy * sy + 2.0 * rho * sx * sy, 0.0))
        if z is not None:
            x = sx * z[:, 0]
            y = sy * (rho * z[:, 0] + math.sqrt(max(0.0, 1.0 - rho * rho)) * z[:, 1])
        for alpha in _floats(params["alphas"], "alphas"):
            unit = closed_form_entropy(Marginal.gaussian(0.0, 1.0), alpha)
            hx, hy, hz = unit * sx, unit * sy, unit * s_sum
            row = {"rho": rho, "alpha": alpha, "h_x": hx, "h_y": hy, "h_sum": hz, "gap": hz - hx - hy}
            if rho == 1.0:
                row["perfect_correlation_identity"] = math.isclose(hz, hx + hy, rel_tol=1e-12)
            if z is not None:
                p = RenyiParams(alpha, default_m(draws))
                row["estimated_gap"] = m_spacings_estimate(x + y, p) - m_spacings_estimate(x, p) - m_spacings_estimate(
                    y, p
                )
            rows.append(row)
    return pd.DataFrame(rows)


# ----------------------------------------------------------------------
# Tail sensitivity and the variance/kurtosis trade-off
# ----------------------------------------------------------------------
def _tail(params: Dict[str, Any], seed: int, workers: int) -> pd.DataFrame:
    q = QuadratureSpec(abs_tol=float(params["abs_tol"]), support_truncation=float(params["truncation"]))
    size = _count(params["sample_size"], "sample_size", 0)
    nus = _floats(params["nus"], "nus")
    if min(nus) <= 2:
        raise ParameterError("Tail study needs nu > 2 so the Gaussian reference has a finite variance")
    rows = []
    for k, nu in enumerate(nus):
        m = Marginal.student_t(0.0, 1.0, nu)
        gauss = Marginal.gaussian(0.0, math.sqrt(nu / (nu - 2.0)))
        draw = sample(m, size, seed + k) if size > 1 else None
        for alpha in _floats(params["alphas"], "alphas"):
            oracle = exp_renyi_oracle(m, alpha, q)
            reference = closed_form_entropy(gauss, alpha)
            row = {"nu": nu, "alpha": alpha, "oracle": oracle, "gaussian": reference, "ratio": oracle / reference}
            if draw is not None:
                estimate = m_spacings_estimate(draw, RenyiParams(alpha))
                row["estimate"] = estimate
                row["log_bias"] = math.log(estimate / oracle)
            rows.append(row)
        logger.debug("Tail study: nu=%g done", nu)
    return pd.DataFrame(rows)


def _two_t_moments(x: Tuple[float, float], y: Tuple[float, float], w: float) -> Tuple[float, float]:
    """Variance and full kurtosis of w X + (1 - w) Y for independent zero-mean t's given as (sigma, nu)."""
    vx, kx = student_t_moments(x[0], x[1], w)
    vy, ky = student_t_moments(y[0], y[1], 1.0 - w)
    if w <= 0.0:
        return vy, ky
    if w >= 1.0:
        return vx, kx
    return vx + vy, kurtosis_of_independent_sum(vx, kx, vy, ky)


def _tradeoff(params: Dict[str, Any], seed: int, workers: int) -> pd.DataFrame:
    q = QuadratureSpec(abs_tol=float(params["abs_tol"]), support_truncation=float(params["truncation"]))
    x = tuple(float(v) for v in params["x"])
    y = tuple(float(v) for v in params["y"])
    mx, my = Marginal.student_t(0.0, *x), Marginal.student_t(0.0, *y)
    alphas = _floats(params["alphas"], "alphas")
    step = float(params["step"])
    if not 0 < step <= 0.5:
        raise ParameterError(f"Weight step must lie in (0, 0.5], got {step}")
    grid = np.round(np.arange(0.0, 1.0 + step / 2, step), 10)

    def entropy_at(w: float, alpha: float) -> float:
        return exp_renyi_oracle(_portfolio_density(mx, my, w, q), alpha, q)

    def record(kind: str, w: float, alpha: float, entropy: float) -> Dict[str, Any]:
        variance, kurt = _two_t_moments(x, y, w)
        return {
            "record_type": kind,
            "w": w,
            "alpha": alpha,
            "entropy": entropy,
            "std": math.sqrt(variance),
            "excess_kurtosis": kurt - 3.0,
        }

    rows = []
    for w in grid:
        density = _portfolio_density(mx, my, float(w), q)
        for alpha in alphas:
            rows.append(record("grid", float(w), alpha, exp_renyi_oracle(density, alpha, q)))
    for alpha in alphas:
        best = optimize.minimize_scalar(
            lambda w: entropy_at(w, alpha), bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-5}
        )
        rows.append(record("optimum", float(best.x), alpha, float(best.fun)))
        logger.info("Trade-off study: w*(%g) = %.4f", alpha, best.x)

    vx, _ = student_t_moments(x[0], x[1])
    vy, _ = student_t_moments(y[0], y[1])
    rows.append(record("min_variance", vy / (vx + vy), math.nan, math.nan))
    kurtosis = optimize.minimize_scalar(
        lambda w: _two_t_moments(x, y, w)[1], bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-8}
    )
    rows.append(record("min_kurtosis", float(kurtosis.x), math.nan, math.nan))
    return pd.DataFrame(rows)


# ----------------------------------------------------------------------
# Estimator studies
# ----------------------------------------------------------------------
def _bias_truth(m: Marginal, alpha: float, q: QuadratureSpec) -> float:
    closed = closed_form_entropy(m, alpha)
    return closed if closed is not None else exp_renyi_oracle(m, alpha, q)


def _bias(params: Dict[str, Any], seed: int, workers: int) -> pd.DataFrame:
    q = QuadratureSpec(abs_tol=float(params["abs_tol"]))
    size = _count(params["sample_size"], "sample_size", 2)
    ms = [resolve_m(int(m), size) for m in params["ms"]]
    alphas = _floats(params["alphas"], "alphas")
    children = _child_seeds(seed, len(params["densities"]))
    rows = []
    for (label, spec), child in zip(params["densities"], children):
        m = _marginal(spec)
        draw = sample(m, size, int(child.generate_state(1)[0]))
        for alpha in alphas:
            truth = math.log(_bias_truth(m, alpha, q))
            for width in ms:
                estimate = renyi_entropy(draw, RenyiParams(alpha, width))
                rows.append(
                    {
                        "density": label,
                        "alpha": alpha,
                        "m": width,
                        "estimate": estimate,
                        "truth": truth,
                        "bias": estimate - truth,
                        "theory": asymptotic_bias(width) if alpha == 1.0 else math.nan,
                    }
                )
        logger.info("Bias study: %s done", label)
    return pd.DataFrame(rows)


def _small_sample_repetition(task: Tuple[Any, ...]) -> np.ndarray:
    child, mx, my, size, combos, grid_size = task
    sx, sy = (int(s) for s in child.generate_state(2))
    x, y = sample(mx, size, sx), sample(my, size, sy)
    out = np.empty(len(combos))
    for k, (alpha, m) in enumerate(combos):
        p = RenyiParams(alpha, m)
        out[k] = best_two_asset_weight(lambda w: m_spacings_estimate(w * x + (1.0 - w) * y, p), grid_size)
    return out


def small_sample_weight_study(
    seed: int = 0, desk_scale: bool = False, workers: int = 1, **overrides: Any
) -> pd.DataFrame:
    """
    Renyi optimal weight of two Student-t assets: quadrature truth against small-sample estimates.

    For each alpha the true optimal weight of X minimises the quadrature oracle of
    w X + (1 - w) Y. Each repetition then draws N values per asset and estimates
    the optimal weight with m = 1 and m = ceil(sqrt(N)).

    Returns:
        One row per (alpha, m) with the true weight, the mean and standard
        deviation of the estimated weights (all in percent) and the repetition count.
    """
    return run_study(
        StudySpec(StudyKind.SMALL_SAMPLE, parameters=overrides, seed=seed, desk_scale=desk_scale, workers=workers)
    )


def _small_sample(params: Dict[str, Any], seed: int, workers: int) -> pd.DataFrame:
    q = QuadratureSpec(abs_tol=float(params["abs_tol"]))
    mx, my = _marginal(params["x"]), _marginal(params["y"])
    size = _count(params["sample_size"], "sample_size", 3)
    reps = _count(params["repetitions"], "repetitions")
    alphas = _floats(params["alphas"], "alphas")
    widths = [resolve_m(m, size) if m != "sqrt" else resolve_m("N^(1/2)", size) for m in params["ms"]]

    truth = {}
    for alpha in alphas:
        best = optimize.minimize_scalar(
            lambda w: exp_renyi_oracle(_portfolio_density(mx, my, w, q), alpha, q),
            bounds=(0.0, 1.0),
            method="bounded",
            options={"xatol": 1e-5},
        )
        truth[alpha] = float(best.x)
        logger.info("Small-sample study: true w*(%g) = %.4f", alpha, best.x)

    combos = [(alpha, m) for alpha in alphas for m in widths]
    grid_size = _count(params["grid_size"], "grid_size", 3)
    tasks = [(child, mx, my, size, combos, grid_size) for child in _child_seeds(seed, reps)]
    weights = np.vstack(_map_repetitions(_small_sample_repetition, tasks, workers))
    rows = []
    for k, (alpha, m) in enumerate(combos):
        rows.append(
            {
                "alpha": alpha,
                "m": m,
                "true_weight": 100.0 * truth[alpha],
                "mean_weight": 100.0 * float(weights[:, k].mean()),
                "std_weight": 100.0 * float(weights[:, k].std(ddof=1)) if reps > 1 else math.nan,
                "repetitions": reps,
            }
        )
    return pd.DataFrame(rows)


def _outlier_repetition(task: Tuple[Any, ...]) -> np.ndarray:
    child, marginal, size, level, alphas, roots, grid_size = task
    sx, sy = (int(s) for s in child.generate_state(2))
    x, y = sample(marginal, size, sx), sample(marginal, size, sy)
    x[-1] = float(marginal.ppf(level))
    out = np.empty((len(alphas), len(roots)))
    for i, alpha in enumerate(alphas):
        for j, root in enumerate(roots):
            p = RenyiParams(alpha, resolve_m(f"N^(1/{root:g})", size))
            out[i, j] = best_two_asset_weight(lambda w: m_spacings_estimate(w * x + (1.0 - w) * y, p), grid_size)
    return out


def _outliers(params: Dict[str, Any], seed: int, workers: int) -> pd.DataFrame:
    marginal = _marginal(params["marginal"])
    size = _count(params["sample_size"], "sample_size", 3)
    reps = _count(params["repetitions"], "repetitions")
    level = float(params["outlier_level"])
    if not 0 < level < 1:
        raise ParameterError(f"outlier_level must lie in (0, 1), got {level}")
    alphas = _floats(params["alphas"], "alphas")
    roots = _floats(params["roots"], "roots")
    grid_size = _count(params["grid_size"], "grid_size", 3)
    # one sample per repetition, shared by every (alpha, m) cell
    tasks = [(child, marginal, size, level, alphas, roots, grid_size) for child in _child_seeds(seed, reps)]
    mean = 100.0 * np.mean(_map_repetitions(_outlier_repetition, tasks, workers), axis=0)
    table = pd.DataFrame(mean, columns=[f"m=N^(1/{r:g})" for r in roots])
    table.insert(0, "alpha", alphas)
    return table


# ----------------------------------------------------------------------
# Comonotonic counter-example
# ----------------------------------------------------------------------
def _gumbel_min_density(x: float) -> float:
    # density of ln(zeta) for zeta ~ Exp(1)
    if x > 700.0:
        return 0.0
    return math.exp(x - math.exp(x))


def _log1p_exp_density(x: float) -> float:
    # density of ln(1 + zeta) for zeta ~ Exp(1)
    if x < 0.0 or x > 700.0:
        return 0.0
    return math.exp(1.0 + x - math.exp(x))


def _comonotonic(params: Dict[str, Any], seed: int, workers: int) -> pd.DataFrame:
    q = QuadratureSpec(abs_tol=float(params["abs_tol"]))
    edges = (-5.0, -1.0, 0.0, 1.0, 3.0)
    expectation_w = integrate(lambda x: x * _log1p_exp_density(x), 0.0, math.inf, q, edges[3:])
    incomplete = integrate(lambda z: math.exp(-z) / z if z < 745.0 else 0.0, 1.0, math.inf, q, (2.0, 5.0))
    expectation_z = integrate(lambda x: x * _gumbel_min_density(x), -math.inf, math.inf, q, edges)
    lhs = math.exp(expectation_w)
    rhs = 1.0 + math.exp(expectation_z)
    logger.info("Comonotonic check: exp(E[W]) = %.4f, 1 + exp(E[Z]) = %.4f", lhs, rhs)
    return pd.DataFrame(
        [
            {
                "expectation_w": expectation_w,
                "e_times_gamma_0_1": math.e * incomplete,
                "e_times_exp1": math.e * float(special.exp1(1.0)),
                "expectation_z": expectation_z,
                "minus_euler_gamma": -EULER_GAMMA,
                "exp_expectation_w": lhs,
                "one_plus_exp_expectation_z": rhs,
                "super_additive": lhs > rhs,
            }
        ]
    )


# ----------------------------------------------------------------------
# Registry
# ----------------------------------------------------------------------
_T_PAIR = (Marginal.student_t(0.03, 0.20, 10.0), Marginal.student_t(0.10, 0.40, 4.0))
_SKEW_PAIR = (Marginal.skew_normal(0.03, 0.20, -2.0), Marginal.skew_normal(0.10, 0.40, -5.0))

_DEFAULTS: Dict[StudyKind, Dict[str, Any]] = {
    StudyKind.SUBADDITIVITY: {
        "pairs": (("student_t",) + _T_PAIR, ("skew_normal",) + _SKEW_PAIR),
        "alphas": (0.3, 0.5, 0.7, 1.0, 1.5, 2.0),
        "abs_tol": 1e-8,
        "truncation": HEAVY_TAIL_TRUNCATION,
    },
    StudyKind.COPULA: {
        "x": _T_PAIR[0],
        "y": _T_PAIR[1],
        "nu": 7.0,
        "rhos": (-1.0, -0.5, 0.0, 0.5, 1.0),
        "alphas": (0.3, 0.5, 0.7, 1.0, 1.5, 2.0),
        "draws": 500_000,
    },
    StudyKind.TAIL: {
        "nus": (2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 20.0, 30.0),
        "alphas": (0.4, 0.5, 0.7, 1.0, 2.0),
        "sample_size": 100_000,
        "abs_tol": 1e-8,
        "truncation": HEAVY_TAIL_TRUNCATION,
    },
    StudyKind.TRADEOFF: {
        "x": (0.3, 10.0),
        "y": (0.2, 6.0),
        "alphas": (2.0, 1.0, 0.7, 0.5),
        "step": 0.05,
        "abs_tol": 1e-8,
        "truncation": 1e-9,
    },
    StudyKind.BIAS: {
        "densities": (
            ("uniform", Marginal.uniform(0.0, 1.0)),
            ("beta", Marginal.beta(2.0, 2.0)),
            ("gaussian", Marginal.gaussian(0.0, 1.0)),
            ("exponential", Marginal.exponential(1.0)),
        ),
        "ms": (1, 2, 5, 20, 100),
        "alphas": (0.3, 0.5, 0.7, 1.0, 1.5, 2.0),
        "sample_size": 1_000_000,
        "abs_tol": 1e-10,
    },
    StudyKind.SMALL_SAMPLE: {
        "x": Marginal.student_t(0.08, 0.2, 6.0),
        "y": Marginal.student_t(0.03, 0.15, 8.0),
        "alphas": (0.5, 1.0),
        "ms": (1, "sqrt"),
        "sample_size": 260,
        "repetitions": 500,
        "grid_size": 101,
        "abs_tol": 1e-9,
    },
    StudyKind.OUTLIERS: {
        "marginal": Marginal.student_t(0.0, 0.3, 10.0),
        "alphas": (0.3, 0.5, 0.7, 1.0),
        "roots": (4.0, 3.0, 2.0, 1.5),
        "sample_size": 100,
        "outlier_level": 0.0005,
        "repetitions": 500,
        "grid_size": 101,
    },
    StudyKind.COMONOTONIC: {"abs_tol": 1e-10},
    StudyKind.LEVY: {"sigmas": (0.1, 0.5, 1.0, 2.0, 5.0)},
    StudyKind.GAUSSIAN: {
        "sigma_x": 0.2,
        "sigma_y": 0.4,
        "rhos": (-1.0, -0.5, 0.0, 0.5, 1.0),
        "alphas": (0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 5.0),
        "draws": 100_000,
    },
}

_DESK_SCALE: Dict[StudyKind, Dict[str, Any]] = {
    StudyKind.COPULA: {"draws": 50_000},
    StudyKind.TAIL: {"sample_size": 10_000},
    StudyKind.BIAS: {"sample_size": 100_000},
    StudyKind.SMALL_SAMPLE: {"repetitions": 50},
    StudyKind.OUTLIERS: {"repetitions": 100},
    StudyKind.GAUSSIAN: {"draws": 10_000},
}

_RUNNERS: Dict[StudyKind, Callable[[Dict[str, Any], int, int], pd.DataFrame]] = {
    StudyKind.SUBADDITIVITY: _subadditivity,
    StudyKind.COPULA: _copula,
    StudyKind.TAIL: _tail,
    StudyKind.TRADEOFF: _tradeoff,
    StudyKind.BIAS: _bias,
    StudyKind.SMALL_SAMPLE: _small_sample,
    StudyKind.OUTLIERS: _outliers,
    StudyKind.COMONOTONIC: _comonotonic,
    StudyKind.LEVY: _levy,
    StudyKind.GAUSSIAN: _gaussian,
}


def study_names() -> List[str]:
    return [k.value for k in StudyKind]


def run_study(s: StudySpec) -> pd.DataFrame:
    """
    Run one synthetic study.

    Args:
        s: Study name, parameter overrides, seed, scale and worker count.

    Returns:
        The study table, one row per computed point.

    Raises:
        ParameterError: For invalid parameters.
        StudyError: When a computation inside the study fails; the original
            error is chained.
    """
    params = s.resolved_parameters()
    logger.info("Running study %s (seed=%d, desk_scale=%s)", s.study.value, s.seed, s.desk_scale)
    try:
        table = _RUNNERS[s.study](params, s.seed, s.workers)
    except ParameterError:
        raise
    except RenyiPortfolioError as exc:
        raise StudyError(f"Study {s.study.value} failed: {exc}", s.study.value) from exc
    logger.info("Study %s produced %d rows", s.study.value, len(table))
    return table
