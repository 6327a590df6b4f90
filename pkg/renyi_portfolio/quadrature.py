"""
Adaptive Simpson quadrature.

All numerical integrals of the package (density normalisation, convolution,
entropy oracles, the comonotonic counter-example) go through `integrate`.
The integrator refines each panel recursively until the Simpson estimate and
its two-half refinement agree within the local tolerance, then applies the
Richardson correction (16*S2 - S1)/15.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

from renyi_portfolio.errors import ParameterError, QuadratureError

logger = logging.getLogger(__name__)

Integrand = Callable[[float], float]

# Panels below this relative width are accepted as is (no floating point room left).
_MIN_RELATIVE_WIDTH = 1e-14
# Maximum number of doubling segments when walking out to an infinite limit.
_MAX_TAIL_SEGMENTS = 256


@dataclass(frozen=True)
class QuadratureSpec:
    """
    Tolerance and domain handling of the adaptive Simpson integrator.

    Attributes:
        abs_tol: Absolute error target for the whole integral.
        max_depth: Maximum bisection depth of a single panel.
        support_truncation: Tail probability cut from each side of an unbounded
            support before integrating a density.
    """

    abs_tol: float = 1e-10
    max_depth: int = 50
    support_truncation: float = 1e-9

    def __post_init__(self) -> None:
        if not self.abs_tol > 0:
            raise ParameterError(f"abs_tol must be positive, got {self.abs_tol}")
        if self.max_depth < 1:
            raise ParameterError(f"max_depth must be at least 1, got {self.max_depth}")
        if not 0 < self.support_truncation <= 1e-6:
            raise ParameterError(
                f"support_truncation must lie in (0, 1e-6], got {self.support_truncation}"
            )


DEFAULT_QUADRATURE = QuadratureSpec()


def _evaluate(f: Integrand, x: float) -> float:
    value = float(f(x))
    if not math.isfinite(value):
        raise QuadratureError(f"Integrand returned a non-finite value at x={x!r}", estimate=value, interval=(x, x))
    return value


def _adaptive_panel(f: Integrand, a: float, b: float, tol: float, max_depth: int) -> float:
    """Integrate f over the finite panel [a, b] with an explicit work stack."""
    fa = _evaluate(f, a)
    fb = _evaluate(f, b)
    mid = 0.5 * (a + b)
    fm = _evaluate(f, mid)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    scale = max(abs(a), abs(b), 1.0)

    pieces: List[float] = []
    stack: List[Tuple[float, float, float, float, float, float, float, int]] = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, estimate, local_tol, depth = stack.pop()
        m = 0.5 * (lo + hi)
        lm = 0.5 * (lo + m)
        rm = 0.5 * (m + hi)
        flm = _evaluate(f, lm)
        frm = _evaluate(f, rm)
        left = (m - lo) * (flo + 4.0 * flm + fmid) / 6.0
        right = (hi - m) * (fmid + 4.0 * frm + fhi) / 6.0
        delta = left + right - estimate

        # the first two levels are always split so a coarse panel cannot hide a peak
        converged = depth >= 2 and abs(delta) <= 15.0 * local_tol
        if converged or (hi - lo) <= _MIN_RELATIVE_WIDTH * scale:
            pieces.append(left + right + delta / 15.0)
            continue
        if depth >= max_depth:
            raise QuadratureError(
                f"Adaptive Simpson did not converge on [{lo!r}, {hi!r}] within depth {max_depth}",
                estimate=left + right,
                interval=(lo, hi),
            )
        stack.append((m, hi, fmid, frm, fhi, right, 0.5 * local_tol, depth + 1))
        stack.append((lo, m, flo, flm, fmid, left, 0.5 * local_tol, depth + 1))
    return math.fsum(pieces)


def _integrate_to_infinity(f: Integrand, start: float, direction: float, q: QuadratureSpec) -> float:
    """Walk out from `start` in doubling segments until a segment contributes less than the tolerance."""
    total: List[float] = []
    position = start
    width = 1.0
    for segment in range(_MAX_TAIL_SEGMENTS):
        end = position + direction * width
        lo, hi = (position, end) if direction > 0 else (end, position)
        value = _adaptive_panel(f, lo, hi, 0.25 * q.abs_tol, q.max_depth)
        total.append(value)
        if segment >= 1 and abs(value) <= 0.5 * q.abs_tol:
            return math.fsum(total)
        position = end
        width *= 2.0
    raise QuadratureError(
        f"Integral towards {'+' if direction > 0 else '-'}infinity did not settle",
        estimate=math.fsum(total),
        interval=(start, position),
    )


def integrate(
    f: Integrand,
    a: float,
    b: float,
    q: QuadratureSpec = DEFAULT_QUADRATURE,
    breakpoints: Sequence[float] = (),
) -> float:
    """
    Integrate f over [a, b] by adaptive Simpson.

    Args:
        f: Scalar integrand, continuous on [a, b] except at finitely many points.
        a: Lower limit, may be -inf.
        b: Upper limit, may be +inf.
        q: Tolerance settings.
        breakpoints: Optional interior points where the integrand has kinks or
            where its mass concentrates. Each resulting panel is refined
            independently.

    Returns:
        The integral estimate.

    Raises:
        QuadratureError: If a panel exceeds `q.max_depth` bisections. The error
            carries the offending panel and its last estimate.
    """
    if a == b:
        return 0.0
    if a > b:
        return -integrate(f, b, a, q, breakpoints)

    if math.isinf(a) or math.isinf(b):
        if math.isinf(a) and math.isinf(b):
            finite = sorted(p for p in breakpoints if math.isfinite(p))
            pivot = finite[len(finite) // 2] if finite else 0.0
            return integrate(f, -math.inf, pivot, q, breakpoints) + integrate(f, pivot, math.inf, q, breakpoints)
        finite_points = sorted(p for p in breakpoints if math.isfinite(p) and a < p < b)
        if math.isinf(b):
            anchor = finite_points[-1] if finite_points else a
            head = integrate(f, a, anchor, q, finite_points) if anchor > a else 0.0
            return head + _integrate_to_infinity(f, anchor, 1.0, q)
        anchor = finite_points[0] if finite_points else b
        tail = integrate(f, anchor, b, q, finite_points) if anchor < b else 0.0
        return _integrate_to_infinity(f, anchor, -1.0, q) + tail

    edges = [a] + sorted({float(p) for p in breakpoints if a < p < b}) + [b]
    panel_tol = q.abs_tol / (len(edges) - 1)
    values = [_adaptive_panel(f, lo, hi, panel_tol, q.max_depth) for lo, hi in zip(edges[:-1], edges[1:])]
    logger.debug("Integrated over [%g, %g] in %d panels", a, b, len(values))
    return math.fsum(values)
