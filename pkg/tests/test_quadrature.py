"""
Tests for the adaptive Simpson integrator.
"""

import math

import pytest

from renyi_portfolio.errors import ParameterError, QuadratureError
from renyi_portfolio.quadrature import QuadratureSpec, integrate


class TestQuadratureSpec:
    """Validation of the tolerance settings."""

    def test_defaults(self):
        q = QuadratureSpec()
        assert q.abs_tol == 1e-10
        assert q.max_depth == 50
        assert 0 < q.support_truncation <= 1e-6

    @pytest.mark.parametrize("kwargs", [{"abs_tol": 0.0}, {"max_depth": 0}, {"support_truncation": 1e-3}])
    def test_invalid_settings(self, kwargs):
        with pytest.raises(ParameterError):
            QuadratureSpec(**kwargs)


class TestIntegrate:
    """Finite and infinite limits, breakpoints and failure modes."""

    def test_polynomial(self):
        assert integrate(lambda x: x * x, 0.0, 1.0) == pytest.approx(1.0 / 3.0, abs=1e-10)

    def test_reversed_limits_change_sign(self):
        assert integrate(lambda x: x, 2.0, 0.0) == pytest.approx(-2.0, abs=1e-10)

    def test_empty_interval(self):
        assert integrate(lambda x: 1.0, 3.0, 3.0) == 0.0

    def test_kink_at_breakpoint(self):
        assert integrate(abs, -1.0, 1.0, breakpoints=(0.0,)) == pytest.approx(1.0, abs=1e-10)

    def test_gaussian_over_real_line(self):
        def phi(x):
            return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)

        assert integrate(phi, -math.inf, math.inf) == pytest.approx(1.0, abs=1e-8)

    def test_half_line(self):
        assert integrate(lambda x: math.exp(-x), 0.0, math.inf) == pytest.approx(1.0, abs=1e-8)
        assert integrate(lambda x: math.exp(x), -math.inf, 0.0) == pytest.approx(1.0, abs=1e-8)

    def test_non_finite_integrand(self):
        with pytest.raises(QuadratureError):
            integrate(lambda x: math.inf, 0.0, 1.0)

    def test_depth_exhaustion_reports_panel(self):
        q = QuadratureSpec(abs_tol=1e-14, max_depth=3)
        with pytest.raises(QuadratureError) as info:
            integrate(lambda x: math.sin(50.0 * x), 0.0, 10.0, q)
        lo, hi = info.value.interval
        assert 0.0 <= lo < hi <= 10.0
