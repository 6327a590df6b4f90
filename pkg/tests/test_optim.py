"""
Tests for the simplex search and the strategy solvers.
"""

import math

import numpy as np
import pytest

from renyi_portfolio.entropy import RenyiParams, m_spacings_estimate
from renyi_portfolio.errors import InfeasibleError, InsufficientDataError, ObjectiveError, ParameterError
from renyi_portfolio.optim import (
    SolverConfig,
    Strategy,
    StrategyKind,
    apply_turnover_cap,
    minimize_on_simplex,
    normalize_weights,
    ropt_objective,
    solve_strategy,
    solve_strategy_detailed,
    strategy_objective,
)
from renyi_portfolio.risk import CovarianceKind, sample_covariance


def _window(t=120, seed=0):
    rng = np.random.default_rng(seed)
    scales = np.array([0.01, 0.02, 0.03])
    return 0.001 + rng.standard_t(6, size=(t, 3)) * scales


class TestSimplexSearch:
    """Direct search on the reparameterised simplex."""

    def test_quadratic_minimum(self):
        target = np.array([0.2, 0.3, 0.5])
        w = minimize_on_simplex(lambda w: float(((w - target) ** 2).sum()), 3)
        np.testing.assert_allclose(w, target, atol=1e-3)
        assert w.sum() == pytest.approx(1.0)
        assert np.all(w >= 0)

    def test_vertex_minimum(self):
        w = minimize_on_simplex(lambda w: float(w[1] + w[2]), 3)
        assert w[0] == pytest.approx(1.0, abs=1e-3)

    def test_undefined_objective(self):
        with pytest.raises(ObjectiveError):
            minimize_on_simplex(lambda w: math.nan, 3)

    def test_needs_two_assets(self):
        with pytest.raises(ParameterError):
            minimize_on_simplex(lambda w: 0.0, 1)

    def test_normalize(self):
        np.testing.assert_allclose(normalize_weights([2.0, -1e-15, 2.0]), [0.5, 0.0, 0.5])
        with pytest.raises(InfeasibleError):
            normalize_weights([0.0, 0.0])

    def test_solver_settings(self):
        with pytest.raises(ParameterError):
            SolverConfig(xatol=0.0)
        with pytest.raises(ParameterError):
            SolverConfig(restarts=0)


class TestTurnoverCap:
    """L1 turnover projection."""

    def test_pulls_back_to_cap(self):
        w = apply_turnover_cap(np.array([0.5, 0.5]), np.array([1.0, 0.0]), 0.2)
        np.testing.assert_allclose(w, [0.6, 0.4])

    def test_unchanged_within_cap(self):
        proposed = np.array([0.55, 0.45])
        np.testing.assert_array_equal(apply_turnover_cap(np.array([0.5, 0.5]), proposed, 0.2), proposed)

    def test_cap_must_be_positive(self):
        with pytest.raises(ParameterError):
            apply_turnover_cap(np.array([0.5, 0.5]), np.array([1.0, 0.0]), 0.0)


class TestStrategies:
    """Strategy definitions and solvers."""

    def setup_method(self):
        self.x = _window()

    def test_validation(self):
        with pytest.raises(ParameterError):
            Strategy.ropt(0.5, bias_correct=True)
        with pytest.raises(ParameterError):
            Strategy.sixty_forty(equity=1, bond=1)
        with pytest.raises(ParameterError):
            Strategy.mvar(r=0.9)
        with pytest.raises(ParameterError):
            Strategy.msr(turnover_cap=-0.1)

    def test_fixed_allocations(self):
        np.testing.assert_allclose(solve_strategy(Strategy.ew(), self.x), np.full(3, 1.0 / 3.0))
        np.testing.assert_allclose(solve_strategy(Strategy.sixty_forty(equity=2, bond=0), self.x), [0.4, 0.0, 0.6])
        with pytest.raises(ParameterError):
            solve_strategy(Strategy.sixty_forty(equity=0, bond=5), self.x)

    def test_short_window(self):
        with pytest.raises(InsufficientDataError):
            solve_strategy(Strategy.mv(), self.x[:20])

    def test_minimum_variance_two_assets(self):
        x = self.x[:, :2]
        cov = sample_covariance(x).matrix
        expected = (cov[1, 1] - cov[0, 1]) / (cov[0, 0] + cov[1, 1] - 2.0 * cov[0, 1])
        w = solve_strategy(Strategy.mv(), x)
        assert w[0] == pytest.approx(expected, abs=1e-3)

    def test_shrinkage_variant_runs(self):
        w = solve_strategy(Strategy.mv(covariance=CovarianceKind.SHRINKAGE), self.x)
        assert w.sum() == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "strategy",
        [Strategy.ropt(0.5), Strategy.ropt(1.0), Strategy.mv(), Strategy.mvar(), Strategy.mcvar(), Strategy.msr()],
    )
    def test_never_worse_than_equal_weights(self, strategy):
        objective = strategy_objective(strategy, self.x)
        result = solve_strategy_detailed(strategy, self.x)
        assert result.value <= objective(np.full(3, 1.0 / 3.0)) + 1e-12
        assert result.weights.sum() == pytest.approx(1.0)
        assert np.all(result.weights >= 0)
        assert result.evaluations > 0

    def test_ropt_objective_is_portfolio_entropy(self):
        objective = ropt_objective(self.x, RenyiParams(1.0, 10))
        w = np.array([0.2, 0.3, 0.5])
        assert objective(w) == pytest.approx(m_spacings_estimate(self.x @ w, RenyiParams(1.0, 10)))

    def test_turnover_cap_is_respected(self):
        prev = np.array([0.0, 0.0, 1.0])
        capped = Strategy.msr(turnover_cap=0.05)
        w = solve_strategy(capped, self.x, prev=prev)
        assert np.abs(w - prev).sum() <= 0.05 + 1e-9

    def test_first_window_is_not_capped(self):
        uncapped = solve_strategy(Strategy.msr(turnover_cap=None), self.x)
        first = solve_strategy(Strategy.msr(turnover_cap=0.05), self.x)
        np.testing.assert_allclose(first, uncapped)

    def test_strategy_kinds(self):
        assert StrategyKind("sixty_forty") is StrategyKind.SIXTY_FORTY
        assert Strategy.ropt(0.7).name == "ROpt(0.7)"
        assert Strategy.mv(covariance=CovarianceKind.SHRINKAGE).name == "MV-shrink"
