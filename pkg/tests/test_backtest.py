"""
Tests for the rolling-window backtest engine.
"""

import numpy as np
import pandas as pd
import pytest

import renyi_portfolio.backtest as backtest
from renyi_portfolio.backtest import BacktestConfig, ReturnMatrix, run_backtest, weight_trajectory_stats, window_count
from renyi_portfolio.errors import InsufficientDataError, ParameterError
from renyi_portfolio.optim import Strategy


def _matrix(t=100, n=3, seed=0):
    rng = np.random.default_rng(seed)
    values = 0.001 + 0.02 * rng.standard_t(5, size=(t, n))
    dates = pd.date_range("2000-01-07", periods=t, freq="W-FRI")
    return ReturnMatrix.from_array(values, dates=dates, asset_names=["equity", "bond", "gold"])


class TestWindowLayout:
    """Window arithmetic."""

    def test_weekly_layout(self):
        assert window_count(1409, 260, 26) == 44

    def test_trailing_rows_are_dropped(self):
        assert window_count(100, 40, 10) == 6
        assert window_count(105, 40, 10) == 6
        assert window_count(45, 40, 10) == 0

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            BacktestConfig(roll=0)
        with pytest.raises(ParameterError):
            BacktestConfig(strategies=(Strategy.ew(), Strategy.ew()))


class TestReturnMatrix:
    """Validation of the return panel."""

    def test_rejects_bad_cells(self):
        with pytest.raises(ParameterError):
            ReturnMatrix.from_array([[0.1, np.nan], [0.0, 0.1]])
        with pytest.raises(ParameterError):
            ReturnMatrix.from_array([[0.1, -1.0], [0.0, 0.1]])

    def test_rejects_unordered_dates(self):
        with pytest.raises(ParameterError):
            ReturnMatrix.from_array([[0.1], [0.2]], dates=["2020-01-10", "2020-01-03"])

    def test_default_names(self):
        m = ReturnMatrix.from_array(np.zeros((3, 2)))
        assert m.asset_names == ["asset_0", "asset_1"]
        assert m.shape == (3, 2)


class TestRunBacktest:
    """End-to-end rebalancing."""

    def setup_method(self):
        self.matrix = _matrix()
        self.strategies = (Strategy.ew(), Strategy.sixty_forty(equity=0, bond=1), Strategy.mv())

    def test_result_layout(self):
        result = run_backtest(self.matrix, BacktestConfig(40, 10, self.strategies))
        assert result.completed == ["EW", "60/40", "MV"]
        assert len(result.windows) == 6
        assert result.windows[0] == (0, 40, 50)
        assert result.windows[-1] == (50, 90, 100)
        assert len(result.covariances) == 6
        assert result.weights["MV"].shape == (6, 3)
        ew = result.returns["EW"]
        assert len(ew) == 60
        assert ew.index[0] == self.matrix.dates[40]
        np.testing.assert_allclose(ew.to_numpy(), self.matrix.values[40:100].mean(axis=1))

    def test_fixed_strategies_have_no_turnover(self):
        result = run_backtest(self.matrix, BacktestConfig(40, 10, self.strategies))
        for name in ("EW", "60/40"):
            weights = result.weights[name]
            np.testing.assert_allclose(np.diff(weights, axis=0), 0.0)
        pairs = weight_trajectory_stats(result)
        assert len(pairs["EW"]) == 5

    def test_frames(self):
        result = run_backtest(self.matrix, BacktestConfig(40, 10, self.strategies))
        weights = result.weights_frame()
        assert list(weights.columns) == ["strategy", "window", "equity", "bond", "gold"]
        assert len(weights) == 18
        returns = result.returns_frame()
        assert list(returns.columns) == ["EW", "60/40", "MV"]

    def test_failed_strategy_does_not_stop_others(self):
        broken = Strategy.sixty_forty(equity=0, bond=7, name="broken")
        result = run_backtest(self.matrix, BacktestConfig(40, 10, (Strategy.ew(), broken)))
        assert result.completed == ["EW"]
        assert "broken" in result.errors
        assert result.errors["broken"].window == 0

    def test_numerical_failure_is_isolated(self, monkeypatch):
        real_solve = backtest.solve_strategy

        def solve(strategy, fit, prev, solver):
            if strategy.name == "MV" and prev is not None:
                raise np.linalg.LinAlgError("Singular matrix")
            return real_solve(strategy, fit, prev, solver)

        monkeypatch.setattr(backtest, "solve_strategy", solve)
        result = run_backtest(self.matrix, BacktestConfig(40, 10, self.strategies))
        assert result.completed == ["EW", "60/40"]
        error = result.errors["MV"]
        assert error.window == 1
        assert isinstance(error.__cause__, np.linalg.LinAlgError)

    def test_not_enough_rows(self):
        with pytest.raises(InsufficientDataError):
            run_backtest(self.matrix, BacktestConfig(95, 10, self.strategies))

    @pytest.mark.slow
    def test_parallel_matches_sequential(self):
        sequential = run_backtest(self.matrix, BacktestConfig(40, 10, self.strategies))
        parallel = run_backtest(self.matrix, BacktestConfig(40, 10, self.strategies, workers=2))
        assert parallel.completed == sequential.completed
        for name in sequential.completed:
            np.testing.assert_allclose(parallel.weights[name], sequential.weights[name])
