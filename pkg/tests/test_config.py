"""
Tests for the run configuration.
"""

import json
from datetime import date

import pytest
from pydantic import ValidationError

from renyi_portfolio.config import (
    WORKERS_ENV,
    RunConfig,
    StrategyConfig,
    default_strategies,
    load_run_config,
    worker_count,
)
from renyi_portfolio.errors import ParameterError
from renyi_portfolio.optim import StrategyKind
from renyi_portfolio.risk import CovarianceKind


class TestStrategyConfig:
    """Validation of one strategy entry."""

    def test_default_line_up(self):
        names = [s.name for s in default_strategies()]
        assert names == [
            "ROpt(0.5)",
            "ROpt(0.7)",
            "ROpt(1)",
            "MV",
            "MV-shrink",
            "MVaR(5%)",
            "MCVaR(5%)",
            "EW",
            "60/40",
            "MSR",
        ]
        msr = default_strategies()[-1]
        assert msr.turnover_cap == pytest.approx(0.075)

    @pytest.mark.parametrize(
        "fields",
        [
            {"m": "N^(2)"},
            {"delta": 1.5},
            {"r": 0.7},
            {"alpha": -1.0},
            {"turnover_cap": 0.0},
            {"leverage": 2.0},
        ],
    )
    def test_invalid_fields(self, fields):
        with pytest.raises(ValidationError):
            StrategyConfig(name="x", kind="ropt", **fields)

    def test_to_strategy_resolves_columns(self):
        cfg = StrategyConfig(name="60/40", kind="sixty_forty", equity="stocks", bond="bonds")
        s = cfg.to_strategy(["bonds", "gold", "stocks"], annualization=12)
        assert (s.equity, s.bond) == (2, 0)
        assert s.annualization == 12
        with pytest.raises(ParameterError):
            cfg.to_strategy(["gold", "stocks"])

    def test_integer_width_string(self):
        s = StrategyConfig(name="r", kind="ropt", m="12").to_strategy(["a", "b"])
        assert s.m == 12
        assert s.kind is StrategyKind.ROPT


class TestRunConfig:
    """The whole run document."""

    def test_defaults(self):
        cfg = RunConfig()
        assert cfg.estimation_window == 260
        assert cfg.roll == 26
        assert cfg.annualization == 52
        assert len(cfg.strategies) == 10
        assert cfg.sub_periods == 4
        assert cfg.period_breaks == []

    def test_period_breaks_are_dates(self):
        cfg = RunConfig(period_breaks=["2000-07-03", "2005-12-30"])
        assert cfg.period_breaks == [date(2000, 7, 3), date(2005, 12, 30)]
        with pytest.raises(ValidationError):
            RunConfig(period_breaks=["mid-2000"])
        with pytest.raises(ValidationError):
            RunConfig(sub_periods=0)

    def test_unique_names(self):
        with pytest.raises(ValidationError):
            RunConfig(strategies=[StrategyConfig(name="A", kind="ew"), StrategyConfig(name="A", kind="mv")])

    def test_json_round_trip(self):
        cfg = RunConfig(
            strategies=[
                StrategyConfig(name="MV-shrink", kind="mv", covariance="shrinkage", delta=0.3),
                StrategyConfig(name="ROpt", kind="ropt", m=10),
            ]
        )
        restored = RunConfig.model_validate_json(cfg.to_json())
        assert restored == cfg
        assert restored.strategies[0].covariance is CovarianceKind.SHRINKAGE

    def test_load_with_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        document = {"estimation_window": 104, "roll": 13, "strategies": [{"name": "EW", "kind": "ew"}]}
        path.write_text(json.dumps(document))
        cfg = load_run_config(path, roll=4, seed=None)
        assert cfg.estimation_window == 104
        assert cfg.roll == 4
        assert cfg.seed == 0

    def test_load_errors(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ParameterError):
            load_run_config(path)
        with pytest.raises(ParameterError):
            load_run_config(estimation_window=5)


class TestWorkerCount:
    """RENYI_PORTFOLIO_WORKERS handling."""

    def test_unset(self, monkeypatch):
        monkeypatch.delenv(WORKERS_ENV, raising=False)
        assert worker_count() == 1

    def test_set(self, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV, "4")
        assert worker_count() == 4

    @pytest.mark.parametrize("raw", ["zero", "0", "-2"])
    def test_invalid(self, monkeypatch, raw):
        monkeypatch.setenv(WORKERS_ENV, raw)
        with pytest.raises(ParameterError):
            worker_count()
