"""
Tests for the renyi-portfolio command line: ingestion, artifacts and the entry point.
"""

import json
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

from renyi_portfolio import __version__
from renyi_portfolio.__main__ import _parse_study_parameters, build_parser, main
from renyi_portfolio.cli import (
    EXIT_FAILURE,
    EXIT_OK,
    cmd_backtest,
    cmd_estimate,
    cmd_study,
    cmd_validate,
    ingest_csv,
    run_command,
    write_table,
)
from renyi_portfolio.config import RunConfig, StrategyConfig
from renyi_portfolio.errors import IngestionError, InsufficientDataError, ParameterError
from renyi_portfolio.experiments import StudySpec

# Path to the renyi-portfolio executable
RENYI_PORTFOLIO_CMD = [sys.executable, "-m", "renyi_portfolio"]


def run_cli_command(args, timeout=60):
    """Helper function to run the renyi-portfolio command and return its output."""
    return subprocess.run(
        RENYI_PORTFOLIO_CMD + args,
        capture_output=True,
        text=True,
        check=False,
        timeout=timeout,
        stdin=subprocess.DEVNULL,
    )


def write_returns(path, rows=80, seed=0):
    rng = np.random.default_rng(seed)
    frame = pd.DataFrame(
        0.001 + 0.02 * rng.standard_t(5, size=(rows, 3)),
        columns=["stocks", "bonds", "gold"],
    )
    frame.insert(0, "date", pd.date_range("2001-01-05", periods=rows, freq="W-FRI").strftime("%Y-%m-%d"))
    frame.to_csv(path, index=False)
    return path


def small_run_config(tmp_path, data_path):
    return RunConfig(
        data_path=data_path,
        estimation_window=30,
        roll=10,
        output_dir=tmp_path / "out",
        sharpe_resamples=49,
        sharpe_block_size=2,
        strategies=[
            StrategyConfig(name="EW", kind="ew"),
            StrategyConfig(name="60/40", kind="sixty_forty", equity="stocks", bond="bonds"),
            StrategyConfig(name="MV", kind="mv"),
        ],
    )


class TestIngestion:
    """CSV ingestion and its error reports."""

    def test_good_file(self, tmp_path):
        matrix = ingest_csv(write_returns(tmp_path / "r.csv"))
        assert matrix.shape == (80, 3)
        assert matrix.asset_names == ["stocks", "bonds", "gold"]
        assert matrix.dates.name == "date"

    def test_column_selection(self, tmp_path):
        matrix = ingest_csv(write_returns(tmp_path / "r.csv"), asset_columns=["gold", "stocks"])
        assert matrix.asset_names == ["gold", "stocks"]

    def test_missing_column(self, tmp_path):
        with pytest.raises(IngestionError) as info:
            ingest_csv(write_returns(tmp_path / "r.csv"), asset_columns=["oil"])
        assert info.value.columns == ["oil"]

    def test_blank_cell_reports_file_line(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("date,a,b\n2020-01-03,0.01,0.02\n2020-01-10,,0.01\n2020-01-17,0.0,x\n")
        with pytest.raises(IngestionError) as info:
            ingest_csv(path)
        assert info.value.rows == [3, 4]
        assert info.value.columns == ["a", "b"]

    def test_total_loss_rejected(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("date,a\n2020-01-03,0.01\n2020-01-10,-1.0\n")
        with pytest.raises(IngestionError) as info:
            ingest_csv(path)
        assert info.value.rows == [3]

    def test_dates_must_increase(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("date,a\n2020-01-10,0.01\n2020-01-03,0.02\n2020-01-17,0.0\n")
        with pytest.raises(IngestionError) as info:
            ingest_csv(path)
        assert info.value.rows == [3]

    def test_unparsable_date(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("date,a\n2020-01-03,0.01\nsoon,0.02\n")
        with pytest.raises(IngestionError) as info:
            ingest_csv(path)
        assert info.value.rows == [3]


class TestCommands:
    """The cmd_* implementations."""

    def test_write_table_header(self, tmp_path):
        path = write_table(pd.DataFrame({"x": [0.5]}), tmp_path / "t.csv", headers={"study": "levy"})
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[:3] == ["# schema=1", "# study=levy", "x"]

    def test_validate(self, tmp_path):
        cfg = small_run_config(tmp_path, write_returns(tmp_path / "r.csv"))
        record = cmd_validate(cfg)
        assert record["windows"] == 5
        assert record["strategies"] == ["EW", "60/40", "MV"]

    def test_validate_short_file(self, tmp_path):
        cfg = small_run_config(tmp_path, write_returns(tmp_path / "r.csv", rows=35))
        with pytest.raises(InsufficientDataError):
            cmd_validate(cfg)

    def test_backtest_artifacts(self, tmp_path):
        cfg = small_run_config(tmp_path, write_returns(tmp_path / "r.csv"))
        record = cmd_backtest(cfg, workers=1)
        assert record["status"] == "success"
        assert record["windows"] == 5
        out = tmp_path / "out"
        artifacts = ("performance.csv", "weights.csv", "returns.csv", "sharpe_tests.csv", "data_summary.csv")
        artifacts += ("performance_by_period.csv", "config.json")
        for name in artifacts:
            assert (out / name).exists()

        performance = pd.read_csv(out / "performance.csv", comment="#")
        assert list(performance["strategy"]) == ["EW", "60/40", "MV"]
        assert performance.loc[performance["strategy"] == "EW", "turnover"].iloc[0] == pytest.approx(0.0)

        weights = pd.read_csv(out / "weights.csv", comment="#")
        assert list(weights.columns[:3]) == ["strategy", "window", "rebalance_date"]
        sixty = weights[weights["strategy"] == "60/40"]
        np.testing.assert_allclose(sixty["stocks"], 0.6)
        np.testing.assert_allclose(sixty["bonds"], 0.4)

        returns = pd.read_csv(out / "returns.csv", comment="#")
        assert len(returns) == 50

        summary = pd.read_csv(out / "data_summary.csv", comment="#", index_col="asset")
        assert list(summary.index) == ["stocks", "bonds", "gold"]
        assert summary["jarque_bera_p"].between(0.0, 1.0).all()

        by_period = pd.read_csv(out / "performance_by_period.csv", comment="#")
        assert len(by_period) == 12
        assert list(by_period.groupby("strategy")["observations"].sum()) == [50, 50, 50]
        assert by_period.loc[by_period["strategy"] == "EW", "turnover"].eq(0.0).all()

        saved = json.loads((out / "config.json").read_text(encoding="utf-8"))
        assert saved["roll"] == 10

    def test_backtest_period_breaks(self, tmp_path):
        cfg = small_run_config(tmp_path, write_returns(tmp_path / "r.csv"))
        middle = pd.Timestamp("2001-01-05") + pd.Timedelta(weeks=55)
        cfg = cfg.model_copy(update={"period_breaks": [middle.date()]})
        cmd_backtest(cfg, workers=1)
        by_period = pd.read_csv(tmp_path / "out" / "performance_by_period.csv", comment="#")
        ew = by_period[by_period["strategy"] == "EW"]
        assert list(ew["observations"]) == [25, 25]
        assert ew["start"].iloc[1] == middle.date().isoformat()

    def test_backtest_with_failing_strategy_is_partial(self, tmp_path):
        cfg = small_run_config(tmp_path, write_returns(tmp_path / "r.csv"))
        cfg.strategies.append(StrategyConfig(name="tiny-m", kind="ropt", m=40))
        record = cmd_backtest(cfg, workers=1)
        assert record["status"] == "partial"
        assert record["failed"] == ["tiny-m"]
        performance = pd.read_csv(tmp_path / "out" / "performance.csv", comment="#")
        assert performance["strategy"].iloc[-1] == "tiny-m"
        assert isinstance(performance["error"].iloc[-1], str)

    def test_estimate(self, tmp_path):
        record = cmd_estimate(write_returns(tmp_path / "r.csv"), column="gold", alpha=1.0, m="5")
        assert record["column"] == "gold"
        assert record["m"] == 5
        assert record["exp_entropy"] > 0

    def test_study(self, tmp_path):
        record = cmd_study(StudySpec("comonotonic"), tmp_path)
        assert record["rows"] == 1
        lines = (tmp_path / "study_comonotonic.csv").read_text(encoding="utf-8").splitlines()
        assert lines[:2] == ["# schema=1", "# study=comonotonic"]

    def test_run_command_failure_record(self, capsys):
        def failing():
            raise ParameterError("bad value")

        assert run_command("study", failing) == EXIT_FAILURE
        record = json.loads(capsys.readouterr().out)
        assert record == {"status": "failed", "error_type": "ParameterError", "error": "bad value", "command": "study"}

    def test_run_command_success_record(self, capsys):
        assert run_command("estimate", lambda: {"status": "success", "value": float("nan")}) == EXIT_OK
        record = json.loads(capsys.readouterr().out)
        assert record == {"command": "estimate", "status": "success", "value": None}


class TestEntryPoint:
    """Argument parsing and in-process dispatch."""

    def test_parse_study_parameters(self):
        params = _parse_study_parameters(["draws=1000", "rhos=[0, 0.5]", "label=fast"])
        assert params == {"draws": 1000, "rhos": [0, 0.5], "label": "fast"}
        with pytest.raises(ParameterError):
            _parse_study_parameters(["draws"])

    def test_unknown_study_is_a_usage_error(self):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(["study", "weather"])
        assert info.value.code == 2

    def test_main_study(self, tmp_path, capsys):
        assert main(["study", "levy", "--out", str(tmp_path), "--param", "sigmas=[1, 4]"]) == EXIT_OK
        record = json.loads(capsys.readouterr().out)
        assert record["rows"] == 3
        assert (tmp_path / "study_levy.csv").exists()

    def test_main_missing_data(self, tmp_path, capsys):
        assert main(["estimate", "--data", str(tmp_path / "missing.csv")]) == EXIT_FAILURE
        record = json.loads(capsys.readouterr().out)
        assert record["status"] == "failed"


@pytest.mark.integration
class TestSubprocess:
    """The installed module run as a separate process."""

    def test_version(self):
        result = run_cli_command(["--version"])
        assert result.returncode == 0
        assert __version__ in result.stdout

    def test_study_writes_csv_and_logs_to_stderr(self, tmp_path):
        result = run_cli_command(["--log-level", "INFO", "study", "comonotonic", "--out", str(tmp_path)])
        assert result.returncode == 0, result.stderr
        record = json.loads(result.stdout)
        assert record["command"] == "study"
        assert record["status"] == "success"
        assert "Running study comonotonic" in result.stderr

    def test_unknown_verb(self):
        result = run_cli_command(["rebalance"])
        assert result.returncode == 2

    def test_backtest_end_to_end(self, tmp_path):
        data = write_returns(tmp_path / "r.csv")
        config = small_run_config(tmp_path, data)
        config_path = tmp_path / "run.json"
        config_path.write_text(config.to_json(), encoding="utf-8")
        result = run_cli_command(["backtest", "--config", str(config_path)], timeout=300)
        assert result.returncode == 0, result.stderr
        assert json.loads(result.stdout)["windows"] == 5
