"""
Command implementations behind the renyi-portfolio entry point.

Each `cmd_*` function does the work of one verb and returns a JSON-ready
record; `run_command` turns it into stdout output and an exit code. Tables are
written as UTF-8 CSV files preceded by a `# schema=1` comment line.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from renyi_portfolio.backtest import BacktestConfig, ReturnMatrix, run_backtest, window_count
from renyi_portfolio.config import RunConfig, worker_count
from renyi_portfolio.entropy import RenyiParams, m_spacings_estimate, resolve_m
from renyi_portfolio.errors import IngestionError, InsufficientDataError, ParameterError, RenyiPortfolioError
from renyi_portfolio.experiments import StudySpec, run_study
from renyi_portfolio.metrics import (
    REPORT_COLUMNS,
    data_summary,
    performance_by_period,
    performance_report,
    sharpe_test_matrix,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

Record = Dict[str, Any]


# ----------------------------------------------------------------------
# Ingestion and emission
# ----------------------------------------------------------------------
def ingest_csv(
    path: Union[str, Path],
    date_column: str = "date",
    asset_columns: Optional[Sequence[str]] = None,
) -> ReturnMatrix:
    """
    Read a CSV of decimal per-period returns into a ReturnMatrix.

    The file needs a header row, one ISO-8601 date column and at least one
    numeric return column. Dates must be strictly increasing.

    Args:
        path: CSV file.
        date_column: Name of the date column.
        asset_columns: Columns to keep, in order; all other columns when None.

    Raises:
        IngestionError: For missing columns, unparsable dates, blank or
            non-numeric cells, returns <= -1, or dates out of order. The error
            lists the offending file lines and columns.
    """
    try:
        frame = pd.read_csv(path, skip_blank_lines=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise IngestionError(f"Cannot parse {path}: {exc}") from exc

    if date_column not in frame.columns:
        raise IngestionError(f"Date column {date_column!r} not found in {path}", columns=[date_column])
    columns = list(asset_columns) if asset_columns else [c for c in frame.columns if c != date_column]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise IngestionError(f"Columns not found in {path}: {', '.join(missing)}", columns=missing)
    if not columns:
        raise IngestionError(f"{path} has no return columns")

    # file line of each data row: the header is line 1
    lines = np.arange(len(frame)) + 2

    dates = pd.to_datetime(frame[date_column], format="ISO8601", errors="coerce")
    bad_dates = dates.isna().to_numpy()
    if bad_dates.any():
        raise IngestionError(
            f"Unparsable dates in {path} at lines {lines[bad_dates].tolist()}",
            rows=lines[bad_dates].tolist(),
            columns=[date_column],
        )

    values = frame[columns].apply(pd.to_numeric, errors="coerce")
    bad = ~np.isfinite(values.to_numpy(dtype=float))
    if bad.any():
        bad_rows = lines[bad.any(axis=1)].tolist()
        bad_columns = [c for c, flag in zip(columns, bad.any(axis=0)) if flag]
        raise IngestionError(
            f"Missing or non-numeric cells in {path} at lines {bad_rows} in columns {bad_columns}",
            rows=bad_rows,
            columns=bad_columns,
        )
    floor = values.to_numpy(dtype=float) <= -1.0
    if floor.any():
        raise IngestionError(
            f"Returns <= -1 in {path} at lines {lines[floor.any(axis=1)].tolist()}",
            rows=lines[floor.any(axis=1)].tolist(),
            columns=[c for c, flag in zip(columns, floor.any(axis=0)) if flag],
        )

    steps = dates.diff().to_numpy()[1:]
    out_of_order = np.flatnonzero(steps <= np.timedelta64(0, "ns"))
    if out_of_order.size:
        offending = lines[out_of_order + 1].tolist()
        raise IngestionError(
            f"Dates in {path} are not strictly increasing at lines {offending}",
            rows=offending,
            columns=[date_column],
        )

    panel = pd.DataFrame(values.to_numpy(dtype=float), index=pd.DatetimeIndex(dates, name=date_column), columns=columns)
    logger.info("Ingested %s: %d rows x %d assets", path, panel.shape[0], panel.shape[1])
    return ReturnMatrix(panel)


def write_table(
    frame: pd.DataFrame,
    path: Union[str, Path],
    index: bool = False,
    headers: Optional[Dict[str, str]] = None,
) -> Path:
    """Write a schema-versioned CSV: `# schema=1`, optional `# key=value` lines, then the table."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# schema={SCHEMA_VERSION}\n")
        for key, value in (headers or {}).items():
            handle.write(f"# {key}={value}\n")
        frame.to_csv(handle, index=index, float_format="%.10g", lineterminator="\n")
    logger.info("Wrote %s (%d rows)", target, len(frame))
    return target


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, (np.floating, np.integer)):
        return _json_safe(value.item())
    return value


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------
def cmd_backtest(cfg: RunConfig, workers: Optional[int] = None) -> Record:
    """
    Run the configured backtest and write its artifacts to cfg.output_dir.

    Artifacts: performance.csv, weights.csv, returns.csv, sharpe_tests.csv,
    data_summary.csv, performance_by_period.csv and the effective config.json.
    Strategies whose track aborted keep a row in performance.csv with an error
    message and make the record status "partial".
    """
    if cfg.data_path is None:
        raise IngestionError("No data_path configured")
    matrix = ingest_csv(cfg.data_path, cfg.date_column, cfg.asset_columns)
    strategies = tuple(s.to_strategy(matrix.asset_names, cfg.annualization) for s in cfg.strategies)
    bt_cfg = BacktestConfig(
        estimation_window=cfg.estimation_window,
        roll=cfg.roll,
        strategies=strategies,
        workers=workers if workers is not None else worker_count(),
    )
    result = run_backtest(matrix, bt_cfg)

    rows: List[Dict[str, Any]] = []
    for s in strategies:
        row: Dict[str, Any] = {"strategy": s.name, **{c: math.nan for c in REPORT_COLUMNS}, "error": ""}
        if s.name in result.errors:
            row["error"] = str(result.errors[s.name])
        else:
            try:
                report = performance_report(
                    result.returns[s.name].to_numpy(),
                    result.weights[s.name],
                    result.covariances,
                    cfg.tail_level,
                    cfg.annualization,
                )
                row.update(report.as_row())
            except RenyiPortfolioError as exc:
                logger.warning("No performance report for %s: %s", s.name, exc)
                row["error"] = str(exc)
        rows.append(row)

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(pd.DataFrame(rows, columns=["strategy"] + REPORT_COLUMNS + ["error"]), out / "performance.csv")

    weights = result.weights_frame()
    hold_dates = [matrix.dates[hold_start] for _, hold_start, _ in result.windows]
    weights.insert(2, "rebalance_date", [hold_dates[k].date().isoformat() for k in weights["window"]])
    write_table(weights, out / "weights.csv")

    returns = result.returns_frame()
    returns.index = [d.date().isoformat() for d in returns.index]
    returns.index.name = cfg.date_column
    write_table(returns, out / "returns.csv", index=True)

    summary = data_summary(matrix.frame, cfg.tail_level, cfg.annualization)
    write_table(summary, out / "data_summary.csv", index=True)

    if result.completed:
        try:
            by_period = performance_by_period(
                {name: result.returns[name] for name in result.completed},
                {name: result.weights[name] for name in result.completed},
                hold_dates,
                cfg.sub_periods,
                cfg.period_breaks,
                cfg.tail_level,
                cfg.annualization,
            )
        except ParameterError as exc:
            logger.warning("No sub-period report: %s", exc)
        else:
            write_table(by_period, out / "performance_by_period.csv")

    completed = {name: result.returns[name].to_numpy() for name in result.completed}
    tests = sharpe_test_matrix(completed, cfg.sharpe_resamples, cfg.sharpe_block_size, cfg.seed)
    tests.index.name = "strategy"
    write_table(tests, out / "sharpe_tests.csv", index=True)

    (out / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    return {
        "status": "partial" if result.errors else "success",
        "output_dir": str(out),
        "windows": len(result.windows),
        "strategies": result.completed,
        "failed": sorted(result.errors),
    }


def cmd_study(spec: StudySpec, out_dir: Union[str, Path]) -> Record:
    """Run one study and write `<out_dir>/study_<name>.csv`."""
    table = run_study(spec)
    name = spec.study.value
    path = write_table(table, Path(out_dir) / f"study_{name.replace('-', '_')}.csv", headers={"study": name})
    return {"status": "success", "study": name, "rows": len(table), "path": str(path)}


def cmd_estimate(
    data_path: Union[str, Path],
    column: Optional[str] = None,
    alpha: float = 1.0,
    m: Union[int, str, None] = None,
    bias_correct: bool = False,
    date_column: str = "date",
) -> Record:
    """One-shot m-spacings estimate of the exponential Renyi entropy of a return column."""
    matrix = ingest_csv(data_path, date_column, [column] if column else None)
    name = column or matrix.asset_names[0]
    values = matrix.frame[name].to_numpy(dtype=float)
    width = resolve_m(int(m) if isinstance(m, str) and m.strip().isdigit() else m, values.size)
    estimate = m_spacings_estimate(values, RenyiParams(alpha, width, bias_correct))
    return {
        "status": "success",
        "column": name,
        "observations": int(values.size),
        "alpha": alpha,
        "m": width,
        "bias_correct": bias_correct,
        "exp_entropy": estimate,
        "log_entropy": math.log(estimate),
    }


def cmd_validate(cfg: RunConfig) -> Record:
    """Check the data file, the strategy line-up and the window arithmetic without running anything."""
    if cfg.data_path is None:
        raise IngestionError("No data_path configured")
    matrix = ingest_csv(cfg.data_path, cfg.date_column, cfg.asset_columns)
    t, n = matrix.shape
    needed = cfg.estimation_window + cfg.roll
    if t < needed:
        raise InsufficientDataError(f"Need at least estimation_window + roll = {needed} rows, got {t}")
    strategies = [s.to_strategy(matrix.asset_names, cfg.annualization) for s in cfg.strategies]
    return {
        "status": "success",
        "rows": t,
        "assets": n,
        "windows": window_count(t, cfg.estimation_window, cfg.roll),
        "strategies": [s.name for s in strategies],
    }


def run_command(command: str, action: Callable[[], Record]) -> int:
    """
    Run a command, print its JSON record on stdout and return the exit code.

    Package errors and I/O errors become a failure record
    {"status": "failed", "error_type", "error", "command"} and exit code 1.
    """
    try:
        record = action()
    except (RenyiPortfolioError, OSError) as exc:
        logger.error("%s failed: %s", command, exc)
        record = {"status": "failed", "error_type": type(exc).__name__, "error": str(exc), "command": command}
        print(json.dumps(record))
        return EXIT_FAILURE
    record = {"command": command, **{k: _json_safe(v) for k, v in record.items()}}
    print(json.dumps(record))
    return EXIT_OK if record.get("status") == "success" else EXIT_FAILURE
