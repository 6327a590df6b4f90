"""
Main entry point for the renyi-portfolio command.

This script parses command-line arguments, loads optional environment
variables from a .env file, configures logging and dispatches to one of the
verbs: backtest, study, estimate, validate or serve.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv


def _ensure_package_on_sys_path() -> None:
    """Ensure the project root is on sys.path when running as a script."""
    if __package__:
        return
    package_dir = Path(__file__).resolve().parent
    project_root = package_dir.parent
    project_root_str = str(project_root)
    if project_root_str not in sys.path:
        sys.path.insert(0, project_root_str)


_ensure_package_on_sys_path()

from renyi_portfolio import __version__  # noqa: E402
from renyi_portfolio.cli import (  # noqa: E402
    EXIT_FAILURE,
    cmd_backtest,
    cmd_estimate,
    cmd_study,
    cmd_validate,
    run_command,
)
from renyi_portfolio.config import load_run_config, worker_count  # noqa: E402
from renyi_portfolio.errors import ParameterError  # noqa: E402
from renyi_portfolio.experiments import StudySpec, study_names  # noqa: E402


def _parse_study_parameters(pairs: Optional[List[str]]) -> Dict[str, Any]:
    """Turn repeated --param key=value options into a dict; values are read as JSON when possible."""
    parameters: Dict[str, Any] = {}
    for pair in pairs or []:
        key, sep, raw = pair.partition("=")
        if not sep or not key.strip():
            raise ParameterError(f"Study parameters must look like key=value, got {pair!r}")
        try:
            parameters[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            parameters[key.strip()] = raw
    return parameters


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, help="JSON run configuration file")
    parser.add_argument("--data", type=str, help="CSV of per-period returns (overrides data_path)")
    parser.add_argument("--date-column", type=str, help="Name of the date column (default: date)")
    parser.add_argument("--output-dir", type=str, help="Directory for the artifacts (default: results)")
    parser.add_argument("--estimation-window", type=int, help="Rows per estimation window (default: 260)")
    parser.add_argument("--roll", type=int, help="Rows held between rebalances (default: 26)")
    parser.add_argument("--seed", type=int, help="Seed of the Sharpe test bootstrap (default: 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="renyi-portfolio",
        description="Renyi entropy portfolio optimisation, backtesting and synthetic studies",
        formatter_class=argparse.RawTextHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        type=str,
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Logging level",
    )
    verbs = parser.add_subparsers(dest="command", required=True)

    backtest = verbs.add_parser("backtest", help="Run the rolling-window backtest and write its reports")
    _add_run_options(backtest)

    validate = verbs.add_parser("validate", help="Check the configuration and the data without running")
    _add_run_options(validate)

    study = verbs.add_parser("study", help="Run one synthetic study")
    study.add_argument("name", choices=study_names(), help="Study to run")
    study.add_argument("--out", type=str, default="results", help="Output directory (default: results)")
    study.add_argument("--seed", type=int, default=0, help="Root seed (default: 0)")
    study.add_argument(
        "--desk-scale",
        action="store_true",
        help="Cut repetitions and sample sizes for a quick run",
    )
    study.add_argument(
        "--param",
        action="append",
        metavar="KEY=VALUE",
        help="Override a study parameter; VALUE is parsed as JSON when possible (repeatable)",
    )

    estimate = verbs.add_parser("estimate", help="Estimate the exponential Renyi entropy of one return column")
    estimate.add_argument("--data", type=str, required=True, help="CSV of per-period returns")
    estimate.add_argument("--column", type=str, help="Return column (default: first one)")
    estimate.add_argument("--date-column", type=str, default="date", help="Name of the date column")
    estimate.add_argument("--alpha", type=float, default=1.0, help="Order of the entropy (default: 1)")
    estimate.add_argument("--m", type=str, help="Spacing width: integer, 'N^(1/p)' or 'N^x' (default: N^(2/3))")
    estimate.add_argument("--bias-correct", action="store_true", help="Apply the alpha = 1 bias correction")

    serve = verbs.add_parser("serve", help="Serve one-shot computations as MCP tools")
    serve.add_argument(
        "--transport",
        type=str,
        default="stdio",
        choices=["stdio", "sse"],
        help="Transport protocol for MCP communication (stdio, or sse for HTTP streaming)",
    )
    serve.add_argument("--port", type=int, default=8000, help="Port for SSE transport (default: 8000)")
    serve.add_argument(
        "--host",
        type=str,
        default="127.0.0.1",
        help="Host to bind SSE server to (default: 127.0.0.1, use 0.0.0.0 for all interfaces)",
    )
    return parser


def _run_config(args: argparse.Namespace):
    return load_run_config(
        args.config,
        data_path=args.data,
        date_column=args.date_column,
        output_dir=args.output_dir,
        estimation_window=args.estimation_window,
        roll=args.roll,
        seed=args.seed,
    )


def _serve(args: argparse.Namespace) -> int:
    from renyi_portfolio.server import create_server

    logger = logging.getLogger(__name__)
    server = create_server()
    if args.transport == "sse":
        logger.info("Starting SSE server on %s:%d", args.host, args.port)
        server.run(transport=args.transport, port=args.port, host=args.host)
    else:
        logger.info("Using stdio transport - suppressing direct stdout messages for MCP communication.")
        server.run(transport=args.transport)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Run the renyi-portfolio command line."""
    # Load environment variables from .env file if it exists
    load_dotenv()

    parser = build_parser()
    args = parser.parse_args(argv)

    # Logs go to stderr so stdout carries only the JSON records (and the stdio transport)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )

    if args.command == "serve":
        return _serve(args)
    if args.command == "backtest":
        return run_command("backtest", lambda: cmd_backtest(_run_config(args)))
    if args.command == "validate":
        return run_command("validate", lambda: cmd_validate(_run_config(args)))
    if args.command == "estimate":
        return run_command(
            "estimate",
            lambda: cmd_estimate(args.data, args.column, args.alpha, args.m, args.bias_correct, args.date_column),
        )
    if args.command == "study":

        def study() -> Dict[str, Any]:
            spec = StudySpec(
                args.name,
                parameters=_parse_study_parameters(args.param),
                seed=args.seed,
                desk_scale=args.desk_scale,
                workers=worker_count(),
            )
            return cmd_study(spec, args.out)

        return run_command("study", study)

    parser.error(f"Unknown command {args.command!r}")
    return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
