"""
Run configuration for the command-line tools.

A run is described by a single JSON document validated with pydantic. Every
field has the default of the main empirical comparison (260-week window,
26-week roll, m = N^(2/3), alpha in {0.5, 0.7, 1}, r = 5%, 7.5% turnover cap
for the maximum Sharpe portfolio).
"""

import json
import logging
import os
from datetime import date
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from renyi_portfolio.entropy import resolve_m
from renyi_portfolio.errors import ParameterError
from renyi_portfolio.optim import Strategy, StrategyKind
from renyi_portfolio.risk import CovarianceKind

logger = logging.getLogger(__name__)

WORKERS_ENV = "RENYI_PORTFOLIO_WORKERS"


class StrategyConfig(BaseModel):
    """One entry of the strategy line-up."""

    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1)
    kind: StrategyKind
    alpha: float = Field(default=1.0, ge=0)
    m: Union[int, str] = "N^(1/1.5)"
    bias_correct: bool = False
    covariance: CovarianceKind = CovarianceKind.SAMPLE
    delta: Union[float, Literal["auto"]] = "auto"
    r: float = Field(default=0.05, gt=0, le=0.5)
    turnover_cap: Optional[float] = Field(default=None, gt=0)
    equity: Optional[str] = None
    bond: Optional[str] = None
    restarts: int = Field(default=3, ge=1)

    @field_validator("delta")
    @classmethod
    def _delta_in_unit_interval(cls, value):
        if value != "auto" and not 0.0 <= float(value) <= 1.0:
            raise ValueError(f"delta must be 'auto' or lie in [0, 1], got {value}")
        return value

    @field_validator("m")
    @classmethod
    def _m_is_a_rule(cls, value):
        # a trial size large enough for every sensible rule
        try:
            resolve_m(value, 1_000_000)
        except ParameterError as exc:
            raise ValueError(str(exc)) from exc
        return value

    def to_strategy(self, asset_names: Sequence[str], annualization: int = 52) -> Strategy:
        """Build the optimiser-level Strategy, resolving 60/40 column names to positions."""
        names = list(asset_names)
        equity = self._position(self.equity, names, 0)
        bond = self._position(self.bond, names, 1)
        return Strategy(
            name=self.name,
            kind=self.kind,
            alpha=self.alpha,
            m=int(self.m) if isinstance(self.m, str) and self.m.strip().isdigit() else self.m,
            bias_correct=self.bias_correct,
            covariance=self.covariance,
            delta=self.delta,
            r=self.r,
            turnover_cap=self.turnover_cap,
            equity=equity,
            bond=bond,
            restarts=self.restarts,
            annualization=annualization,
        )

    def _position(self, column: Optional[str], names: List[str], default: int) -> int:
        if column is None:
            return default
        if column not in names:
            raise ParameterError(f"Strategy {self.name}: column {column!r} not in {names}")
        return names.index(column)


def default_strategies() -> List[StrategyConfig]:
    """The main comparison line-up."""
    rule = "N^(1/1.5)"
    return [
        StrategyConfig(name="ROpt(0.5)", kind=StrategyKind.ROPT, alpha=0.5, m=rule),
        StrategyConfig(name="ROpt(0.7)", kind=StrategyKind.ROPT, alpha=0.7, m=rule),
        StrategyConfig(name="ROpt(1)", kind=StrategyKind.ROPT, alpha=1.0, m=rule),
        StrategyConfig(name="MV", kind=StrategyKind.MV),
        StrategyConfig(name="MV-shrink", kind=StrategyKind.MV, covariance=CovarianceKind.SHRINKAGE),
        StrategyConfig(name="MVaR(5%)", kind=StrategyKind.MVAR, r=0.05),
        StrategyConfig(name="MCVaR(5%)", kind=StrategyKind.MCVAR, r=0.05),
        StrategyConfig(name="EW", kind=StrategyKind.EW),
        StrategyConfig(name="60/40", kind=StrategyKind.SIXTY_FORTY),
        StrategyConfig(name="MSR", kind=StrategyKind.MSR, turnover_cap=0.075),
    ]


class RunConfig(BaseModel):
    """Everything a backtest run needs; written back as config.json next to the artifacts."""

    model_config = ConfigDict(extra="forbid")

    data_path: Optional[Path] = None
    date_column: str = "date"
    asset_columns: Optional[List[str]] = None
    estimation_window: int = Field(default=260, ge=30)
    roll: int = Field(default=26, ge=1)
    strategies: List[StrategyConfig] = Field(default_factory=default_strategies)
    output_dir: Path = Path("results")
    seed: int = 0
    annualization: int = Field(default=52, ge=1)
    tail_level: float = Field(default=0.05, gt=0, le=0.5)
    sharpe_resamples: int = Field(default=5000, ge=1)
    sharpe_block_size: int = Field(default=5, ge=1)
    sub_periods: int = Field(default=4, ge=1)
    period_breaks: List[date] = Field(default_factory=list)

    @model_validator(mode="after")
    def _unique_names(self) -> "RunConfig":
        names = [s.name for s in self.strategies]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"Strategy names must be unique; duplicated: {', '.join(duplicates)}")
        if not self.strategies:
            raise ValueError("At least one strategy is required")
        return self

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


def load_run_config(path: Optional[Union[str, Path]] = None, **overrides) -> RunConfig:
    """
    Read a RunConfig from a JSON file, then apply non-None keyword overrides.

    Raises:
        ParameterError: If the file is not valid JSON or the values fail validation.
    """
    data = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"Config file {path} is not valid JSON: {exc}") from exc
        logger.info("Loaded run configuration from %s", path)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ParameterError(f"Invalid run configuration: {exc}") from exc


def worker_count(default: int = 1) -> int:
    """Worker count from RENYI_PORTFOLIO_WORKERS (1 when unset)."""
    raw = os.getenv(WORKERS_ENV)
    if raw is None or not raw.strip():
        return default
    try:
        workers = int(raw)
    except ValueError:
        raise ParameterError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if workers < 1:
        raise ParameterError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return workers
