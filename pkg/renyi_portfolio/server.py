"""
Renyi portfolio MCP server implementation.

This module defines the FastMCP server and registers one-shot tools: entropy
estimation of a return sample, closed-form and quadrature entropies of
parametric marginals, weight optimisation on a small return matrix, and
desk-scale synthetic studies.
"""

import logging
import math
from typing import Annotated, Any, Dict, List, Optional

from fastmcp import FastMCP
from pydantic import Field

from renyi_portfolio.dists import Marginal, MarginalKind
from renyi_portfolio.dists import closed_form_entropy as closed_form
from renyi_portfolio.entropy import RenyiParams, exp_renyi_oracle, m_spacings_estimate, resolve_m
from renyi_portfolio.errors import RenyiPortfolioError
from renyi_portfolio.experiments import StudySpec, run_study as run_synthetic_study
from renyi_portfolio.optim import Strategy, StrategyKind, solve_strategy_detailed
from renyi_portfolio.risk import CovarianceKind

logger = logging.getLogger(__name__)

# studies served over MCP are capped to keep a tool call interactive
SERVED_STUDIES = ("comonotonic", "levy", "gaussian", "tail", "outliers", "small-sample", "copula")


def _error(exc: Exception, **context: Any) -> Dict[str, Any]:
    return {**context, "status": "error", "error_type": type(exc).__name__, "message": str(exc)}


def _finite(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def create_server() -> FastMCP:
    """Create and configure the Renyi portfolio MCP server."""

    server = FastMCP(
        name="RenyiPortfolio",
    )

    # ------------------------------------------------------------------
    # Tool: estimate_entropy
    # ------------------------------------------------------------------
    @server.tool()
    def estimate_entropy(
        values: Annotated[List[float], Field(description="Return sample, at least 2 values")],
        alpha: Annotated[float, Field(ge=0, description="Order of the entropy")] = 1.0,
        m: Annotated[Optional[str], Field(description="Spacing width: integer, 'N^(1/p)' or 'N^x'")] = None,
        bias_correct: bool = False,
    ) -> Dict[str, Any]:
        """
        Estimate the exponential Renyi entropy of a sample with the m-spacings estimator.

        Returns the estimate, its logarithm and the spacing width used. Invalid
        inputs give status 'error' with the reason.
        """
        logger.info("Tool: estimating entropy of %d values (alpha=%g)", len(values), alpha)
        try:
            rule = int(m) if m is not None and m.strip().isdigit() else m
            width = resolve_m(rule, len(values))
            estimate = m_spacings_estimate(values, RenyiParams(alpha, width, bias_correct))
        except RenyiPortfolioError as exc:
            logger.warning("estimate_entropy failed: %s", exc)
            return _error(exc, alpha=alpha)
        return {
            "status": "success",
            "alpha": alpha,
            "m": width,
            "observations": len(values),
            "exp_entropy": estimate,
            "log_entropy": math.log(estimate),
        }

    # ------------------------------------------------------------------
    # Tool: closed_form_entropy
    # ------------------------------------------------------------------
    @server.tool()
    def closed_form_entropy(
        kind: Annotated[str, Field(description="gaussian, student_t, skew_normal, levy, uniform, exponential or beta")],
        params: Annotated[List[float], Field(description="Family parameters, e.g. [mu, sigma] or [mu, sigma, nu]")],
        alpha: Annotated[float, Field(ge=0)] = 1.0,
    ) -> Dict[str, Any]:
        """
        Exponential Renyi entropy of a parametric marginal.

        Uses the closed form when one exists and adaptive quadrature otherwise;
        the 'method' field says which.
        """
        logger.info("Tool: entropy of %s%s at alpha=%g", kind, params, alpha)
        try:
            marginal = Marginal(MarginalKind(kind), tuple(float(p) for p in params))
            value = closed_form(marginal, alpha)
            method = "closed_form"
            if value is None:
                value = exp_renyi_oracle(marginal, alpha)
                method = "quadrature"
        except (RenyiPortfolioError, ValueError) as exc:
            logger.warning("closed_form_entropy failed: %s", exc)
            return _error(exc, kind=kind, alpha=alpha)
        return {"status": "success", "kind": kind, "alpha": alpha, "method": method, "exp_entropy": _finite(value)}

    # ------------------------------------------------------------------
    # Tool: optimize_weights
    # ------------------------------------------------------------------
    @server.tool()
    def optimize_weights(
        returns: Annotated[List[List[float]], Field(description="T x n matrix of per-period returns, T >= 30")],
        strategy: Annotated[str, Field(description="ropt, mv, mvar, mcvar, msr, ew or sixty_forty")] = "ropt",
        alpha: float = 1.0,
        m: str = "N^(1/1.5)",
        r: Annotated[float, Field(gt=0, le=0.5)] = 0.05,
        shrinkage: bool = False,
    ) -> Dict[str, Any]:
        """
        Long-only weights of one strategy fitted on a single estimation window.

        Returns the weights and the objective value reached.
        """
        logger.info("Tool: optimising %s on a %d-row window", strategy, len(returns))
        try:
            kind = StrategyKind(strategy)
            s = Strategy(
                name=kind.value,
                kind=kind,
                alpha=alpha,
                m=int(m) if m.strip().isdigit() else m,
                r=r,
                covariance=CovarianceKind.SHRINKAGE if shrinkage else CovarianceKind.SAMPLE,
                turnover_cap=None,
            )
            result = solve_strategy_detailed(s, returns)
        except (RenyiPortfolioError, ValueError) as exc:
            logger.warning("optimize_weights failed: %s", exc)
            return _error(exc, strategy=strategy)
        return {
            "status": "success",
            "strategy": strategy,
            "weights": [float(w) for w in result.weights],
            "objective": _finite(float(result.value)),
            "evaluations": result.evaluations,
        }

    # ------------------------------------------------------------------
    # Tool: run_study
    # ------------------------------------------------------------------
    @server.tool()
    def run_study(
        study: Annotated[str, Field(description=f"One of: {', '.join(SERVED_STUDIES)}")],
        seed: int = 0,
    ) -> Dict[str, Any]:
        """
        Run a synthetic study at desk scale and return its table as records.
        """
        logger.info("Tool: running study %s (seed=%d)", study, seed)
        if study not in SERVED_STUDIES:
            return {
                "study": study,
                "status": "error",
                "message": f"Study {study!r} is not served; choose one of {', '.join(SERVED_STUDIES)}",
            }
        try:
            table = run_synthetic_study(StudySpec(study, seed=seed, desk_scale=True))
        except RenyiPortfolioError as exc:
            logger.warning("run_study failed: %s", exc)
            return _error(exc, study=study)
        records = table.astype(object).where(table.notna(), None).to_dict(orient="records")
        return {"status": "success", "study": study, "rows": len(records), "table": records}

    return server
