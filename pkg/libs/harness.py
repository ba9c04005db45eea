"""
Scenario harness.

Runs registered scenarios into Reports and builds refinement tables. The
configuration echo of every report holds everything needed to reproduce it:
scenario parameters, Monte Carlo parameters and the simulated SDE.
"""

from __future__ import annotations

import logging
import time
from typing import Any, Dict, List, Optional, Sequence

from pydantic import BaseModel, Field

from libs.config_schema import MonteCarloParams, config_echo
from libs.errors import InvalidParameter
from libs.reports import Report
from libs.scenarios import ScenarioContext, get_scenario

logger = logging.getLogger(__name__)

MonteCarloOverrides = Dict[str, Any]


def _context(
    name: str,
    overrides: Optional[MonteCarloOverrides],
    params: Optional[Dict[str, float]],
    base: Optional[MonteCarloParams],
):
    scenario = get_scenario(name)
    mc = (base or MonteCarloParams()).with_overrides(**(overrides or {}))
    return scenario, ScenarioContext(mc=mc, params=scenario.resolve_params(params))


def _config(scenario, ctx: ScenarioContext) -> Dict[str, Any]:
    config: Dict[str, Any] = {
        "scenario": scenario.name,
        "params": dict(ctx.params),
        "monte_carlo": config_echo(ctx.mc),
    }
    sde = scenario.sde_config(ctx.params)
    if sde is not None:
        config["sde"] = config_echo(sde)
    return config


def run_scenario(
    name: str,
    overrides: Optional[MonteCarloOverrides] = None,
    params: Optional[Dict[str, float]] = None,
    base: Optional[MonteCarloParams] = None,
) -> Report:
    """
    Run a registered scenario and evaluate its checks.

    Args:
        name: Registered scenario name
        overrides: Monte Carlo fields to override (None values are ignored)
        params: Scenario parameters to override
        base: Monte Carlo parameters the overrides apply to (defaults otherwise)

    Returns:
        Report; report.passed is False iff some check failed

    Raises:
        UnknownScenario: name is not registered
        InvalidParameter: unknown or out-of-range scenario parameter
        pydantic.ValidationError: invalid Monte Carlo override
    """
    scenario, ctx = _context(name, overrides, params, base)
    logger.info(
        f"Running scenario {name}",
        extra={"scenario": name, "seed": ctx.mc.seed, "n_paths": ctx.mc.n_paths},
    )
    start = time.perf_counter()
    outcome = scenario.run(ctx)
    runtime = time.perf_counter() - start

    report = Report(
        scenario=name,
        seed=ctx.mc.seed,
        config=_config(scenario, ctx),
        checks=outcome.checks,
        summary=outcome.summary,
        runtime_s=runtime,
    )
    for check in report.checks:
        logger.info(
            f"Check {check.name}: {'pass' if check.passed else 'FAIL'}",
            extra={"scenario": name, "statistic": check.statistic, "tolerance": check.tolerance},
        )
    logger.info(
        f"Scenario {name} completed with status: {overall_status(report)}",
        extra={"scenario": name, "runtime_s": round(runtime, 3)},
    )
    return report


def overall_status(report: Report) -> str:
    return "pass" if report.passed else "fail"


class ConvergenceTable(BaseModel):
    """Refinement table: one row per (dt, epsilon) pair."""

    scenario: str
    config: Dict[str, Any] = Field(default_factory=dict)
    rows: List[Dict[str, Optional[float]]] = Field(default_factory=list)
    monotone: Dict[str, bool] = Field(
        default_factory=dict,
        description="Per column: strictly decreasing down the table",
    )


def _check_descending(name: str, values: Sequence[float]) -> None:
    if not values:
        raise InvalidParameter(name, list(values), "must be nonempty")
    if any(nxt >= prev for prev, nxt in zip(values, values[1:])):
        raise InvalidParameter(name, list(values), "must be sorted strictly descending")


def _strictly_decreasing(column: List[Optional[float]]) -> Optional[bool]:
    if any(v is None for v in column):
        return None
    return all(nxt < prev for prev, nxt in zip(column, column[1:]))


def convergence_study(
    name: str,
    dt_list: Sequence[float],
    eps_list: Sequence[float],
    overrides: Optional[MonteCarloOverrides] = None,
    params: Optional[Dict[str, float]] = None,
    base: Optional[MonteCarloParams] = None,
) -> ConvergenceTable:
    """
    Run a scenario's refinement row for each (dt, epsilon) pair.

    dt_list and eps_list are paired elementwise; a single epsilon is used
    for every dt.

    Raises:
        InvalidParameter: lists empty, not descending, of mismatched length,
            or the scenario has no convergence study
    """
    dt_list = [float(v) for v in dt_list]
    eps_list = [float(v) for v in eps_list]
    _check_descending("dt_list", dt_list)
    if len(eps_list) == 1:
        eps_list = eps_list * len(dt_list)
    else:
        _check_descending("eps_list", eps_list)
    if len(eps_list) != len(dt_list):
        raise InvalidParameter("eps_list", eps_list, "must match dt_list in length")

    scenario, ctx = _context(name, overrides, params, base)
    rows: List[Dict[str, Optional[float]]] = []
    for dt, eps in zip(dt_list, eps_list):
        step = ScenarioContext(
            mc=ctx.mc.with_overrides(dt=dt, epsilon=eps), params=ctx.params
        )
        logger.info(
            f"Convergence row for {name}",
            extra={"scenario": name, "dt": dt, "epsilon": eps},
        )
        rows.append({"dt": dt, "epsilon": eps, **scenario.convergence_row(step)})

    columns = [k for k in rows[0] if k not in ("dt", "epsilon")]
    monotone = {}
    for column in columns:
        flag = _strictly_decreasing([row[column] for row in rows])
        if flag is not None:
            monotone[column] = flag
    config = _config(scenario, ctx)
    config["dt_list"] = dt_list
    config["eps_list"] = eps_list
    return ConvergenceTable(scenario=name, config=config, rows=rows, monotone=monotone)
