"""
Command-line entry point.

Subcommands: classify, convert, transform, simulate, estimate-loctime,
scenario, convergence and list-scenarios. Tables go to stdout, or to
<out>/<name>.<format> when --out is given; every table starts with the
configuration that produced it. Three commands always print to stdout:
convert prints the converted SDE config, simulate its JSON summary and
transform its residual maximum (in the table header, or on a line of its
own when the table goes to a file).

Exit codes: 0 success, 1 a scenario check failed, 2 invalid configuration
or a domain error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path as FilePath
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from libs.classify import (
    PointClass,
    classify_measure,
    classify_point,
    convert_measure,
    local_time_relation,
    vanishing_local_times,
)
from libs.config_schema import (
    MeasureConfig,
    MonteCarloParams,
    QvMode,
    RunConfig,
    SdeConfig,
    config_echo,
    load_config,
)
from libs.errors import ConfigurationError, GeneralizedDriftError, InvalidParameter
from libs.harness import convergence_study, run_scenario
from libs.loctime import estimate_local_time
from libs.logging_config import configure_logging
from libs.measure import Convention, atom_weight
from libs.reports import OutputFormat, dump_json, render_table, write_report, write_text
from libs.scenarios import scenario_registry
from libs.simulate import CrossingPolicy, EnsembleSummary, Path, StatusKind, simulate_paths
from libs.transform import (
    default_probe_grid,
    residual_of_integral_equation,
    solve_g,
    transform_table,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_CONFIG_ERROR = 2

# The residual is evaluated on at least this span, widened to the requested grid
RESIDUAL_SPAN = (-10.0, 10.0)

# CLI flag destination -> MonteCarloParams field
MC_FLAGS = {
    "seed": "seed",
    "n_paths": "n_paths",
    "dt": "dt",
    "eps": "epsilon",
    "t_end": "t_end",
    "x_max": "x_max",
    "workers": "workers",
    "batch_size": "batch_size",
    "one_way_crossing": "one_way_crossing",
    "qv_mode": "qv_mode",
}


def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--out", type=FilePath, default=None, help="Output directory")
    parser.add_argument(
        "--format",
        choices=[f.value for f in OutputFormat],
        default=OutputFormat.CSV.value,
        help="Output format (default: csv)",
    )
    parser.add_argument("--log-level", default=None, help="Log level (default: LOG_LEVEL or INFO)")
    parser.add_argument("--log-format", choices=["text", "json"], default=None)
    return parser


def _monte_carlo_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--seed", type=int, default=None, help="Master seed")
    parser.add_argument("--n-paths", type=int, default=None, help="Number of paths")
    parser.add_argument("--dt", type=float, default=None, help="Time step")
    parser.add_argument("--eps", type=float, default=None, help="Local-time window width")
    parser.add_argument("--t-end", type=float, default=None, help="Time horizon")
    parser.add_argument("--x-max", type=float, default=None, help="Explosion threshold")
    parser.add_argument("--workers", type=int, default=None, help="Worker processes")
    parser.add_argument("--batch-size", type=int, default=None, help="Paths per batch")
    parser.add_argument(
        "--one-way-crossing",
        choices=[p.value for p in CrossingPolicy],
        default=None,
        help="Reflecting point reached from its far side: redispatch or refuse",
    )
    parser.add_argument(
        "--qv-mode",
        choices=[m.value for m in QvMode],
        default=None,
        help="Quadratic-variation source for local-time estimates",
    )
    return parser


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    monte_carlo = _monte_carlo_parser()
    parser = argparse.ArgumentParser(
        prog="gdrift", description="SDEs with generalized drift: transforms, simulation, checks"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="Classify the atoms of a measure")
    p.add_argument("--config", type=FilePath, required=True, help="SDE config (JSON)")
    p.add_argument(
        "--points", default=None, help="Comma-separated points to classify (default: the atoms)"
    )

    p = sub.add_parser("convert", parents=[common], help="Rewrite an SDE config for another convention")
    p.add_argument("--config", type=FilePath, required=True, help="SDE config (JSON)")
    p.add_argument("--to", required=True, choices=[c.value for c in Convention])

    p = sub.add_parser("transform", parents=[common], help="Tabulate g, G and σ on a grid")
    p.add_argument("--config", type=FilePath, required=True, help="SDE config (JSON)")
    p.add_argument("--grid-min", type=float, default=-3.0)
    p.add_argument("--grid-max", type=float, default=3.0)
    p.add_argument("--grid-n", type=int, default=61)

    p = sub.add_parser("simulate", parents=[common, monte_carlo], help="Simulate an ensemble")
    p.add_argument("--config", type=FilePath, required=True, help="Run config (JSON)")
    p.add_argument(
        "--write-paths", action="store_true", help="Also write every path point by point"
    )

    p = sub.add_parser(
        "estimate-loctime", parents=[common], help="Local-time estimate from a path CSV"
    )
    p.add_argument("--paths", type=FilePath, required=True, help="Path CSV from simulate")
    p.add_argument("--path-index", type=int, default=0)
    p.add_argument("--y", type=float, required=True, help="Level")
    p.add_argument("--convention", required=True, choices=[c.value for c in Convention])
    p.add_argument("--eps", type=float, required=True, help="Window width")
    p.add_argument("--qv-mode", choices=[m.value for m in QvMode], default=QvMode.MODEL.value)

    for name, help_text in (
        ("scenario", "Run a named scenario"),
        ("convergence", "Refinement study of a named scenario"),
    ):
        p = sub.add_parser(name, parents=[common, monte_carlo], help=help_text)
        p.add_argument("name", help="Scenario name (see list-scenarios)")
        p.add_argument("--config", type=FilePath, default=None, help="Monte Carlo config (JSON)")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Scenario parameter (repeatable)",
        )
        if name == "convergence":
            p.add_argument("--dt-list", required=True, help="Comma-separated, descending")
            p.add_argument("--eps-list", required=True, help="Comma-separated, descending")

    sub.add_parser("list-scenarios", parents=[common], help="List registered scenarios")
    return parser


def mc_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {field: getattr(args, flag, None) for flag, field in MC_FLAGS.items()}


def parse_assignments(items: Sequence[str]) -> Dict[str, float]:
    params: Dict[str, float] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise InvalidParameter("--set", item, "expected KEY=VALUE")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise InvalidParameter(key, value, "must be a number") from None
    return params


def parse_float_list(name: str, text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidParameter(name, text, "expected comma-separated numbers") from None


def emit(
    name: str,
    rows: Sequence[Dict[str, Any]],
    config: Dict[str, Any],
    args: argparse.Namespace,
) -> None:
    fmt = OutputFormat(args.format)
    text = render_table(rows, config, fmt)
    if args.out is None:
        sys.stdout.write(text)
    else:
        write_text(FilePath(args.out) / f"{name}.{fmt.value}", text)


def _classify_row(
    location: float, weight: float, point_class: PointClass, conv: Convention
) -> Dict[str, Any]:
    relation = local_time_relation(weight, conv)
    minus_zero, plus_zero = vanishing_local_times(weight, conv)
    return {
        "at": location,
        "weight": weight,
        "class": point_class.value,
        "c_plus": relation.c_plus,
        "c_minus": relation.c_minus,
        "l_minus_zero": minus_zero,
        "l_plus_zero": plus_zero,
    }


def cmd_classify(args) -> int:
    sde = load_config(args.config, SdeConfig)
    spec = sde.to_spec()
    config: Dict[str, Any] = {"sde": config_echo(sde)}
    if args.points is None:
        rows = [
            _classify_row(p.location, p.weight, p.point_class, spec.convention)
            for p in classify_measure(spec.nu, spec.convention, spec.b)
        ]
    else:
        points = parse_float_list("--points", args.points)
        config["points"] = points
        rows = [
            _classify_row(
                x,
                atom_weight(spec.nu, x),
                classify_point(spec.nu, spec.convention, x, spec.b.at(x)),
                spec.convention,
            )
            for x in points
        ]
    emit("classify", rows, config, args)
    return EXIT_OK


def cmd_convert(args) -> int:
    """Print the converted SDE config; with --out also write it and the weight table."""
    sde = load_config(args.config, SdeConfig)
    target = Convention(args.to)
    original = sde.nu.to_measure()
    converted = convert_measure(original, sde.convention, target)
    converted_sde = sde.model_copy(
        update={"nu": MeasureConfig.from_measure(converted), "convention": target}
    )
    text = dump_json(config_echo(converted_sde))
    sys.stdout.write(text)
    if args.out is not None:
        write_text(FilePath(args.out) / "converted.json", text)
        rows = [
            {"at": old.location, "weight": old.weight, "converted_weight": new.weight}
            for old, new in zip(original.atoms, converted.atoms)
        ]
        emit("convert", rows, {"sde": config_echo(sde), "target": target.value}, args)
    return EXIT_OK


def cmd_transform(args) -> int:
    if args.grid_n < 2 or not args.grid_min < args.grid_max:
        raise InvalidParameter(
            "grid", (args.grid_min, args.grid_max, args.grid_n), "need min < max, n >= 2"
        )
    sde = load_config(args.config, SdeConfig)
    spec = sde.to_spec()
    gt = solve_g(spec.nu, spec.convention)
    grid = np.linspace(args.grid_min, args.grid_max, args.grid_n)
    low, high = RESIDUAL_SPAN
    points = default_probe_grid(gt, min(low, args.grid_min), max(high, args.grid_max))
    residual = residual_of_integral_equation(gt, points)
    logger.info("Integral-equation residual", extra={"residual_max": residual})
    config = {
        "sde": config_echo(sde),
        "grid": [args.grid_min, args.grid_max, args.grid_n],
        "total_variation": spec.nu.total_variation(args.grid_min, args.grid_max),
        "residual_max": residual,
    }
    emit("transform", transform_table(gt, grid, spec.b), config, args)
    if args.out is not None:
        sys.stdout.write(f"residual_max {residual!r}\n")
    return EXIT_OK


def _path_rows(path: Path) -> List[Dict[str, Any]]:
    dB = np.concatenate([[0.0], path.brownian_increments])
    qv = np.concatenate([[0.0], path.qv_increments])
    return [
        {
            "path_index": path.path_index,
            "t": float(t),
            "x": float(x),
            "brownian_increment": float(db),
            "qv_increment": float(q),
        }
        for t, x, db, q in zip(path.times, path.values, dB, qv)
    ]


def cmd_simulate(args) -> int:
    """
    Print the JSON ensemble summary. With --out, also write one row per path
    (simulate.<format>), the summary (simulate_summary.json) and, with
    --write-paths, every path point by point (simulate_paths.<format>).
    """
    if args.write_paths and args.out is None:
        raise InvalidParameter("--write-paths", True, "needs --out")
    run = load_config(args.config, RunConfig)
    mc = run.monte_carlo.with_overrides(**mc_overrides(args))
    spec = run.sde.to_spec()
    path_summaries = []
    path_rows: List[Dict[str, Any]] = []
    terminals: List[float] = []
    kinds: List[StatusKind] = []
    for batch in simulate_paths(
        spec,
        mc.t_end,
        mc.dt,
        mc.seed,
        mc.n_paths,
        mc.x_max,
        batch_size=mc.batch_size,
        workers=mc.workers,
        one_way_crossing=mc.one_way_crossing,
    ):
        for path in batch:
            terminals.append(path.terminal)
            kinds.append(path.status.kind)
            path_summaries.append(
                {
                    "path_index": path.path_index,
                    "status": path.status.kind.value,
                    "steps": path.n_steps,
                    "terminal": path.terminal,
                    "min": float(np.min(path.values)),
                    "max": float(np.max(path.values)),
                    "events": ";".join(f"{e.kind}@{e.step}" for e in path.events),
                }
            )
            if args.write_paths:
                path_rows.extend(_path_rows(path))
    config = {"sde": config_echo(run.sde), "monte_carlo": config_echo(mc)}
    summary = EnsembleSummary.from_outcomes(terminals, kinds)
    logger.info("Simulation done", extra={"status_counts": summary.status_counts})
    text = dump_json({"config": config, **summary.to_dict()})
    sys.stdout.write(text)
    if args.out is not None:
        write_text(FilePath(args.out) / "simulate_summary.json", text)
        emit("simulate", path_summaries, config, args)
        if args.write_paths:
            emit("simulate_paths", path_rows, config, args)
    return EXIT_OK


def read_path_csv(path: FilePath, path_index: int) -> Path:
    """
    Load one path from the long-format CSV written by `simulate --write-paths`.

    Raises:
        ConfigurationError: the file cannot be read or lacks a required column
        InvalidParameter: the requested path is missing
    """
    try:
        text = FilePath(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"Cannot read path file {path}: {exc}") from exc
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    reader = csv.DictReader(lines)
    missing = {"path_index", "t", "x"} - set(reader.fieldnames or ())
    if missing:
        raise ConfigurationError(f"Path file {path} lacks columns {sorted(missing)}")
    try:
        rows = [r for r in reader if int(r["path_index"]) == path_index]
        t = np.array([float(r["t"]) for r in rows])
        values = np.array([float(r["x"]) for r in rows])
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"Path file {path} has a malformed entry: {exc}") from exc
    if len(rows) < 2:
        raise InvalidParameter("path_index", path_index, f"needs at least two points in {path}")

    def column(name: str) -> np.ndarray:
        if name not in rows[0] or rows[0][name] in (None, ""):
            return np.empty(0)
        return np.array([float(r[name]) for r in rows[1:]])

    return Path(
        dt=float(t[1] - t[0]),
        values=values,
        brownian_increments=column("brownian_increment"),
        qv_increments=column("qv_increment"),
        path_index=path_index,
    )


def cmd_estimate_loctime(args) -> int:
    path = read_path_csv(args.paths, args.path_index)
    estimate = estimate_local_time(
        path, args.y, Convention(args.convention), args.eps, args.qv_mode
    )
    rows = [{"t": float(t), "L": float(v)} for t, v in zip(estimate.times, estimate.values)]
    config = {
        "paths": str(args.paths),
        "path_index": args.path_index,
        "y": args.y,
        "convention": args.convention,
        "epsilon": args.eps,
        "qv_mode": args.qv_mode,
    }
    emit("loctime", rows, config, args)
    return EXIT_OK


def _base_params(args) -> Optional[MonteCarloParams]:
    if args.config is None:
        return None
    return load_config(args.config, MonteCarloParams)


def cmd_scenario(args) -> int:
    report = run_scenario(
        args.name,
        overrides=mc_overrides(args),
        params=parse_assignments(args.set),
        base=_base_params(args),
    )
    fmt = OutputFormat(args.format)
    if args.out is None:
        sys.stdout.write(report.to_json() if fmt == OutputFormat.JSON else report.to_csv())
    else:
        write_report(report, args.out, fmt)
    if not report.passed:
        logger.warning(
            f"Scenario {report.scenario} failed checks: {', '.join(report.failed_checks)}"
        )
        return EXIT_CHECKS_FAILED
    return EXIT_OK


def cmd_convergence(args) -> int:
    table = convergence_study(
        args.name,
        parse_float_list("--dt-list", args.dt_list),
        parse_float_list("--eps-list", args.eps_list),
        overrides=mc_overrides(args),
        params=parse_assignments(args.set),
        base=_base_params(args),
    )
    config = {**table.config, "monotone": table.monotone}
    emit(f"{args.name}_convergence", table.rows, config, args)
    return EXIT_OK


def cmd_list_scenarios(args) -> int:
    rows = [
        {"name": name, "description": description}
        for name, description in scenario_registry.list_scenarios().items()
    ]
    emit("scenarios", rows, {}, args)
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "convert": cmd_convert,
    "transform": cmd_transform,
    "simulate": cmd_simulate,
    "estimate-loctime": cmd_estimate_loctime,
    "scenario": cmd_scenario,
    "convergence": cmd_convergence,
    "list-scenarios": cmd_list_scenarios,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the gdrift command."""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, args.log_format)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as e:
        print(f"error: invalid configuration\n{e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except GeneralizedDriftError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
