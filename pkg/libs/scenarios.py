"""
Scenario Registry

Named, reproducible experiments. A scenario bundles an SDE (or a purely
deterministic computation), its oracles and the checks that decide pass or
fail. Monte Carlo scenarios stream path batches through a per-path reducer,
so memory stays bounded by one batch whatever n_paths is.

Scenarios are registered once in the global ``scenario_registry``; the
harness looks them up by name.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional

import numpy as np

from libs.classify import (
    PointClass,
    classify_weight,
    convert_measure,
    convert_weight,
    relabel_class,
    vanishing_local_times,
)
from libs.config_schema import (
    CoefficientConfig,
    CoefficientKind,
    MeasureConfig,
    MonteCarloParams,
    SdeConfig,
)
from libs.errors import (
    ConversionUndefined,
    InvalidParameter,
    NoSolutionAtStart,
    UnknownScenario,
)
from libs.loctime import (
    MeanComparison,
    check_support_property,
    convention_consistency,
    estimate_local_time,
    jump_identity_from_terminal,
    local_time_ratio_from_terminal,
    occupation_density,
    sticky_identity_from_terminal,
    tanaka_residual,
    terminal_local_times,
    time_at_level,
    time_at_rest,
)
from libs.measure import Convention, DriftMeasure, dirac
from libs.reports import CheckResult
from libs.rng import ORACLE_STREAM, SDE_STREAM, SECOND_ORACLE_STREAM, RngStream
from libs.simulate import (
    Path,
    SdeSpec,
    StatusKind,
    plan_simulation,
    simulate_paths,
    simulate_reflected_bms,
    simulate_skew_walks,
    simulate_sticky_bms,
)
from libs.statistics import (
    KsResult,
    expected_abs_normal,
    ks_against_cdf,
    ks_against_normal,
    ks_two_sample,
    mean_with_stderr,
    pooled_stderr,
    reflected_bm_cdf,
)
from libs.transform import (
    default_probe_grid,
    residual_of_integral_equation,
    solve_g,
    solve_g_fixed_point,
)

logger = logging.getLogger(__name__)

# Integral-equation tolerances
ATOMS_ONLY_TOLERANCE = 1e-12
WITH_DENSITY_TOLERANCE = 1e-8
FIXED_POINT_TOLERANCE = 1e-6
ROUND_TRIP_TOLERANCE = 1e-12

CONVERSION_TOLERANCE = 1e-12
EXACT_TOLERANCE = 1e-12
TANAKA_DRIFTLESS_TOLERANCE = 1e-10
OCCUPATION_TOLERANCE = 0.25
POSITIVE_LOCAL_TIME_FRACTION = 0.99
STDERR_MULTIPLIER = 3.0

# Weight ranges inside the strict atom condition; keeps g within a few
# orders of magnitude for five atoms.
WEIGHT_RANGES = {
    Convention.RIGHT: (-0.75, 0.3),
    Convention.LEFT: (-0.3, 0.75),
    Convention.SYMMETRIC: (-0.43, 0.43),
}


@dataclass
class ScenarioContext:
    """Resolved Monte Carlo parameters and scenario parameters of one run."""

    mc: MonteCarloParams
    params: Dict[str, float]

    @property
    def qv_mode(self) -> str:
        return self.mc.qv_mode.value

    def simulate(self, spec: SdeSpec, stream: int = SDE_STREAM):
        mc = self.mc
        return simulate_paths(
            spec,
            mc.t_end,
            mc.dt,
            mc.seed,
            mc.n_paths,
            mc.x_max,
            batch_size=mc.batch_size,
            workers=mc.workers,
            one_way_crossing=mc.one_way_crossing,
            stream=stream,
        )


@dataclass
class ScenarioOutcome:
    checks: List[CheckResult] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)


@dataclass
class Ensemble:
    """Per-path reductions of a simulated ensemble, one column per quantity."""

    columns: Dict[str, np.ndarray]
    status_counts: Dict[str, int]

    def __getitem__(self, key: str) -> np.ndarray:
        return self.columns[key]

    def __len__(self) -> int:
        return sum(self.status_counts.values())


def reduce_ensemble(
    batches: Iterable[List[Path]], reducer: Callable[[Path], Dict[str, float]]
) -> Ensemble:
    columns: Dict[str, list] = {}
    counts: Dict[str, int] = {}
    for batch in batches:
        for path in batch:
            kind = path.status.kind.value
            counts[kind] = counts.get(kind, 0) + 1
            for key, value in reducer(path).items():
                columns.setdefault(key, []).append(value)
    return Ensemble(
        columns={k: np.asarray(v, dtype=float) for k, v in columns.items()},
        status_counts=dict(sorted(counts.items())),
    )


def terminal_values(batches: Iterable[List[Path]]) -> np.ndarray:
    return reduce_ensemble(batches, lambda path: {"x": path.terminal})["x"]


# --- check builders -------------------------------------------------------


def at_most(name: str, statistic: float, tolerance: float, detail: str = "") -> CheckResult:
    statistic = float(statistic)
    return CheckResult(
        name=name,
        statistic=statistic,
        tolerance=float(tolerance),
        passed=bool(np.isfinite(statistic) and statistic <= tolerance),
        detail=detail,
    )


def at_least(name: str, statistic: float, tolerance: float, detail: str = "") -> CheckResult:
    statistic = float(statistic)
    return CheckResult(
        name=name,
        statistic=statistic,
        tolerance=float(tolerance),
        passed=bool(np.isfinite(statistic) and statistic >= tolerance),
        detail=detail,
    )


def holds(name: str, condition: bool, detail: str = "") -> CheckResult:
    return CheckResult(name=name, passed=bool(condition), detail=detail)


def ks_check(name: str, result: KsResult, detail: str = "") -> CheckResult:
    if result.critical is not None and not detail:
        detail = f"critical distance {result.critical:.4g}"
    return CheckResult(
        name=name,
        statistic=result.statistic,
        tolerance=result.alpha,
        pvalue=result.pvalue,
        passed=result.passed,
        detail=detail,
    )


def comparison_check(
    name: str, comparison: MeanComparison, relative_tolerance: Optional[float]
) -> CheckResult:
    """
    Relative gap of two means when relative_tolerance is given, otherwise
    the absolute gap against three pooled standard errors.
    """
    if relative_tolerance is not None:
        return at_most(
            name,
            comparison.relative_gap,
            relative_tolerance,
            f"lhs={comparison.lhs:.6g} rhs={comparison.rhs:.6g}",
        )
    bound = STDERR_MULTIPLIER * pooled_stderr(comparison.lhs_stderr, comparison.rhs_stderr)
    return at_most(
        name,
        comparison.gap,
        bound,
        f"lhs={comparison.lhs:.6g} rhs={comparison.rhs:.6g}, 3 pooled standard errors",
    )


def identity_check(
    name: str, comparison: MeanComparison, relative_tolerance: float
) -> CheckResult:
    """Gap of two means within relative_tolerance·|rhs| plus three pooled standard errors."""
    noise = STDERR_MULTIPLIER * pooled_stderr(comparison.lhs_stderr, comparison.rhs_stderr)
    return at_most(
        name,
        comparison.gap,
        relative_tolerance * abs(comparison.rhs) + noise,
        f"lhs={comparison.lhs:.6g} rhs={comparison.rhs:.6g}",
    )


# --- per-path helpers -----------------------------------------------------


def _terminal_at(path: Path, y: float, epsilon: float, qv_mode: str) -> Dict[Convention, float]:
    return {
        conv: float(values[0])
        for conv, values in terminal_local_times([path], y, epsilon, qv_mode).items()
    }


def _support_holds(path: Path, levels: Iterable[float], epsilon: float, qv_mode: str) -> bool:
    return all(
        check_support_property(
            estimate_local_time(path, y, conv, epsilon, qv_mode), path
        )
        for y in levels
        for conv in Convention
    )


def _outside_levels(path: Path, epsilon: float) -> tuple:
    """One level above and one below the range of the path, beyond one window."""
    return (
        float(np.max(path.values)) + 1.0 + epsilon,
        float(np.min(path.values)) - 1.0 - epsilon,
    )


def _constant_b(value: float = 1.0) -> CoefficientConfig:
    return CoefficientConfig(kind=CoefficientKind.CONSTANT, value=value)


def _sde(
    nu: DriftMeasure,
    convention: Convention,
    x0: float = 0.0,
    b: Optional[CoefficientConfig] = None,
) -> SdeConfig:
    return SdeConfig(
        b=b or _constant_b(),
        nu=MeasureConfig.from_measure(nu),
        convention=convention,
        x0=x0,
    )


class Scenario(ABC):
    """
    Base class for named scenarios.

    Subclasses set name, description and default_params (floats, overridable
    with --set) and implement run(). Monte Carlo scenarios that support a
    refinement study also implement convergence_row().
    """

    name: str = ""
    description: str = ""
    default_params: Dict[str, float] = {}
    monte_carlo: bool = True

    def resolve_params(self, overrides: Optional[Dict[str, float]] = None) -> Dict[str, float]:
        params = dict(self.default_params)
        for key, value in (overrides or {}).items():
            if key not in params:
                raise InvalidParameter(
                    key, value, f"not a parameter of {self.name}; known: {sorted(params)}"
                )
            params[key] = float(value)
        self.validate_params(params)
        return params

    def validate_params(self, params: Dict[str, float]) -> None:
        pass

    def sde_config(self, params: Dict[str, float]) -> Optional[SdeConfig]:
        """The simulated SDE, echoed in the report header."""
        return None

    def spec(self, params: Dict[str, float]) -> SdeSpec:
        return self.sde_config(params).to_spec()

    @abstractmethod
    def run(self, ctx: ScenarioContext) -> ScenarioOutcome:
        """Execute the scenario and evaluate its checks."""
        pass

    def convergence_row(self, ctx: ScenarioContext) -> Dict[str, Optional[float]]:
        raise InvalidParameter("scenario", self.name, "has no convergence study")


def _require_count(params: Dict[str, float], key: str) -> None:
    value = params[key]
    if value < 1 or value != int(value):
        raise InvalidParameter(key, value, "must be a positive integer")


# --- deterministic scenarios ----------------------------------------------


class IntegralEquationScenario(Scenario):
    name = "integral_equation"
    description = (
        "Closed-form g against the integral equation for random measures, "
        "cross-checked by the fixed-point solver"
    )
    default_params = {"n_measures": 50.0, "max_atoms": 5.0}
    monte_carlo = False

    def validate_params(self, params):
        _require_count(params, "n_measures")
        _require_count(params, "max_atoms")

    @staticmethod
    def _random_atoms(gen: np.random.Generator, conv: Convention, max_atoms: int) -> DriftMeasure:
        n_atoms = int(gen.integers(1, max_atoms + 1))
        low, high = WEIGHT_RANGES[conv]
        locations = gen.uniform(-5.0, 5.0, n_atoms)
        weights = gen.uniform(low, high, n_atoms)
        return DriftMeasure(atoms=tuple(zip(locations.tolist(), weights.tolist())))

    @staticmethod
    def _random_piece(gen: np.random.Generator) -> tuple:
        left = float(gen.uniform(-5.0, 4.5))
        width = float(gen.uniform(0.1, 1.0))
        return (left, left + width, float(gen.uniform(-1.0, 1.0)))

    def _fixed_point_measures(self, conv: Convention) -> List[DriftMeasure]:
        weight = 0.5 if conv == Convention.SYMMETRIC else 0.25
        return [
            dirac(0.5, weight),
            dirac(-0.5, weight),
            DriftMeasure(density=((0.0, 1.0, 0.5),)),
            DriftMeasure(density=((-1.0, 0.0, -0.5),)),
            DriftMeasure(atoms=((0.5, weight), (-0.75, -weight / 2)), density=((-1.0, 1.0, 0.3),)),
        ]

    def run(self, ctx):
        gen = RngStream(ctx.mc.seed, 0).generator()
        n_measures = int(ctx.params["n_measures"])
        max_atoms = int(ctx.params["max_atoms"])
        dense = np.linspace(-10.0, 10.0, 10001)
        fp_grid = np.linspace(-2.0, 2.0, 8001)
        outcome = ScenarioOutcome()

        for conv in Convention:
            atoms_worst = density_worst = round_trip = 0.0
            min_g = np.inf
            monotone = True
            for _ in range(n_measures):
                nu = self._random_atoms(gen, conv, max_atoms)
                gt = solve_g(nu, conv)
                atoms_worst = max(atoms_worst, residual_of_integral_equation(gt, default_probe_grid(gt)))

                with_density = DriftMeasure(atoms=nu.atoms, density=(self._random_piece(gen),))
                gt = solve_g(with_density, conv)
                density_worst = max(
                    density_worst,
                    residual_of_integral_equation(gt, default_probe_grid(gt, n=201)),
                )
                min_g = min(min_g, float(np.min(gt.g(dense))), float(np.min(gt.g_minus(dense))))
                G = gt.G(dense)
                monotone = monotone and bool(np.all(np.diff(G) > 0))
                back = gt.G_inverse(G)
                round_trip = max(
                    round_trip,
                    float(np.max(np.abs(back - dense) / np.maximum(1.0, np.abs(dense)))),
                )

            fp_worst = 0.0
            for nu in self._fixed_point_measures(conv):
                gt = solve_g(nu, conv)
                x, g, gl = solve_g_fixed_point(nu, conv, fp_grid)
                fp_worst = max(
                    fp_worst,
                    float(np.max(np.abs(g - gt.g(x)))),
                    float(np.max(np.abs(gl - gt.g_minus(x)))),
                )

            tag = conv.value
            outcome.checks += [
                at_most(f"residual_atoms_{tag}", atoms_worst, ATOMS_ONLY_TOLERANCE),
                at_most(f"residual_density_{tag}", density_worst, WITH_DENSITY_TOLERANCE),
                at_most(f"fixed_point_{tag}", fp_worst, FIXED_POINT_TOLERANCE),
                at_least(f"g_positive_{tag}", min_g, np.nextafter(0.0, 1.0)),
                holds(f"G_increasing_{tag}", monotone),
                at_most(f"G_round_trip_{tag}", round_trip, ROUND_TRIP_TOLERANCE),
            ]
            outcome.summary[f"max_residual_atoms_{tag}"] = atoms_worst
            outcome.summary[f"max_residual_density_{tag}"] = density_worst

        outcome.summary["measures_per_convention"] = n_measures
        return outcome


class ConversionRoundTripsScenario(Scenario):
    name = "conversion_roundtrips"
    description = "Atom-weight conversions between conventions: round trips, classes, exclusions"
    default_params = {"n_weights": 1000.0}
    monte_carlo = False

    PAIRS = (
        (Convention.RIGHT, Convention.SYMMETRIC),
        (Convention.SYMMETRIC, Convention.RIGHT),
        (Convention.RIGHT, Convention.LEFT),
        (Convention.LEFT, Convention.RIGHT),
        (Convention.LEFT, Convention.SYMMETRIC),
        (Convention.SYMMETRIC, Convention.LEFT),
    )
    BOUNDARY_WEIGHTS = (-1.0, -0.5, 0.0, 0.5, 1.0)
    EXCLUDED = (
        (Convention.SYMMETRIC, Convention.RIGHT, -1.0),
        (Convention.RIGHT, Convention.LEFT, 0.5),
        (Convention.LEFT, Convention.RIGHT, -0.5),
        (Convention.SYMMETRIC, Convention.LEFT, 1.0),
    )

    def validate_params(self, params):
        _require_count(params, "n_weights")

    def run(self, ctx):
        gen = RngStream(ctx.mc.seed, 0).generator()
        n_weights = int(ctx.params["n_weights"])
        outcome = ScenarioOutcome()

        for source, target in self.PAIRS:
            weights = np.concatenate([gen.uniform(-5.0, 5.0, n_weights), self.BOUNDARY_WEIGHTS])
            worst = 0.0
            mismatches = 0
            round_trips = 0
            for a in weights.tolist():
                try:
                    forward = convert_weight(a, source, target)
                except ConversionUndefined:
                    continue
                for b_at in (0.0, 1.0):
                    expected = relabel_class(classify_weight(a, source, b_at), source, target)
                    if classify_weight(forward, target, b_at) != expected:
                        mismatches += 1
                # Round trips are only identities off the strictly violating set.
                if classify_weight(a, source, 1.0) == PointClass.NO_SOLUTION_IF_REACHED:
                    continue
                try:
                    back = convert_weight(forward, target, source)
                except ConversionUndefined:
                    worst = np.inf
                    continue
                worst = max(worst, abs(back - a))
                round_trips += 1

            tag = f"{source.value}_to_{target.value}"
            outcome.checks += [
                at_most(f"round_trip_{tag}", worst, CONVERSION_TOLERANCE),
                at_most(f"class_preserved_{tag}", mismatches, 0.0),
            ]
            outcome.summary[f"round_trips_{tag}"] = round_trips

        for source, target, weight in self.EXCLUDED:
            try:
                convert_weight(weight, source, target)
                raised = False
            except ConversionUndefined:
                raised = True
            outcome.checks.append(
                holds(
                    f"excluded_{source.value}_to_{target.value}",
                    raised,
                    f"weight {weight} must raise ConversionUndefined",
                )
            )

        nu = DriftMeasure(atoms=((0.0, 0.2),), density=((0.0, 1.0, 0.3),))
        kept = all(convert_measure(nu, s, t).density == nu.density for s, t in self.PAIRS)
        outcome.checks.append(holds("density_unchanged", kept))
        return outcome


class ClassificationTableScenario(Scenario):
    name = "classification_table"
    description = "The canonical point classes of every convention, plus forced-zero local times"
    monte_carlo = False

    # (convention, weight, b at the point, expected class)
    CASES = (
        (Convention.RIGHT, 0.0, 1.0, PointClass.REGULAR),
        (Convention.RIGHT, 0.5, 1.0, PointClass.REFLECTING_UP),
        (Convention.RIGHT, 0.75, 0.0, PointClass.ABSORBING),
        (Convention.RIGHT, 0.75, 1.0, PointClass.NO_SOLUTION_IF_REACHED),
        (Convention.LEFT, 0.0, 1.0, PointClass.REGULAR),
        (Convention.LEFT, -0.5, 1.0, PointClass.REFLECTING_DOWN),
        (Convention.LEFT, -0.75, 0.0, PointClass.ABSORBING),
        (Convention.LEFT, -0.75, 1.0, PointClass.NO_SOLUTION_IF_REACHED),
        (Convention.SYMMETRIC, 0.0, 1.0, PointClass.REGULAR),
        (Convention.SYMMETRIC, 1.0, 1.0, PointClass.REFLECTING_UP),
        (Convention.SYMMETRIC, -1.0, 1.0, PointClass.REFLECTING_DOWN),
        (Convention.SYMMETRIC, 2.0, 0.0, PointClass.ABSORBING),
        (Convention.SYMMETRIC, 2.0, 1.0, PointClass.NO_SOLUTION_IF_REACHED),
    )

    def run(self, ctx):
        outcome = ScenarioOutcome()
        matched = 0
        for conv, weight, b_at, expected in self.CASES:
            got = classify_weight(weight, conv, b_at)
            matched += got == expected
            outcome.checks.append(
                holds(
                    f"{conv.value}_{weight:g}_b{b_at:g}",
                    got == expected,
                    f"expected {expected.value}, got {got.value}",
                )
            )
            if got.is_reflecting:
                minus_zero, plus_zero = vanishing_local_times(weight, conv)
                expected_zero = (
                    (True, False) if got == PointClass.REFLECTING_UP else (False, True)
                )
                outcome.checks.append(
                    holds(
                        f"{conv.value}_{weight:g}_vanishing_side",
                        (minus_zero, plus_zero) == expected_zero,
                    )
                )
        outcome.summary["cases"] = len(self.CASES)
        outcome.summary["matched"] = int(matched)
        return outcome


# --- Monte Carlo scenarios --------------------------------------------------


class DriftlessScenario(Scenario):
    name = "driftless"
    description = "Zero drift measure: Brownian motion, exact Tanaka residual, estimator agreement"
    default_params = {"x0": 0.0}

    def sde_config(self, params):
        return _sde(DriftMeasure.zero(), Convention.SYMMETRIC, x0=params["x0"])

    def _collect(self, ctx: ScenarioContext) -> Ensemble:
        spec = self.spec(ctx.params)
        eps = ctx.mc.epsilon
        x0 = spec.x0

        def reducer(path: Path) -> Dict[str, float]:
            return {
                "terminal": path.terminal,
                "residual": float(np.max(np.abs(tanaka_residual(path, spec, eps)))),
                "consistency": convention_consistency(path, x0, eps, ctx.qv_mode),
                "support": float(_support_holds(path, _outside_levels(path, eps), eps, ctx.qv_mode)),
                "local_time": _terminal_at(path, x0, eps, ctx.qv_mode)[Convention.SYMMETRIC],
                "occupation": occupation_density(path, x0, eps / 2.0),
            }

        return reduce_ensemble(ctx.simulate(spec), reducer)

    def run(self, ctx):
        ens = self._collect(ctx)
        mc = ctx.mc
        x0 = ctx.params["x0"]
        scale = float(np.sqrt(mc.t_end))
        mean, _ = mean_with_stderr(ens["terminal"])
        local_time, _ = mean_with_stderr(ens["local_time"])
        occupation, _ = mean_with_stderr(ens["occupation"])
        return ScenarioOutcome(
            checks=[
                at_most(
                    "terminal_mean",
                    abs(mean - x0),
                    STDERR_MULTIPLIER * scale / np.sqrt(len(ens)),
                ),
                ks_check("ks_vs_normal", ks_against_normal(ens["terminal"], x0, scale)),
                at_most("tanaka_residual", np.max(ens["residual"]), TANAKA_DRIFTLESS_TOLERANCE),
                at_most("convention_consistency", np.max(ens["consistency"]), EXACT_TOLERANCE),
                holds("support_property", bool(np.all(ens["support"] == 1.0))),
                at_most(
                    "occupation_vs_local_time",
                    abs(local_time - occupation) / occupation if occupation else np.inf,
                    OCCUPATION_TOLERANCE,
                ),
            ],
            summary={
                "terminal_mean": mean,
                "local_time_mean": local_time,
                "occupation_density_mean": occupation,
                "status_counts": ens.status_counts,
            },
        )

    def convergence_row(self, ctx):
        ens = self._collect(ctx)
        scale = float(np.sqrt(ctx.mc.t_end))
        return {
            "residual_mean": float(np.mean(ens["residual"])),
            "ratio_gap": None,
            "ks_statistic": ks_against_normal(ens["terminal"], ctx.params["x0"], scale).statistic,
        }


class HarrisonSheppSkewScenario(Scenario):
    name = "harrison_shepp_skew"
    description = "Skew Brownian motion from beta·δ0 (symmetric local time) against the skew walk"
    default_params = {"beta": 0.5, "walk_steps": 10000.0, "ratio_tolerance": 0.10}

    def validate_params(self, params):
        if not abs(params["beta"]) < 1.0:
            raise InvalidParameter("beta", params["beta"], "|beta| must be < 1")
        _require_count(params, "walk_steps")

    def sde_config(self, params):
        return _sde(dirac(0.0, params["beta"]), Convention.SYMMETRIC)

    def _collect(self, ctx: ScenarioContext) -> Ensemble:
        spec = self.spec(ctx.params)
        eps = ctx.mc.epsilon

        def reducer(path: Path) -> Dict[str, float]:
            local = _terminal_at(path, 0.0, eps, ctx.qv_mode)
            return {
                "terminal": path.terminal,
                "l_plus": local[Convention.RIGHT],
                "l_minus": local[Convention.LEFT],
                "l_symmetric": local[Convention.SYMMETRIC],
                "residual": abs(float(tanaka_residual(path, spec, eps)[-1])),
                "consistency": convention_consistency(path, 0.0, eps, ctx.qv_mode),
                "support": float(
                    _support_holds(path, (0.0, *_outside_levels(path, eps)), eps, ctx.qv_mode)
                ),
            }

        return reduce_ensemble(ctx.simulate(spec), reducer)

    def _walk_terminals(self, ctx: ScenarioContext) -> np.ndarray:
        mc = ctx.mc
        return terminal_values(
            simulate_skew_walks(
                ctx.params["beta"],
                int(ctx.params["walk_steps"]),
                mc.seed,
                mc.n_paths,
                stream=ORACLE_STREAM,
                t_end=mc.t_end,
                batch_size=mc.batch_size,
            )
        )

    def _ratio_tolerance(self, beta: float, params) -> Optional[float]:
        return None if beta == 0.0 else params["ratio_tolerance"]

    def run(self, ctx):
        beta = ctx.params["beta"]
        ens = self._collect(ctx)
        walk = self._walk_terminals(ctx)
        n = len(ens)
        p_expected = 0.5 * (1.0 + beta)
        p_positive = float(np.mean(ens["terminal"] > 0.0))
        terminal = {
            Convention.RIGHT: ens["l_plus"],
            Convention.LEFT: ens["l_minus"],
            Convention.SYMMETRIC: ens["l_symmetric"],
        }
        ratio = local_time_ratio_from_terminal(
            ens["l_plus"], ens["l_minus"], beta, Convention.SYMMETRIC
        )
        jump = jump_identity_from_terminal(terminal, beta, Convention.SYMMETRIC)
        tolerance = self._ratio_tolerance(beta, ctx.params)

        checks = [
            ks_check("ks_vs_skew_walk", ks_two_sample(ens["terminal"], walk)),
            at_most(
                "positive_probability",
                abs(p_positive - p_expected),
                STDERR_MULTIPLIER * np.sqrt(p_expected * (1.0 - p_expected) / n),
                f"P(X > 0) = {p_positive:.4f}, expected {p_expected:.4f}",
            ),
            comparison_check("local_time_ratio", ratio, tolerance),
            comparison_check("local_time_jump", jump, tolerance),
            at_most("convention_consistency", np.max(ens["consistency"]), EXACT_TOLERANCE),
            holds("support_property", bool(np.all(ens["support"] == 1.0))),
        ]
        if beta == 0.0:
            checks.append(
                ks_check(
                    "ks_vs_normal",
                    ks_against_normal(ens["terminal"], 0.0, float(np.sqrt(ctx.mc.t_end))),
                )
            )
        return ScenarioOutcome(
            checks=checks,
            summary={
                "positive_probability": p_positive,
                "l_plus_mean": float(np.mean(ens["l_plus"])),
                "l_minus_mean": float(np.mean(ens["l_minus"])),
                "l_symmetric_mean": float(np.mean(ens["l_symmetric"])),
                "tanaka_residual_mean": float(np.mean(ens["residual"])),
                "status_counts": ens.status_counts,
            },
        )

    def convergence_row(self, ctx):
        ens = self._collect(ctx)
        ratio = local_time_ratio_from_terminal(
            ens["l_plus"], ens["l_minus"], ctx.params["beta"], Convention.SYMMETRIC
        )
        return {
            "residual_mean": float(np.mean(ens["residual"])),
            "ratio_gap": ratio.relative_gap if ctx.params["beta"] != 0.0 else ratio.gap,
            "ks_statistic": ks_two_sample(ens["terminal"], self._walk_terminals(ctx)).statistic,
        }


class ReflectScenario(Scenario):
    """Reflection at 0 from an atom on the reflecting boundary of its convention."""

    default_params: Dict[str, float] = {}

    def __init__(self, name: str, description: str, nu: DriftMeasure, convention: Convention):
        self.name = name
        self.description = description
        self.nu = nu
        self.convention = convention

    def sde_config(self, params):
        return _sde(self.nu, self.convention)

    def _collect(self, ctx: ScenarioContext) -> Ensemble:
        spec = self.spec(ctx.params)
        eps = ctx.mc.epsilon

        def reducer(path: Path) -> Dict[str, float]:
            local = _terminal_at(path, 0.0, eps, ctx.qv_mode)
            return {
                "terminal": path.terminal,
                "min": float(np.min(path.values)),
                "l_plus": local[Convention.RIGHT],
                "l_minus": local[Convention.LEFT],
                "support": float(
                    _support_holds(path, (-0.5, *_outside_levels(path, eps)), eps, ctx.qv_mode)
                ),
            }

        return reduce_ensemble(ctx.simulate(spec), reducer)

    def _oracle(self, ctx: ScenarioContext) -> np.ndarray:
        mc = ctx.mc
        return terminal_values(
            simulate_reflected_bms(
                mc.t_end, mc.dt, mc.seed, mc.n_paths, ORACLE_STREAM, mc.batch_size
            )
        )

    def run(self, ctx):
        mc = ctx.mc
        ens = self._collect(ctx)
        mean, stderr = mean_with_stderr(ens["terminal"])
        expected = expected_abs_normal() * float(np.sqrt(mc.t_end))
        # Only the start step sits on the atom; its window mass is b(0)²·dt.
        b0 = float(self.spec(ctx.params).b(0.0))
        start_mass = b0 * b0 * mc.dt / mc.epsilon
        return ScenarioOutcome(
            checks=[
                at_least("min_value", np.min(ens["min"]), 0.0),
                ks_check("ks_vs_reflected_bm", ks_two_sample(ens["terminal"], self._oracle(ctx))),
                at_most("terminal_mean", abs(mean - expected), STDERR_MULTIPLIER * stderr),
                at_most(
                    "l_minus_vanishing",
                    np.max(ens["l_minus"]),
                    start_mass * (1.0 + 1e-9),
                    "left local time reduced to the start-step contribution",
                ),
                holds("support_property", bool(np.all(ens["support"] == 1.0))),
            ],
            summary={
                "terminal_mean": mean,
                "l_plus_mean": float(np.mean(ens["l_plus"])),
                "l_minus_mean": float(np.mean(ens["l_minus"])),
                "status_counts": ens.status_counts,
            },
        )

    def convergence_row(self, ctx):
        ens = self._collect(ctx)
        return {
            "l_minus_mean": float(np.mean(ens["l_minus"])),
            "ks_statistic": ks_two_sample(ens["terminal"], self._oracle(ctx)).statistic,
        }


class AbsorbScenario(Scenario):
    name = "absorb"
    description = "Strictly violating atom with b = 0 at the start: absorbed constant paths"
    default_params = {"weight": 0.75}

    def validate_params(self, params):
        if not params["weight"] > 0.5:
            raise InvalidParameter("weight", params["weight"], "must be > 0.5")

    def sde_config(self, params):
        b = CoefficientConfig(kind=CoefficientKind.VANISHING_AT, points=[0.0])
        return _sde(dirac(0.0, params["weight"]), Convention.RIGHT, b=b)

    def run(self, ctx):
        spec = self.spec(ctx.params)
        eps = ctx.mc.epsilon

        def reducer(path: Path) -> Dict[str, float]:
            local = _terminal_at(path, 0.0, eps, ctx.qv_mode)
            return {
                "constant": float(np.all(path.values == spec.x0)),
                "qv": float(np.max(path.qv_increments, initial=0.0)),
                "residual": float(np.max(np.abs(tanaka_residual(path, spec, eps)))),
                "absorbed": float(path.status.kind == StatusKind.ABSORBED),
                "local_time": max(local.values()),
            }

        ens = reduce_ensemble(ctx.simulate(spec), reducer)
        return ScenarioOutcome(
            checks=[
                holds("constant_paths", bool(np.all(ens["constant"] == 1.0))),
                at_most("quadratic_variation", np.max(ens["qv"]), 0.0),
                holds("absorbed_status", bool(np.all(ens["absorbed"] == 1.0))),
                at_most("tanaka_residual", np.max(ens["residual"]), 0.0),
                at_most("local_times", np.max(ens["local_time"]), 0.0),
            ],
            summary={"status_counts": ens.status_counts},
        )


class NoSolutionScenario(Scenario):
    name = "no_solution"
    description = "Strictly violating atom with b != 0: refused at the point, truncated on reaching it"
    default_params = {"weight": 0.75, "x0": 1.0, "min_reached_fraction": 0.01}

    def validate_params(self, params):
        if not params["weight"] > 0.5:
            raise InvalidParameter("weight", params["weight"], "must be > 0.5")
        if not params["x0"] > 0.0:
            raise InvalidParameter("x0", params["x0"], "must be > 0")

    def sde_config(self, params):
        return _sde(dirac(0.0, params["weight"]), Convention.RIGHT, x0=params["x0"])

    def run(self, ctx):
        spec = self.spec(ctx.params)
        at_point = _sde(dirac(0.0, ctx.params["weight"]), Convention.RIGHT).to_spec()
        try:
            plan_simulation(at_point)
            refused = False
        except NoSolutionAtStart:
            refused = True

        def reducer(path: Path) -> Dict[str, float]:
            hit = path.status.kind == StatusKind.NO_SOLUTION_HIT
            return {
                "hit": float(hit),
                "ends_at_point": float(not hit or path.values[-1] == 0.0),
                "min": float(np.min(path.values)),
            }

        ens = reduce_ensemble(ctx.simulate(spec), reducer)
        reached = float(np.mean(ens["hit"]))
        return ScenarioOutcome(
            checks=[
                holds("refused", refused, "no solution started at the atom"),
                at_least("reached_fraction", reached, ctx.params["min_reached_fraction"]),
                holds("truncated_at_point", bool(np.all(ens["ends_at_point"] == 1.0))),
                at_least("min_value", np.min(ens["min"]), 0.0),
            ],
            summary={"reached_fraction": reached, "status_counts": ens.status_counts},
        )


class TwoSidedReflectionScenario(Scenario):
    name = "two_sided_reflection"
    description = "δ_r1 - δ_r2 with symmetric local time keeps paths in [r1, r2]"
    default_params = {"r1": 0.0, "r2": 1.0, "x0": 0.5}

    def validate_params(self, params):
        if not params["r1"] < params["x0"] < params["r2"]:
            raise InvalidParameter("x0", params["x0"], "must lie strictly between r1 and r2")

    def sde_config(self, params):
        nu = DriftMeasure(atoms=((params["r1"], 1.0), (params["r2"], -1.0)))
        return _sde(nu, Convention.SYMMETRIC, x0=params["x0"])

    def run(self, ctx):
        spec = self.spec(ctx.params)
        r1, r2 = ctx.params["r1"], ctx.params["r2"]
        eps = ctx.mc.epsilon

        def reducer(path: Path) -> Dict[str, float]:
            grid = path.values[:-1]
            return {
                "min": float(np.min(path.values)),
                "max": float(np.max(path.values)),
                "l_low": _terminal_at(path, r1, eps, ctx.qv_mode)[Convention.SYMMETRIC],
                "l_high": _terminal_at(path, r2, eps, ctx.qv_mode)[Convention.SYMMETRIC],
                "near_low": float(np.min(grid) < r1 + eps),
                "near_high": float(np.max(grid) > r2 - eps),
            }

        ens = reduce_ensemble(ctx.simulate(spec), reducer)
        checks = [
            at_least("min_value", np.min(ens["min"]) - r1, 0.0, f"paths stay above r1 = {r1}"),
            at_most("max_value", np.max(ens["max"]) - r2, 0.0, f"paths stay below r2 = {r2}"),
        ]
        summary: Dict[str, Any] = {"status_counts": ens.status_counts}
        for side in ("low", "high"):
            positive = ens[f"l_{side}"] > 0.0
            near = ens[f"near_{side}"] == 1.0
            fraction = float(np.mean(positive[near])) if near.any() else 1.0
            checks.append(
                at_least(
                    f"local_time_positive_{side}",
                    fraction,
                    POSITIVE_LOCAL_TIME_FRACTION,
                    "among paths whose range meets the boundary window",
                )
            )
            summary[f"positive_fraction_{side}"] = float(np.mean(positive))
            summary[f"reached_fraction_{side}"] = float(np.mean(near))
        return ScenarioOutcome(checks=checks, summary=summary)


class ChitashviliScenario(Scenario):
    """
    b = 1 on (0, ∞) with ½δ0 under right local time. The scheme gives the
    instantly reflected solution: nonnegative, no left local time at 0 and
    the law of |x0 + W|. Sticky solutions of the same equation, held at 0
    with drift a there, come from a clock change of the reflected walk and
    must satisfy ½·L₊(t, 0) = a·(time at 0).
    """

    name = "chitashvili"
    description = (
        "b = 1 on (0, inf), ½δ0 with right local time: reflected law, "
        "sticky paths and the time-at-0 identity"
    )
    default_params = {
        "x0": 0.5,
        "stickiness": 1.0,
        "substeps": 4.0,
        "identity_tolerance": 0.1,
    }

    def validate_params(self, params):
        if not params["x0"] > 0.0:
            raise InvalidParameter("x0", params["x0"], "must be > 0")
        if not params["stickiness"] > 0.0:
            raise InvalidParameter("stickiness", params["stickiness"], "must be > 0")
        _require_count(params, "substeps")
        if not params["identity_tolerance"] > 0.0:
            raise InvalidParameter(
                "identity_tolerance", params["identity_tolerance"], "must be > 0"
            )

    def sde_config(self, params):
        b = CoefficientConfig(kind=CoefficientKind.INDICATOR_POSITIVE)
        return _sde(dirac(0.0, 0.5), Convention.RIGHT, x0=params["x0"], b=b)

    def _sticky(self, ctx: ScenarioContext) -> Ensemble:
        mc = ctx.mc

        def reducer(path: Path) -> Dict[str, float]:
            return {
                "min": float(np.min(path.values)),
                "l_plus": _terminal_at(path, 0.0, mc.epsilon, ctx.qv_mode)[Convention.RIGHT],
                "held": time_at_rest(path),
                "held_on_grid": time_at_level(path, 0.0),
            }

        batches = simulate_sticky_bms(
            ctx.params["stickiness"],
            ctx.params["x0"],
            mc.t_end,
            mc.dt,
            mc.seed,
            mc.n_paths,
            substeps=int(ctx.params["substeps"]),
            batch_size=mc.batch_size,
        )
        return reduce_ensemble(batches, reducer)

    def run(self, ctx):
        mc = ctx.mc
        stickiness = ctx.params["stickiness"]
        tolerance = ctx.params["identity_tolerance"]

        def reducer(path: Path) -> Dict[str, float]:
            return {
                "terminal": path.terminal,
                "min": float(np.min(path.values)),
                "l_minus": _terminal_at(path, 0.0, mc.epsilon, ctx.qv_mode)[Convention.LEFT],
            }

        scheme = reduce_ensemble(ctx.simulate(self.spec(ctx.params)), reducer)
        sticky = self._sticky(ctx)
        identity = sticky_identity_from_terminal(sticky["l_plus"], sticky["held"], stickiness)
        on_grid = MeanComparison.from_samples(sticky["held_on_grid"], sticky["held"])
        law = reflected_bm_cdf(ctx.params["x0"], mc.t_end)
        return ScenarioOutcome(
            checks=[
                at_least("min_value", np.min(scheme["min"]), 0.0),
                at_most("l_minus_vanishing", np.max(scheme["l_minus"]), 0.0),
                ks_check("ks_vs_reflected_law", ks_against_cdf(scheme["terminal"], law)),
                at_least("sticky_min_value", np.min(sticky["min"]), 0.0),
                identity_check("time_at_zero_identity", identity, tolerance),
                identity_check("time_at_zero_on_grid", on_grid, tolerance),
            ],
            summary={
                "half_l_plus_mean": identity.lhs,
                "stickiness_time_at_zero_mean": identity.rhs,
                "time_at_zero_mean": float(np.mean(sticky["held"])),
                "status_counts": scheme.status_counts,
            },
        )


class ConversionEquivalenceScenario(Scenario):
    name = "conversion_equivalence"
    description = "One SDE written with right, symmetric and left local time: same transform, same law"
    default_params = {"weight": 0.25}

    def validate_params(self, params):
        if not params["weight"] < 0.5:
            raise InvalidParameter("weight", params["weight"], "must be < 0.5")

    def sde_config(self, params):
        return _sde(dirac(0.0, params["weight"]), Convention.RIGHT)

    def run(self, ctx):
        right = self.spec(ctx.params)
        variants = {
            conv: SdeSpec(
                b=right.b,
                nu=convert_measure(right.nu, Convention.RIGHT, conv),
                convention=conv,
                x0=right.x0,
            )
            for conv in (Convention.SYMMETRIC, Convention.LEFT)
        }

        grid = np.linspace(-3.0, 3.0, 6001)
        reference = solve_g(right.nu, Convention.RIGHT)
        agreement = 0.0
        for conv, spec in variants.items():
            gt = solve_g(spec.nu, conv)
            agreement = max(
                agreement,
                float(np.max(np.abs(gt.g(grid) - reference.g(grid)))),
                float(np.max(np.abs(gt.g_minus(grid) - reference.g_minus(grid)))),
                float(np.max(np.abs(gt.G(grid) - reference.G(grid)))),
            )

        base = terminal_values(ctx.simulate(right, SDE_STREAM))
        streams = {Convention.SYMMETRIC: ORACLE_STREAM, Convention.LEFT: SECOND_ORACLE_STREAM}
        checks = [at_most("transform_agreement", agreement, EXACT_TOLERANCE)]
        summary: Dict[str, Any] = {}
        for conv, spec in variants.items():
            other = terminal_values(ctx.simulate(spec, streams[conv]))
            checks.append(ks_check(f"ks_right_vs_{conv.value}", ks_two_sample(base, other)))
            summary[f"{conv.value}_weight"] = float(spec.nu.weights[0])
        return ScenarioOutcome(checks=checks, summary=summary)


class ScenarioRegistry:
    """Registry of named scenarios, in registration order."""

    def __init__(self):
        self._scenarios: Dict[str, Scenario] = {}

    def register(self, scenario: Scenario) -> None:
        if scenario.name in self._scenarios:
            raise ValueError(f"Scenario {scenario.name} is already registered")
        self._scenarios[scenario.name] = scenario

    def get(self, name: str) -> Scenario:
        try:
            return self._scenarios[name]
        except KeyError:
            raise UnknownScenario(name, self.names()) from None

    def names(self) -> List[str]:
        return list(self._scenarios)

    def list_scenarios(self) -> Dict[str, str]:
        return {name: s.description for name, s in self._scenarios.items()}


# Global registry instance
scenario_registry = ScenarioRegistry()

for _scenario in (
    IntegralEquationScenario(),
    ConversionRoundTripsScenario(),
    ClassificationTableScenario(),
    DriftlessScenario(),
    HarrisonSheppSkewScenario(),
    ReflectScenario(
        "reflect_one_sided",
        "δ0 with symmetric local time: reflection at 0 against |W|",
        dirac(0.0, 1.0),
        Convention.SYMMETRIC,
    ),
    ReflectScenario(
        "reflect_right_half",
        "½δ0 with right local time: reflection at 0 against |W|",
        dirac(0.0, 0.5),
        Convention.RIGHT,
    ),
    AbsorbScenario(),
    NoSolutionScenario(),
    TwoSidedReflectionScenario(),
    ChitashviliScenario(),
    ConversionEquivalenceScenario(),
):
    scenario_registry.register(_scenario)


def get_scenario(name: str) -> Scenario:
    """
    Look up a registered scenario.

    Raises:
        UnknownScenario: name is not registered
    """
    return scenario_registry.get(name)
