"""
Full-scale acceptance runs

Each test drives a scenario at the scale its statistical checks are
calibrated for. Run with ``pytest -m slow``.
"""

import pytest

from libs.harness import convergence_study, run_scenario
from libs.scenarios import POSITIVE_LOCAL_TIME_FRACTION

pytestmark = pytest.mark.slow

FINE = {"n_paths": 10_000, "dt": 1e-4, "epsilon": 0.02, "seed": 0}


def _checks(report):
    return {check.name: check for check in report.checks}


def test_integral_equation_full():
    report = run_scenario("integral_equation")

    assert report.passed, report.failed_checks


def test_conversion_roundtrips_full():
    report = run_scenario("conversion_roundtrips")

    assert report.passed, report.failed_checks


@pytest.mark.parametrize("beta", [-0.5, 0.0, 0.5])
def test_skew_matches_walk(beta):
    checks = _checks(run_scenario("harrison_shepp_skew", FINE, params={"beta": beta}))

    assert checks["ks_vs_skew_walk"].passed
    assert checks["positive_probability"].passed
    assert checks["support_property"].passed


def test_skew_local_time_ratio():
    checks = _checks(run_scenario("harrison_shepp_skew", FINE, params={"beta": 0.5}))

    assert checks["local_time_ratio"].statistic <= 0.10


@pytest.mark.parametrize("name", ["reflect_one_sided", "reflect_right_half"])
def test_reflection_matches_reflected_bm(name):
    report = run_scenario(name, FINE)

    assert report.passed, report.failed_checks


def test_reflected_left_local_time_halves():
    table = convergence_study(
        "reflect_one_sided", [1e-3, 1e-4], [0.1, 0.02], {"n_paths": 1000}
    )
    coarse, fine = (row["l_minus_mean"] for row in table.rows)

    assert fine <= 0.5 * coarse * (1.0 + 1e-9)


@pytest.mark.parametrize("name", ["absorb", "no_solution", "chitashvili"])
def test_boundary_scenarios(name):
    report = run_scenario(name, FINE)

    assert report.passed, report.failed_checks


def test_two_sided_reflection_full():
    report = run_scenario("two_sided_reflection", FINE)

    assert report.passed, report.failed_checks
    checks = _checks(report)
    for side in ("low", "high"):
        reached = report.summary[f"reached_fraction_{side}"]
        assert checks[f"local_time_positive_{side}"].statistic >= POSITIVE_LOCAL_TIME_FRACTION
        assert report.summary[f"positive_fraction_{side}"] >= POSITIVE_LOCAL_TIME_FRACTION * reached
        assert reached >= 0.5


def test_driftless_full():
    report = run_scenario("driftless", {**FINE, "n_paths": 1000})

    assert report.passed, report.failed_checks


def test_conversion_equivalence_full():
    report = run_scenario("conversion_equivalence", FINE)

    assert report.passed, report.failed_checks


def test_tanaka_residual_refinement():
    table = convergence_study(
        "harrison_shepp_skew", [1e-3, 1e-4], [0.1, 0.02], {"n_paths": 1000}
    )
    coarse, fine = (row["residual_mean"] for row in table.rows)

    assert coarse / fine >= 1.67


def test_tanaka_residual_column_decreases():
    table = convergence_study(
        "harrison_shepp_skew",
        [1e-2, 1e-3, 1e-4],
        [0.2, 0.1, 0.02],
        {"n_paths": 1000},
        params={"walk_steps": 1000},
    )

    assert table.monotone["residual_mean"]
