"""
Tests for pathwise local-time estimation

Small hand-built paths pin down the window conventions exactly; simulated
paths check the Tanaka decomposition and the identities between conventions.
"""

import numpy as np
import pytest

from libs.coefficient import PiecewiseCoefficient
from libs.errors import InsufficientPathData, InvalidParameter
from libs.loctime import (
    MeanComparison,
    check_support_property,
    convention_consistency,
    eq6_check,
    estimate_local_time,
    jump_identity_from_terminal,
    lemma1_ratio_check,
    local_time_ratio_from_terminal,
    occupation_density,
    tanaka_residual,
    terminal_local_times,
    time_at_level,
    time_at_rest,
    window_weights,
)
from libs.measure import Convention, DriftMeasure, dirac
from libs.rng import RngStream
from libs.simulate import Path, SdeSpec, collect_paths, simulate_path, simulate_paths

CONSTANT = PiecewiseCoefficient.constant()


@pytest.fixture
def small_path():
    """Five grid points with dt = 0.1 and unit quadratic-variation rate."""
    return Path(
        dt=0.1,
        values=np.array([0.0, 0.05, 0.15, -0.05, 0.0]),
        brownian_increments=np.array([0.05, 0.1, -0.2, 0.05]),
        qv_increments=np.full(4, 0.1),
    )


class TestEstimator:
    """Window conventions on a hand-built path."""

    @pytest.mark.parametrize(
        "conv, expected",
        [
            (Convention.RIGHT, [0.0, 1.0, 2.0, 2.0, 2.0]),
            (Convention.LEFT, [0.0, 1.0, 1.0, 1.0, 2.0]),
            (Convention.SYMMETRIC, [0.0, 0.5, 1.0, 1.0, 1.5]),
        ],
    )
    def test_windows(self, small_path, conv, expected):
        estimate = estimate_local_time(small_path, 0.0, conv, 0.1)

        np.testing.assert_allclose(estimate.values, expected)
        assert estimate.terminal == pytest.approx(expected[-1])
        np.testing.assert_allclose(estimate.times, [0.0, 0.1, 0.2, 0.3, 0.4])

    def test_window_weights_halve_symmetric(self):
        x = np.array([-0.2, -0.05, 0.0, 0.05, 0.2])

        np.testing.assert_array_equal(
            window_weights(x, 0.0, Convention.SYMMETRIC, 0.1), [0.0, 0.5, 0.5, 0.5, 0.0]
        )

    def test_squared_mode_uses_path_increments(self, small_path):
        estimate = estimate_local_time(small_path, 0.0, Convention.RIGHT, 0.1, "squared")

        expected = (0.05**2 + 0.1**2) / 0.1
        assert estimate.terminal == pytest.approx(expected)

    def test_terminal_local_times_matches_estimates(self, small_path):
        terminal = terminal_local_times([small_path, small_path], 0.0, 0.1)

        assert set(terminal) == set(Convention)
        for conv in Convention:
            expected = estimate_local_time(small_path, 0.0, conv, 0.1).terminal
            np.testing.assert_allclose(terminal[conv], [expected, expected])

    def test_convention_consistency_is_exact(self, small_path):
        assert convention_consistency(small_path, 0.0, 0.1) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("epsilon", [0.0, -0.1])
    def test_invalid_epsilon(self, small_path, epsilon):
        with pytest.raises(InvalidParameter):
            estimate_local_time(small_path, 0.0, Convention.RIGHT, epsilon)

    def test_unknown_qv_mode(self, small_path):
        with pytest.raises(InvalidParameter):
            estimate_local_time(small_path, 0.0, Convention.RIGHT, 0.1, "bogus")

    def test_missing_qv_increments(self, small_path):
        small_path.qv_increments = np.zeros(2)

        with pytest.raises(InsufficientPathData):
            estimate_local_time(small_path, 0.0, Convention.RIGHT, 0.1)

    def test_occupation_and_level_time(self, small_path):
        assert occupation_density(small_path, 0.0, 0.05) == pytest.approx(1.0)
        assert time_at_level(small_path, 0.0) == pytest.approx(0.1)
        assert time_at_level(small_path, 0.15) == pytest.approx(0.1)
        assert time_at_level(small_path, 0.2) == 0.0

    def test_time_at_rest(self, small_path):
        """Test that a unit-rate path is never at rest and a frozen step is."""
        assert time_at_rest(small_path) == pytest.approx(0.0, abs=1e-15)

        small_path.qv_increments = np.array([0.1, 0.0, 0.1, 0.05])
        assert time_at_rest(small_path) == pytest.approx(0.15)


class TestSupport:
    """Estimates vanish away from the range of the path."""

    def test_far_level_is_zero(self, small_path):
        for conv in Convention:
            estimate = estimate_local_time(small_path, 5.0, conv, 0.1)
            assert np.all(estimate.values == 0.0)
            assert check_support_property(estimate, small_path)

    def test_violation_detected(self, small_path):
        estimate = estimate_local_time(small_path, 5.0, Convention.RIGHT, 0.1)
        corrupted = type(estimate)(
            y=estimate.y,
            epsilon=estimate.epsilon,
            convention=estimate.convention,
            values=estimate.values + 1.0,
            dt=estimate.dt,
        )

        assert not check_support_property(corrupted, small_path)

    def test_simulated_paths_respect_support(self):
        spec = SdeSpec(b=CONSTANT, nu=dirac(0.0, 0.3), convention=Convention.RIGHT, x0=0.0)
        path = simulate_path(spec, 1.0, 1e-3, RngStream(4, 0), x_max=1e6)

        for y in (path.values.max() + 1.0, path.values.min() - 1.0):
            for conv in Convention:
                estimate = estimate_local_time(path, y, conv, 0.1)
                assert check_support_property(estimate, path)
                assert np.all(np.diff(estimate.values) >= 0.0)


class TestTanaka:
    """Residual of the Tanaka-type decomposition."""

    def test_driftless_residual_is_round_off(self):
        spec = SdeSpec(b=CONSTANT, nu=DriftMeasure.zero(), convention=Convention.RIGHT, x0=0.2)
        path = simulate_path(spec, 1.0, 1e-3, RngStream(6, 0), x_max=1e6)

        assert np.max(np.abs(tanaka_residual(path, spec, 0.1))) <= 1e-10

    def test_absorbed_start_residual_is_zero(self):
        spec = SdeSpec(
            b=PiecewiseCoefficient.vanishing_at([0.0]),
            nu=dirac(0.0, 0.75),
            convention=Convention.RIGHT,
            x0=0.0,
        )
        path = simulate_path(spec, 1.0, 1e-2, RngStream(6, 0), x_max=10.0)

        assert np.all(tanaka_residual(path, spec, 0.1) == 0.0)

    def test_density_residual_is_small(self):
        spec = SdeSpec(
            b=CONSTANT,
            nu=DriftMeasure(density=((-0.5, 0.5, 0.4),)),
            convention=Convention.SYMMETRIC,
            x0=0.0,
        )
        path = simulate_path(spec, 1.0, 1e-4, RngStream(6, 1), x_max=1e6)

        assert np.max(np.abs(tanaka_residual(path, spec, 0.05))) < 0.2

    def test_requires_brownian_increments(self, small_path):
        spec = SdeSpec(b=CONSTANT, nu=DriftMeasure.zero(), convention=Convention.RIGHT, x0=0.0)
        small_path.brownian_increments = np.zeros(1)

        with pytest.raises(InsufficientPathData):
            tanaka_residual(small_path, spec, 0.1)


class TestIdentities:
    """Ratio and jump identities from terminal local times."""

    def test_ratio_from_terminal(self):
        comparison = local_time_ratio_from_terminal(
            np.array([2.0]), np.array([1.0]), 1.0 / 3.0, Convention.SYMMETRIC
        )

        assert comparison.lhs == pytest.approx(4.0 / 3.0)
        assert comparison.rhs == pytest.approx(4.0 / 3.0)
        assert comparison.gap == pytest.approx(0.0, abs=1e-15)

    def test_jump_identity_from_terminal(self):
        terminal = {
            Convention.RIGHT: np.array([3.0, 1.0]),
            Convention.LEFT: np.array([1.0, 1.0]),
            Convention.SYMMETRIC: np.array([2.0, 1.0]),
        }

        comparison = jump_identity_from_terminal(terminal, 0.5, Convention.SYMMETRIC)

        assert comparison.lhs == pytest.approx(1.0)
        assert comparison.rhs == pytest.approx(1.5)
        assert comparison.relative_gap == pytest.approx(1.0 / 3.0)

    def test_relative_gap_with_zero_rhs(self):
        assert MeanComparison(1.0, 0.0, 0.0, 0.0).relative_gap == float("inf")

    def test_checks_on_simulated_paths(self):
        spec = SdeSpec(b=CONSTANT, nu=dirac(0.0, 0.25), convention=Convention.RIGHT, x0=0.0)
        paths = collect_paths(simulate_paths(spec, 1.0, 1e-3, 2, 40, 1e6))

        ratio = lemma1_ratio_check(paths, 0.0, 0.25, Convention.RIGHT, 0.1)
        jump = eq6_check(paths, 0.0, 0.25, 0.1, Convention.RIGHT)

        assert np.isfinite(ratio.lhs) and np.isfinite(ratio.rhs)
        assert ratio.lhs_stderr > 0.0
        assert np.isfinite(jump.gap)
