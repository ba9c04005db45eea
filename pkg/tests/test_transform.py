"""
Tests for the drift-removing space transform

The closed-form g is checked against hand-computed values, against the
integral equation it solves and against the independent fixed-point solver.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from libs.coefficient import PiecewiseCoefficient
from libs.errors import OutOfRange, RequiresAtomCondition
from libs.measure import Convention, DriftMeasure, dirac, from_pieces
from libs.transform import (
    atom_jump_factor,
    default_probe_grid,
    driftless_coefficient,
    eval_g,
    eval_G,
    eval_G_inverse,
    residual_of_integral_equation,
    satisfies_atom_condition,
    solve_g,
    solve_g_fixed_point,
    transform_table,
)

ROUND_TRIP = 1e-12

WEIGHT_RANGES = {
    Convention.RIGHT: (-0.75, 0.3),
    Convention.LEFT: (-0.3, 0.75),
    Convention.SYMMETRIC: (-0.43, 0.43),
}


@st.composite
def atom_measures(draw, conv):
    low, high = WEIGHT_RANGES[conv]
    atoms = draw(
        st.lists(
            st.tuples(
                st.floats(-5.0, 5.0, allow_nan=False),
                st.floats(low, high, allow_nan=False),
            ),
            min_size=1,
            max_size=5,
            unique_by=lambda atom: atom[0],
        )
    )
    return DriftMeasure(atoms=tuple(atoms))


class TestAtomCondition:
    """Strict atom condition and jump factors."""

    @pytest.mark.parametrize(
        "weight, conv, expected",
        [
            (0.49, Convention.RIGHT, True),
            (0.5, Convention.RIGHT, False),
            (-0.49, Convention.LEFT, True),
            (-0.5, Convention.LEFT, False),
            (0.99, Convention.SYMMETRIC, True),
            (-1.0, Convention.SYMMETRIC, False),
        ],
    )
    def test_satisfies_atom_condition(self, weight, conv, expected):
        """Test the strict atom condition on both sides of each boundary weight."""
        assert satisfies_atom_condition(weight, conv) is expected

    @pytest.mark.parametrize(
        "conv, expected",
        [
            (Convention.RIGHT, 1.0 - 2.0 * 0.2),
            (Convention.LEFT, 1.0 / (1.0 + 2.0 * 0.2)),
            (Convention.SYMMETRIC, 0.8 / 1.2),
        ],
    )
    def test_jump_factor(self, conv, expected):
        """Test the factor g(p)/g(p-) for weight 0.2 in each convention."""
        assert atom_jump_factor(0.2, conv) == pytest.approx(expected)

    @pytest.mark.parametrize(
        "weight, conv",
        [(0.5, Convention.RIGHT), (-0.5, Convention.LEFT), (1.0, Convention.SYMMETRIC)],
    )
    def test_solve_g_rejects_boundary_weights(self, weight, conv):
        """Test that boundary weights are rejected with their location data."""
        with pytest.raises(RequiresAtomCondition) as excinfo:
            solve_g(dirac(0.0, weight), conv)

        assert excinfo.value.weight == weight
        assert excinfo.value.convention == conv.value


class TestClosedForm:
    """Hand-computed transforms."""

    def test_zero_measure_is_identity(self):
        """Test that the zero measure gives g = 1 and G(x) = x."""
        gt = solve_g(DriftMeasure.zero(), Convention.RIGHT)

        assert gt.g(5.0) == 1.0
        assert gt.G(5.0) == pytest.approx(5.0)
        assert gt.G(-3.0) == pytest.approx(-3.0)
        assert gt.G_inverse(2.0) == pytest.approx(2.0)

    def test_positive_right_atom(self):
        """Test a right atom of weight 1/4 at 1."""
        gt = solve_g(dirac(1.0, 0.25), Convention.RIGHT)

        assert eval_g(gt, 1.0) == pytest.approx((0.5, 1.0))
        assert gt.g(2.0) == pytest.approx(0.5)
        assert eval_G(gt, 2.0) == pytest.approx(1.5)
        assert eval_G_inverse(gt, 1.5) == pytest.approx(2.0)

    def test_negative_right_atom(self):
        """Test a right atom of weight 1/4 at -1, left of the origin."""
        gt = solve_g(dirac(-1.0, 0.25), Convention.RIGHT)

        assert eval_g(gt, -1.0) == pytest.approx((1.0, 2.0))
        assert gt.g(-2.0) == pytest.approx(2.0)
        assert gt.G(-2.0) == pytest.approx(-3.0)

    def test_density_gives_exponential(self):
        """Test exponential decay of g across a density piece."""
        gt = solve_g(DriftMeasure(density=((0.0, 1.0, 0.5),)), Convention.LEFT)

        assert gt.g(0.5) == pytest.approx(np.exp(-0.5))
        assert gt.g(2.0) == pytest.approx(np.exp(-1.0))
        assert gt.G(1.0) == pytest.approx(1.0 - np.exp(-1.0))
        assert gt.G_inverse(1.0 - np.exp(-1.0)) == pytest.approx(1.0)

    def test_equivalent_atoms_give_the_same_transform(self):
        """Test that right 1/4, symmetric 1/3 and left 1/2 give one transform."""
        right = solve_g(dirac(0.0, 0.25), Convention.RIGHT)
        symmetric = solve_g(dirac(0.0, 1.0 / 3.0), Convention.SYMMETRIC)
        left = solve_g(dirac(0.0, 0.5), Convention.LEFT)
        grid = np.linspace(-3.0, 3.0, 61)

        np.testing.assert_allclose(symmetric.g(grid), right.g(grid), rtol=1e-12)
        np.testing.assert_allclose(left.g(grid), right.g(grid), rtol=1e-12)
        np.testing.assert_allclose(left.G(grid), right.G(grid), rtol=1e-12, atol=1e-12)

    def test_jump_factors_at_knots(self):
        """Test jump factors at density endpoints and an atom."""
        gt = solve_g(from_pieces([(1.0, 0.2)], [(-1.0, 0.0, 0.3)]), Convention.RIGHT)

        np.testing.assert_allclose(gt.jump_factors, [1.0, 1.0, 0.6])

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_G_inverse_rejects_non_finite(self, bad):
        """Test OutOfRange for non-finite arguments of G⁻¹."""
        gt = solve_g(dirac(0.0, 0.1), Convention.RIGHT)

        with pytest.raises(OutOfRange):
            gt.G_inverse(bad)


class TestIntegralEquation:
    """Residuals of the integral equation and the fixed-point cross-check."""

    @pytest.mark.parametrize("conv", list(Convention))
    @settings(max_examples=40, deadline=None)
    @given(data=st.data())
    def test_atoms_only_residual(self, conv, data):
        """Test the residual bound for random atom-only measures."""
        gt = solve_g(data.draw(atom_measures(conv)), conv)

        assert residual_of_integral_equation(gt, default_probe_grid(gt)) <= 1e-12

    @pytest.mark.parametrize("conv", list(Convention))
    def test_residual_with_density(self, conv):
        """Test the residual bound with density pieces."""
        nu = from_pieces([(0.5, 0.2), (-1.5, -0.1)], [(-1.0, 0.75, 0.4), (2.0, 3.0, -0.6)])
        gt = solve_g(nu, conv)

        assert residual_of_integral_equation(gt, default_probe_grid(gt, n=201)) <= 1e-8

    @pytest.mark.parametrize("conv", list(Convention))
    def test_fixed_point_agrees_with_closed_form(self, conv):
        """Test the closed form against the fixed-point solver."""
        nu = DriftMeasure(atoms=((0.5, 0.25), (-0.75, -0.125)), density=((-1.0, 1.0, 0.3),))
        gt = solve_g(nu, conv)

        x, g, gl = solve_g_fixed_point(nu, conv, np.linspace(-2.0, 2.0, 8001))

        assert np.max(np.abs(g - gt.g(x))) <= 1e-6
        assert np.max(np.abs(gl - gt.g_minus(x))) <= 1e-6

    @pytest.mark.parametrize("conv", list(Convention))
    @settings(max_examples=25, deadline=None)
    @given(data=st.data())
    def test_g_positive_and_G_increasing(self, conv, data):
        """Test g > 0, G increasing and the G⁻¹ round trip."""
        gt = solve_g(data.draw(atom_measures(conv)), conv)
        grid = np.linspace(-10.0, 10.0, 2001)

        assert np.all(gt.g(grid) > 0.0)
        assert np.all(gt.g_minus(grid) > 0.0)
        G = gt.G(grid)
        assert np.all(np.diff(G) > 0.0)
        back = gt.G_inverse(G)
        assert np.max(np.abs(back - grid) / np.maximum(1.0, np.abs(grid))) <= ROUND_TRIP


class TestRoundTrip:
    """G⁻¹(G(x)) = x on random points across atoms, density pieces and tails."""

    MEASURES = [
        (from_pieces([(0.5, 0.2), (-1.5, -0.4), (3.0, 0.45)]), Convention.RIGHT),
        (from_pieces([(-0.5, 0.7), (2.0, -0.25)], [(-2.0, 1.0, 0.6)]), Convention.LEFT),
        (
            from_pieces([(0.0, 0.4), (1.0, -0.4)], [(-3.0, -1.0, -0.5), (1.5, 4.0, 0.8)]),
            Convention.SYMMETRIC,
        ),
    ]

    @pytest.mark.parametrize("nu, conv", MEASURES)
    def test_random_points(self, nu, conv):
        """Test the relative round-trip bound on 10^4 random points."""
        gt = solve_g(nu, conv)
        gen = np.random.default_rng(17)
        knots = gt.knots
        near_knots = np.concatenate(
            [knots + offset for offset in (-1e-9, -1e-6, 0.0, 1e-6, 1e-9)]
        )
        uniform = gen.uniform(-10.0, 10.0, 10_000 - near_knots.size)
        x = np.concatenate([uniform, near_knots])

        back = gt.G_inverse(gt.G(x))

        assert x.size == 10_000
        assert np.max(np.abs(back - x) / np.maximum(1.0, np.abs(x))) <= ROUND_TRIP

    @pytest.mark.parametrize("nu, conv", MEASURES)
    def test_far_tails(self, nu, conv):
        """Test the round trip beyond the outermost knots, where G is linear."""
        gt = solve_g(nu, conv)
        x = np.array([-1e3, -50.0, 50.0, 1e3])

        back = gt.G_inverse(gt.G(x))

        assert np.max(np.abs(back - x) / np.abs(x)) <= ROUND_TRIP


class TestDriftlessCoefficient:
    """σ = (g·b)∘G⁻¹ and the transform table."""

    @pytest.fixture
    def gt(self):
        return solve_g(dirac(0.0, 0.25), Convention.RIGHT)

    def test_sigma_uses_right_value_of_g(self, gt):
        """Test σ = (g·b)∘G⁻¹ with the right value of g at the atom."""
        sigma = driftless_coefficient(gt, PiecewiseCoefficient.constant(2.0))

        assert sigma.at_state(0.0) == pytest.approx(1.0)
        assert sigma.at_state(-1.0) == pytest.approx(2.0)
        assert sigma(gt.G(1.0)) == pytest.approx(1.0)

    def test_transform_table_rows(self, gt):
        """Test the rows of the transform table."""
        rows = transform_table(gt, [-1.0, 0.0, 1.0], PiecewiseCoefficient.constant())

        assert [row["x"] for row in rows] == [-1.0, 0.0, 1.0]
        assert rows[1]["g"] == pytest.approx(0.5)
        assert rows[1]["g_minus"] == pytest.approx(1.0)
        assert rows[2]["G"] == pytest.approx(0.5)
        assert rows[0]["sigma"] == pytest.approx(1.0)
