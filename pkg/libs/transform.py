"""
Space transform that removes the generalized drift.

Under the strict atom condition the linear Stieltjes equation

    g(x) = 1 - 2 ∫_[0,x] F(g,y) ν(dy),   x >= 0
    g(x) = 1 + 2 ∫_(x,0) F(g,y) ν(dy),   x <  0

with F(g,x) = g(x-) (right), g(x) (left) or (g(x)+g(x-))/2 (symmetric local
time) has a unique càdlàg, strictly positive solution g. Since
dg = -2 F(g,·) dν, the solution is built outward from 0:

- between knots g(x) = g(l)·exp(-2ρ(x - l)) for the constant density ρ;
- across an atom of weight a:
    right:     g(p) = (1 - 2a)·g(p-)
    left:      g(p) = g(p-) / (1 + 2a)
    symmetric: g(p) = g(p-)·(1 - a)/(1 + a)

G(x) = ∫_0^x g is continuous and strictly increasing, and Y = G(X) has no
drift. Every closed form here is checked by residual_of_integral_equation
and by the fixed-point solver in the tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.special import exprel

from libs.errors import ConvergenceError, OutOfRange, RequiresAtomCondition
from libs.measure import Convention, DriftMeasure

logger = logging.getLogger(__name__)

QUAD_EPSABS = 1e-10
QUAD_LIMIT = 40


def satisfies_atom_condition(weight: float, convention: Convention) -> bool:
    """Strict atom condition for one atom weight."""
    if convention == Convention.RIGHT:
        return weight < 0.5
    if convention == Convention.LEFT:
        return weight > -0.5
    return abs(weight) < 1.0


def atom_jump_factor(weight: float, convention: Convention) -> float:
    """Ratio g(p) / g(p-) across an atom of the given weight."""
    if convention == Convention.RIGHT:
        return 1.0 - 2.0 * weight
    if convention == Convention.LEFT:
        return 1.0 / (1.0 + 2.0 * weight)
    return (1.0 - weight) / (1.0 + weight)


@dataclass(frozen=True)
class GTransform:
    """
    Solution g of the integral equation and its primitive G.

    Attributes:
        convention: Local-time convention the equation was solved for
        measure: The drift measure (satisfies the strict atom condition)
        knots: Sorted union of 0, atom locations and density endpoints
        g_right: g(k) at every knot (right value)
        g_left: g(k-) at every knot
        slopes: Density on [knots[j], knots[j+1]); last entry 0 (beyond the knots)
        G_knots: G(k) at every knot, anchored at G(0) = 0
        breakpoints: Atom locations of the measure
    """

    convention: Convention
    measure: DriftMeasure
    knots: np.ndarray
    g_right: np.ndarray
    g_left: np.ndarray
    slopes: np.ndarray
    G_knots: np.ndarray
    breakpoints: np.ndarray = field(repr=False)

    @property
    def jump_factors(self) -> np.ndarray:
        """g(p)/g(p-) at every knot (1 where no atom sits)."""
        return self.g_right / self.g_left

    def _locate(self, x: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.knots, x, side="right") - 1

    def g(self, x):
        """Right value g(x), vectorized."""
        x_arr = np.asarray(x, dtype=float)
        idx = self._locate(x_arr)
        inside = idx >= 0
        safe = np.where(inside, idx, 0)
        h = x_arr - self.knots[safe]
        with np.errstate(over="ignore"):
            value = np.where(
                inside,
                self.g_right[safe] * np.exp(-2.0 * self.slopes[safe] * h),
                self.g_left[0],
            )
        return float(value) if np.ndim(x) == 0 else value

    def g_minus(self, x):
        """Left limit g(x-), vectorized."""
        x_arr = np.asarray(x, dtype=float)
        idx = self._locate(x_arr)
        safe = np.where(idx >= 0, idx, 0)
        at_knot = (idx >= 0) & (self.knots[safe] == x_arr)
        value = np.where(at_knot, self.g_left[safe], self.g(x_arr))
        return float(value) if np.ndim(x) == 0 else value

    def G(self, x):
        """Primitive G(x) = ∫_0^x g(y) dy in closed form, vectorized."""
        x_arr = np.asarray(x, dtype=float)
        idx = self._locate(x_arr)
        inside = idx >= 0
        safe = np.where(inside, idx, 0)
        h = x_arr - self.knots[safe]
        with np.errstate(over="ignore", invalid="ignore"):
            within = self.G_knots[safe] + self.g_right[safe] * h * exprel(
                -2.0 * self.slopes[safe] * h
            )
        below = self.G_knots[0] - self.g_left[0] * (self.knots[0] - x_arr)
        value = np.where(inside, within, below)
        return float(value) if np.ndim(x) == 0 else value

    def G_inverse(self, y):
        """
        Inverse of G: locate the piece by bisection on G at the knots, then
        invert the piece in closed form.

        Raises:
            OutOfRange: y is not a finite real number (G maps onto the real line)
        """
        y_arr = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y_arr)):
            bad = y_arr[~np.isfinite(y_arr)]
            raise OutOfRange(float(bad.flat[0]))
        idx = np.searchsorted(self.G_knots, y_arr, side="right") - 1
        inside = idx >= 0
        safe = np.where(inside, idx, 0)
        delta = y_arr - self.G_knots[safe]
        c = self.g_right[safe]
        u = -2.0 * self.slopes[safe] * delta / c
        small = np.abs(u) < 1e-12
        u_safe = np.where(small, 1.0, u)
        with np.errstate(invalid="ignore", divide="ignore"):
            log1p_rel = np.where(small, 1.0 - 0.5 * u, np.log1p(u_safe) / u_safe)
        within = self.knots[safe] + (delta / c) * log1p_rel
        below = self.knots[0] - (self.G_knots[0] - y_arr) / self.g_left[0]
        value = np.where(inside, within, below)
        return float(value) if np.ndim(y) == 0 else value


def solve_g(nu: DriftMeasure, conv: Convention) -> GTransform:
    """
    Solve the integral equation for g and build G.

    Raises:
        RequiresAtomCondition: an atom violates the strict atom condition
    """
    conv = Convention(conv)
    for atom in nu.atoms:
        if not satisfies_atom_condition(atom.weight, conv):
            raise RequiresAtomCondition(atom.location, atom.weight, conv.value)

    knots = np.union1d(nu.knots(), [0.0])
    n = len(knots)
    origin = int(np.searchsorted(knots, 0.0))

    weights = np.zeros(n)
    if nu.atoms:
        weights[np.searchsorted(knots, nu.locations)] = nu.weights
    factors = np.array([atom_jump_factor(w, conv) for w in weights])

    slopes = np.zeros(n)
    for j in range(n - 1):
        slopes[j] = nu.density_at(0.5 * (knots[j] + knots[j + 1]))
    widths = np.diff(knots)

    g_left = np.empty(n)
    g_right = np.empty(n)
    g_left[origin] = 1.0
    g_right[origin] = factors[origin]
    for j in range(origin + 1, n):
        g_left[j] = g_right[j - 1] * np.exp(-2.0 * slopes[j - 1] * widths[j - 1])
        g_right[j] = g_left[j] * factors[j]
    for j in range(origin - 1, -1, -1):
        g_right[j] = g_left[j + 1] * np.exp(2.0 * slopes[j] * widths[j])
        g_left[j] = g_right[j] / factors[j]

    piece_integrals = g_right[:-1] * widths * exprel(-2.0 * slopes[:-1] * widths)
    G_knots = np.concatenate([[0.0], np.cumsum(piece_integrals)])
    G_knots = G_knots - G_knots[origin]
    G_knots[origin] = 0.0

    for array in (knots, g_right, g_left, slopes, G_knots):
        array.setflags(write=False)

    transform = GTransform(
        convention=conv,
        measure=nu,
        knots=knots,
        g_right=g_right,
        g_left=g_left,
        slopes=slopes,
        G_knots=G_knots,
        breakpoints=nu.locations,
    )
    logger.debug(
        "Solved integral equation",
        extra={
            "convention": conv.value,
            "n_knots": n,
            "g_min": float(min(g_right.min(), g_left.min())),
            "g_max": float(max(g_right.max(), g_left.max())),
        },
    )
    return transform


def eval_g(gt: GTransform, x: float) -> Tuple[float, float]:
    """(g(x), g(x-)); equal unless x is an atom location."""
    return gt.g(float(x)), gt.g_minus(float(x))


def eval_G(gt: GTransform, x: float) -> float:
    return gt.G(float(x))


def eval_G_inverse(gt: GTransform, y: float) -> float:
    return gt.G_inverse(float(y))


def _F(gt: GTransform, location: float) -> float:
    right, left = eval_g(gt, location)
    if gt.convention == Convention.RIGHT:
        return left
    if gt.convention == Convention.LEFT:
        return right
    return 0.5 * (right + left)


def _density_term(gt: GTransform, left: float, right: float) -> float:
    """∫_left^right g(y) ρ(y) dy by adaptive quadrature, split at the knots."""
    if right <= left:
        return 0.0
    cuts = gt.knots[(gt.knots > left) & (gt.knots < right)]
    edges = np.concatenate([[left], cuts, [right]])
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        rho = gt.measure.density_at(0.5 * (a + b))
        if rho == 0.0:
            continue
        value, _ = integrate.quad(
            gt.g, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSABS, limit=QUAD_LIMIT
        )
        total += rho * value
    return total


def _interval_integrals(gt: GTransform) -> np.ndarray:
    """ρ·∫ g over every interval between consecutive knots."""
    return np.array(
        [_density_term(gt, a, b) for a, b in zip(gt.knots[:-1], gt.knots[1:])]
    )


def residual_of_integral_equation(gt: GTransform, probe_grid: Iterable[float]) -> float:
    """
    Maximum absolute residual of the integral equation over the given points.

    Atom contributions are summed exactly; density contributions use
    adaptive quadrature of g, independent of the closed form used for G.
    Whole knot intervals are integrated once, so each point adds at most one
    partial quadrature.
    """
    nu = gt.measure
    knots = gt.knots
    full = _interval_integrals(gt)
    terms = nu.weights * np.array([_F(gt, p) for p in nu.locations])
    origin = int(np.searchsorted(knots, 0.0))
    worst = 0.0
    for x in probe_grid:
        x = float(x)
        j = int(np.searchsorted(knots, x, side="right")) - 1
        if x >= 0.0:
            mask = (nu.locations >= 0.0) & (nu.locations <= x)
            atoms = float(terms[mask].sum())
            density = full[origin:j].sum() + _density_term(gt, knots[j], x)
            expected = 1.0 - 2.0 * (atoms + density)
        else:
            mask = (nu.locations > x) & (nu.locations < 0.0)
            atoms = float(terms[mask].sum())
            if j < 0:
                density = full[:origin].sum()
            else:
                density = _density_term(gt, x, knots[j + 1]) + full[j + 1 : origin].sum()
            expected = 1.0 + 2.0 * (atoms + density)
        worst = max(worst, abs(gt.g(x) - expected))
    return worst


def default_probe_grid(
    gt: GTransform, left: float = -10.0, right: float = 10.0, n: int = 401
) -> np.ndarray:
    """Uniform grid plus every knot and a point just left of each knot."""
    knots = gt.knots[(gt.knots >= left) & (gt.knots <= right)]
    nudged = knots - 1e-9 * np.maximum(1.0, np.abs(knots))
    return np.unique(np.concatenate([np.linspace(left, right, n), knots, nudged]))


def solve_g_fixed_point(
    nu: DriftMeasure,
    conv: Convention,
    grid: Iterable[float],
    tol: float = 1e-10,
    max_iter: int = 1000,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Independent solver: Picard iteration of the integral equation on a grid.

    Atoms strictly between 0 and x are summed exactly, density terms by the
    trapezoid rule per cell (right value at the left end, left limit at the
    right end). The atom at x itself enters F(g, x), so it is resolved in
    place from the accumulated value. The grid is augmented with 0, the atom
    locations and the density endpoints.

    Returns:
        (grid, g right values, g left limits) on the augmented grid

    Raises:
        ConvergenceError: no convergence within max_iter sweeps
    """
    conv = Convention(conv)
    x = np.union1d(np.union1d(np.asarray(list(grid), dtype=float), nu.knots()), [0.0])
    n = len(x)
    origin = int(np.searchsorted(x, 0.0))
    w = np.zeros(n)
    if nu.atoms:
        w[np.searchsorted(x, nu.locations)] = nu.weights
    factors = np.array([atom_jump_factor(weight, conv) for weight in w])
    rho = np.array([nu.density_at(0.5 * (a + b)) for a, b in zip(x[:-1], x[1:])])
    h = np.diff(x)

    g = np.ones(n)
    gl = np.ones(n)
    for iteration in range(max_iter):
        if conv == Convention.RIGHT:
            F = gl
        elif conv == Convention.LEFT:
            F = g
        else:
            F = 0.5 * (g + gl)
        atom_terms = w * F
        cells = rho * 0.5 * (g[:-1] + gl[1:]) * h

        g_new = np.empty(n)
        gl_new = np.empty(n)

        # x >= 0: g(x-) accumulates [0, x), the atom at x is the jump
        pos_atoms = np.cumsum(atom_terms[origin:]) - atom_terms[origin:]
        pos_cells = np.concatenate([[0.0], np.cumsum(cells[origin:])])
        before = 1.0 - 2.0 * (pos_atoms + pos_cells)
        gl_new[origin:] = before
        g_new[origin:] = before * factors[origin:]

        # x < 0: g(x) accumulates (x, 0), the atom at x is the jump
        if origin > 0:
            neg_atoms = np.cumsum(atom_terms[origin - 1 :: -1])[::-1]
            neg_atoms_open = np.concatenate([neg_atoms[1:], [0.0]])
            neg_cells = np.cumsum(cells[origin - 1 :: -1])[::-1]
            after = 1.0 + 2.0 * (neg_atoms_open + neg_cells)
            g_new[:origin] = after
            gl_new[:origin] = after / factors[:origin]

        change = max(np.max(np.abs(g_new - g)), np.max(np.abs(gl_new - gl)))
        g, gl = g_new, gl_new
        if change < tol:
            logger.debug(
                "Fixed-point solver converged",
                extra={"iterations": iteration + 1, "grid_points": n},
            )
            return x, g, gl
    raise ConvergenceError(
        f"Fixed-point iteration did not converge within {max_iter} sweeps"
    )


class DriftlessCoefficient:
    """σ(y) = g(G⁻¹(y))·b(G⁻¹(y)), using the right value of g at atoms."""

    def __init__(self, gt: GTransform, b: Callable):
        self.gt = gt
        self.b = b

    def __call__(self, y):
        x = self.gt.G_inverse(y)
        value = np.asarray(self.gt.g(x)) * np.asarray(self.b(x))
        return float(value) if np.ndim(y) == 0 else value

    def at_state(self, x):
        """σ expressed in the original coordinate: g(x)·b(x)."""
        value = np.asarray(self.gt.g(x)) * np.asarray(self.b(x))
        return float(value) if np.ndim(x) == 0 else value


def driftless_coefficient(gt: GTransform, b: Callable) -> DriftlessCoefficient:
    return DriftlessCoefficient(gt, b)


def transform_table(
    gt: GTransform, grid: Iterable[float], b: Optional[Callable] = None
) -> list[dict]:
    """Rows (x, g(x), g(x-), G(x)) for the transform CLI table."""
    rows = []
    for x in grid:
        right, left = eval_g(gt, x)
        row = {"x": float(x), "g": right, "g_minus": left, "G": eval_G(gt, x)}
        if b is not None:
            row["sigma"] = right * float(b(float(x)))
        rows.append(row)
    return rows
