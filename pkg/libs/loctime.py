"""
Pathwise local-time estimation.

Local time at level y is estimated from a gridded path by the occupation
limit: (1/ε) times the quadratic variation accumulated while the path sits
in a window next to y. The window fixes the convention:

    right      [y, y + ε)
    left       (y - ε, y]
    symmetric  ½·(y - ε, y + ε)

Quadratic-variation increments come from the path (b(X)²·dt, exact for the
Euler scheme) or, in "squared" mode, from the squared path increments.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import integrate

from libs.classify import local_time_relation
from libs.errors import InsufficientPathData, InvalidParameter
from libs.measure import Convention
from libs.simulate import Path, SdeSpec
from libs.statistics import mean_with_stderr

logger = logging.getLogger(__name__)

QV_MODES = ("model", "squared")


@dataclass(frozen=True)
class LocalTimeEstimate:
    """Cumulative estimate of L(t, y) over the path grid; values[0] = 0."""

    y: float
    epsilon: float
    convention: Convention
    values: np.ndarray
    dt: float

    @property
    def terminal(self) -> float:
        return float(self.values[-1])

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.dt


class MeanComparison(NamedTuple):
    """Monte Carlo means of both sides of an identity with their standard errors."""

    lhs: float
    rhs: float
    lhs_stderr: float
    rhs_stderr: float

    @classmethod
    def from_samples(cls, lhs: Sequence[float], rhs: Sequence[float]) -> "MeanComparison":
        lhs_mean, lhs_se = mean_with_stderr(lhs)
        rhs_mean, rhs_se = mean_with_stderr(rhs)
        return cls(lhs_mean, rhs_mean, lhs_se, rhs_se)

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def relative_gap(self) -> float:
        return self.gap / abs(self.rhs) if self.rhs != 0 else float("inf")


def _check_epsilon(epsilon: float) -> None:
    if not epsilon > 0:
        raise InvalidParameter("epsilon", epsilon, "must be > 0")


def _qv(path: Path, qv_mode: str) -> np.ndarray:
    if qv_mode == "model":
        if len(path.qv_increments) != path.n_steps:
            raise InsufficientPathData("qv_increments")
        return np.asarray(path.qv_increments, dtype=float)
    if qv_mode == "squared":
        return np.diff(path.values) ** 2
    raise InvalidParameter("qv_mode", qv_mode, f"must be one of {QV_MODES}")


def window_weights(
    x: np.ndarray, y: float, conv: Convention, epsilon: float
) -> np.ndarray:
    """Window indicator per convention (½ on the two-sided window for symmetric)."""
    conv = Convention(conv)
    if conv == Convention.RIGHT:
        inside = (x >= y) & (x < y + epsilon)
        return inside.astype(float)
    if conv == Convention.LEFT:
        inside = (x > y - epsilon) & (x <= y)
        return inside.astype(float)
    return 0.5 * ((x > y - epsilon) & (x < y + epsilon)).astype(float)


def estimate_local_time(
    path: Path,
    y: float,
    conv: Convention,
    epsilon: float,
    qv_mode: str = "model",
) -> LocalTimeEstimate:
    """
    Cumulative local-time estimate L(t_i, y), i = 0..n.

    Raises:
        InvalidParameter: epsilon <= 0 or unknown qv_mode
    """
    _check_epsilon(epsilon)
    if len(path.values) == 0:
        raise InsufficientPathData("values")
    q = _qv(path, qv_mode)
    w = window_weights(path.values[:-1], y, conv, epsilon)
    values = np.concatenate([[0.0], np.cumsum(w * q)]) / epsilon
    return LocalTimeEstimate(
        y=float(y),
        epsilon=float(epsilon),
        convention=Convention(conv),
        values=values,
        dt=path.dt,
    )


def terminal_local_times(
    paths: Iterable[Path], y: float, epsilon: float, qv_mode: str = "model"
) -> dict[Convention, np.ndarray]:
    """L(t_end, y) of every path under all three conventions."""
    _check_epsilon(epsilon)
    out: dict[Convention, list] = {conv: [] for conv in Convention}
    for path in paths:
        q = _qv(path, qv_mode)
        x = path.values[:-1]
        for conv in Convention:
            out[conv].append(float(np.dot(window_weights(x, y, conv, epsilon), q)) / epsilon)
    return {conv: np.asarray(v) for conv, v in out.items()}


def _window(y: float, conv: Convention, epsilon: float) -> tuple[float, float]:
    conv = Convention(conv)
    if conv == Convention.RIGHT:
        return y, y + epsilon
    if conv == Convention.LEFT:
        return y - epsilon, y
    return y - epsilon, y + epsilon


def check_support_property(est: LocalTimeEstimate, path: Path) -> bool:
    """
    A window that misses [min X, max X] must give an identically zero
    estimate; a window meeting the range makes the check vacuous.
    """
    low, high = _window(est.y, est.convention, est.epsilon)
    x_min, x_max = float(np.min(path.values)), float(np.max(path.values))
    closed_left = est.convention == Convention.RIGHT
    closed_right = est.convention == Convention.LEFT
    misses_below = high < x_min or (high == x_min and not closed_right)
    misses_above = low > x_max or (low == x_max and not closed_left)
    if not (misses_below or misses_above):
        return True
    return bool(np.all(est.values == 0.0))


def lemma1_ratio_check(
    paths: Sequence[Path], y: float, a: float, conv: Convention, epsilon: float
) -> MeanComparison:
    """
    Means of c_plus·L₊(t_end, y) and c_minus·L₋(t_end, y) for the relation
    c_plus·L₊ = c_minus·L₋ at an atom of weight a.
    """
    terminal = terminal_local_times(paths, y, epsilon)
    return local_time_ratio_from_terminal(
        terminal[Convention.RIGHT], terminal[Convention.LEFT], a, conv
    )


def local_time_ratio_from_terminal(
    l_plus: np.ndarray, l_minus: np.ndarray, a: float, conv: Convention
) -> MeanComparison:
    relation = local_time_relation(a, conv)
    lhs, lhs_se = mean_with_stderr(relation.c_plus * np.asarray(l_plus))
    rhs, rhs_se = mean_with_stderr(relation.c_minus * np.asarray(l_minus))
    return MeanComparison(lhs, rhs, lhs_se, rhs_se)


def eq6_check(
    paths: Sequence[Path],
    y: float,
    a: float,
    epsilon: float,
    conv: Convention = Convention.SYMMETRIC,
) -> MeanComparison:
    """Means of L₊ - L₋ and 2·a·L(conv) at level y, where a = ν({y})."""
    terminal = terminal_local_times(paths, y, epsilon)
    return jump_identity_from_terminal(terminal, a, conv)


def jump_identity_from_terminal(
    terminal: dict[Convention, np.ndarray], a: float, conv: Convention
) -> MeanComparison:
    lhs, lhs_se = mean_with_stderr(terminal[Convention.RIGHT] - terminal[Convention.LEFT])
    rhs, rhs_se = mean_with_stderr(2.0 * a * terminal[Convention(conv)])
    return MeanComparison(lhs, rhs, lhs_se, rhs_se)


def sticky_identity_from_terminal(
    l_plus: np.ndarray, held_time: np.ndarray, stickiness: float
) -> MeanComparison:
    """Means of ½·L₊(t_end, 0) and stickiness·(time held at 0 up to t_end)."""
    return MeanComparison.from_samples(
        0.5 * np.asarray(l_plus), stickiness * np.asarray(held_time)
    )


def convention_consistency(
    path: Path, y: float, epsilon: float, qv_mode: str = "model"
) -> float:
    """
    Largest gap between (L₊ + L₋)/2 and the symmetric estimate over the path.

    The right and left windows overlap exactly at y, so steps sitting on y
    are removed from the one-sided sum before comparing.
    """
    q = _qv(path, qv_mode)
    x = path.values[:-1]
    right = estimate_local_time(path, y, Convention.RIGHT, epsilon, qv_mode).values
    left = estimate_local_time(path, y, Convention.LEFT, epsilon, qv_mode).values
    symmetric = estimate_local_time(path, y, Convention.SYMMETRIC, epsilon, qv_mode).values
    on_level = np.concatenate([[0.0], np.cumsum((x == y) * q)]) / epsilon
    gap = np.abs(0.5 * (right + left - on_level) - symmetric)
    return float(gap.max()) if gap.size else 0.0


def occupation_density(path: Path, y: float, epsilon: float) -> float:
    """(1/2ε)·time spent in (y - ε, y + ε) up to t_end (left-point rule)."""
    _check_epsilon(epsilon)
    x = path.values[:-1]
    time_inside = path.dt * np.count_nonzero(np.abs(x - y) < epsilon)
    return float(time_inside) / (2.0 * epsilon)


def time_at_level(path: Path, y: float) -> float:
    """Grid time with X exactly at y up to t_end (left-point rule)."""
    return float(path.dt * np.count_nonzero(path.values[:-1] == y))


def time_at_rest(path: Path) -> float:
    """
    t_end minus ⟨X⟩ at t_end. For a path diffusing at unit rate except
    while held at a point, this is the time held.
    """
    return float(path.n_steps * path.dt - np.sum(path.qv_increments))


def tanaka_residual(path: Path, spec: SdeSpec, epsilon: float) -> np.ndarray:
    """
    X_t - x0 - Σ b(X_{t_i})·ΔB_i - Σ_atoms ν({y})·L(t, y) - ∫ L(t, y) ρ(y) dy
    over the path grid, with L estimated in the convention of spec.

    Density terms integrate L(t, ·) over each piece by the trapezoid rule on
    a grid of spacing at most ε.

    Raises:
        InsufficientPathData: the path does not carry its Brownian increments
    """
    _check_epsilon(epsilon)
    if len(path.brownian_increments) != path.n_steps:
        raise InsufficientPathData("brownian_increments")
    x = path.values
    b = np.asarray(spec.b(x[:-1]), dtype=float)
    martingale = np.concatenate([[0.0], np.cumsum(b * path.brownian_increments)])
    residual = x - x[0] - martingale

    conv = spec.convention
    for atom in spec.nu.atoms:
        estimate = estimate_local_time(path, atom.location, conv, epsilon)
        residual = residual - atom.weight * estimate.values

    for piece in spec.nu.density:
        n_points = int(np.ceil((piece.right - piece.left) / epsilon)) + 1
        levels = np.linspace(piece.left, piece.right, n_points)
        profile = np.stack(
            [estimate_local_time(path, level, conv, epsilon).values for level in levels]
        )
        residual = residual - piece.value * integrate.trapezoid(profile, levels, axis=0)

    return residual
