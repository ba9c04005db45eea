"""
Path simulation for SDEs with generalized drift.

Paths are generated in the transformed coordinate Y = G(X), where G removes
the drift of every regular atom and of the density. Non-regular atoms split
the line into regions; each path lives in one region and resolves its
barriers every step:

- reflecting into the region: the overshoot is mirrored back across G(p);
- reflecting out of the region: one-way crossing, the path restarts on the
  far side (or the run is refused, depending on the crossing policy);
- absorbing: the path stops at p and stays there;
- no solution if reached: the path is truncated at p.

|X| >= x_max truncates the path as exploded. Paths are simulated in batches,
vectorized across paths; every path draws its increments from its own
RngStream so results do not depend on the batching.

Oracle paths live here too: the skew random walk, reflected Brownian motion
and Brownian motion held at 0 (sticky), each with a batched variant.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, List, Optional, Sequence

import numpy as np

from libs.classify import PointClass, classify_point, non_regular_points
from libs.errors import IllPosedScenario, InvalidParameter, NoSolutionAtStart
from libs.measure import Convention, DriftMeasure, atom_weight
from libs.parallel import map_batches
from libs.rng import (
    ORACLE_STREAM,
    SDE_STREAM,
    SECOND_ORACLE_STREAM,
    RngStream,
    brownian_matrix,
    uniform_matrix,
)
from libs.transform import GTransform, solve_g

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 256
MAX_BARRIER_RESOLUTIONS = 16

_NONE, _UP, _DOWN, _ABSORB, _NOSOL = 0, 1, 2, 3, 4
_CLASS_CODES = {
    PointClass.REFLECTING_UP: _UP,
    PointClass.REFLECTING_DOWN: _DOWN,
    PointClass.ABSORBING: _ABSORB,
    PointClass.NO_SOLUTION_IF_REACHED: _NOSOL,
}
# Indexed by class code.
_REACHED_AT_LOWER = np.array([False, False, True, True, True])
_REACHED_AT_UPPER = np.array([False, True, False, True, True])
_STOPS = np.array([False, False, False, True, True])


class CrossingPolicy(str, Enum):
    """What to do when a path reaches a reflecting point from its far side."""

    REDISPATCH = "redispatch"
    REFUSE = "refuse"


class StatusKind(str, Enum):
    COMPLETED = "completed"
    ABSORBED = "absorbed"
    EXPLODED = "exploded"
    NO_SOLUTION_HIT = "no_solution_hit"


_TRUNCATING = (StatusKind.EXPLODED, StatusKind.NO_SOLUTION_HIT)


@dataclass(frozen=True)
class PathStatus:
    kind: StatusKind
    at: Optional[float] = None
    step: Optional[int] = None

    @classmethod
    def completed(cls) -> "PathStatus":
        return cls(StatusKind.COMPLETED)

    @classmethod
    def absorbed(cls, at: float, step: int) -> "PathStatus":
        return cls(StatusKind.ABSORBED, float(at), int(step))

    @classmethod
    def exploded(cls, step: int) -> "PathStatus":
        return cls(StatusKind.EXPLODED, None, int(step))

    @classmethod
    def no_solution_hit(cls, at: float, step: int) -> "PathStatus":
        return cls(StatusKind.NO_SOLUTION_HIT, float(at), int(step))

    @property
    def truncated(self) -> bool:
        return self.kind in _TRUNCATING


@dataclass(frozen=True)
class PathEvent:
    """Re-dispatch event: crossing, reflect_start, absorbed, no_solution, exploded."""

    kind: str
    step: int
    location: float


@dataclass
class Path:
    """
    Uniformly gridded trajectory t_i = i·dt.

    Attributes:
        dt: Time step
        values: X at the grid times, values[0] = x0
        brownian_increments: ΔB_i driving step i
        qv_increments: Δ⟨X⟩_i = b(X_{t_i})²·dt (zero once absorbed)
        status: Completed, Absorbed, Exploded or NoSolutionHit
        events: Re-dispatch events in step order
        path_index: Index of the RngStream the path was drawn from
    """

    dt: float
    values: np.ndarray
    brownian_increments: np.ndarray
    qv_increments: np.ndarray
    status: PathStatus = field(default_factory=PathStatus.completed)
    events: List[PathEvent] = field(default_factory=list)
    path_index: int = 0

    @property
    def x0(self) -> float:
        return float(self.values[0])

    @property
    def n_steps(self) -> int:
        return len(self.values) - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.dt

    @property
    def terminal(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class SdeSpec:
    """dX = b(X) dB + generalized drift from ν under the given local-time convention."""

    b: Callable
    nu: DriftMeasure
    convention: Convention
    x0: float

    def __post_init__(self):
        object.__setattr__(self, "convention", Convention(self.convention))
        if not np.isfinite(self.x0):
            raise InvalidParameter("x0", self.x0, "must be finite")


@dataclass(frozen=True)
class SimulationPlan:
    """Transform, barrier table and start region shared by all paths of a spec."""

    spec: SdeSpec
    transform: GTransform
    start_class: PointClass
    points: np.ndarray
    point_G: np.ndarray
    codes: np.ndarray
    start_region: int
    y0: float

    def barrier_arrays(self):
        """Points, G values and class codes padded with the infinite ends."""
        points = np.concatenate([[-np.inf], self.points, [np.inf]])
        G = np.concatenate([[-np.inf], self.point_G, [np.inf]])
        codes = np.concatenate([[_NONE], self.codes, [_NONE]]).astype(int)
        return points, G, codes


def plan_simulation(spec: SdeSpec) -> SimulationPlan:
    """
    Classify the start point and build the global transform of the regular
    part of ν.

    Raises:
        NoSolutionAtStart: x0 carries a strictly violating atom and b(x0) != 0
    """
    x0 = float(spec.x0)
    start_class = classify_point(spec.nu, spec.convention, x0, float(spec.b(x0)))
    if start_class == PointClass.NO_SOLUTION_IF_REACHED:
        logger.warning(
            "Refusing simulation: no solution started at x0",
            extra={"x0": x0, "convention": spec.convention.value},
        )
        raise NoSolutionAtStart(x0, atom_weight(spec.nu, x0))

    special = non_regular_points(spec.nu, spec.convention, spec.b)
    points = np.array([p.location for p in special], dtype=float)
    codes = np.array([_CLASS_CODES[p.point_class] for p in special], dtype=int)
    regular_part = spec.nu.without_atoms(points)
    transform = solve_g(regular_part, spec.convention)
    point_G = np.asarray(transform.G(points), dtype=float).reshape(points.shape)

    below = int(np.searchsorted(points, x0, side="left"))
    if start_class == PointClass.REFLECTING_UP:
        start_region = below + 1
    else:
        start_region = below
    y0 = float(transform.G(x0))
    if start_class.is_reflecting:
        y0 = float(point_G[below])

    return SimulationPlan(
        spec=spec,
        transform=transform,
        start_class=start_class,
        points=points,
        point_G=point_G,
        codes=codes,
        start_region=start_region,
        y0=y0,
    )


def _check_grid(t_end: float, dt: float) -> int:
    if not dt > 0:
        raise InvalidParameter("dt", dt, "must be > 0")
    if not t_end >= dt:
        raise InvalidParameter("t_end", t_end, "must be >= dt")
    return int(round(t_end / dt))


def _simulate_batch(
    plan: SimulationPlan,
    seed: int,
    path_indices: Sequence[int],
    n_steps: int,
    dt: float,
    x_max: float,
    policy: CrossingPolicy,
    stream: int = SDE_STREAM,
) -> List[Path]:
    spec = plan.spec
    gt = plan.transform
    m = len(path_indices)
    dB = brownian_matrix(seed, path_indices, n_steps, dt, stream)
    X = np.empty((m, n_steps + 1))
    X[:, 0] = spec.x0
    qv = np.zeros((m, n_steps))
    events: List[List[PathEvent]] = [[] for _ in range(m)]
    statuses = [PathStatus.completed() for _ in range(m)]
    end_step = np.full(m, n_steps)

    if plan.start_class == PointClass.ABSORBING:
        X[:, 1:] = spec.x0
        for j in range(m):
            statuses[j] = PathStatus.absorbed(spec.x0, 0)
            events[j].append(PathEvent("absorbed", 0, float(spec.x0)))
        return _assemble(path_indices, dt, X, dB, qv, statuses, events, end_step)

    if plan.start_class.is_reflecting:
        for j in range(m):
            events[j].append(PathEvent("reflect_start", 0, float(spec.x0)))

    P, GP, codes = plan.barrier_arrays()
    Y = np.full(m, plan.y0)
    region = np.full(m, plan.start_region, dtype=int)
    active = np.ones(m, dtype=bool)

    for i in range(n_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        x = X[idx, i]
        bx = np.asarray(spec.b(x), dtype=float)
        qv[idx, i] = bx * bx * dt
        y = Y[idx] + np.asarray(gt.g(x)) * bx * dB[idx, i]
        reg = region[idx].copy()
        stopped = np.zeros(idx.size, dtype=bool)

        for _ in range(MAX_BARRIER_RESOLUTIONS if plan.points.size else 0):
            lo, hi = GP[reg], GP[reg + 1]
            lo_code, hi_code = codes[reg], codes[reg + 1]
            live = ~stopped
            hit_lo = live & (
                ((lo_code == _UP) & (y < lo))
                | (_REACHED_AT_LOWER[lo_code] & (y <= lo))
            )
            hit_hi = live & (
                ((hi_code == _DOWN) & (y > hi))
                | (_REACHED_AT_UPPER[hi_code] & (y >= hi))
            )
            if not (hit_lo.any() or hit_hi.any()):
                break

            mirror_lo = hit_lo & (lo_code == _UP)
            y[mirror_lo] = 2.0 * lo[mirror_lo] - y[mirror_lo]
            mirror_hi = hit_hi & (hi_code == _DOWN)
            y[mirror_hi] = 2.0 * hi[mirror_hi] - y[mirror_hi]

            cross_down = hit_lo & (lo_code == _DOWN)
            cross_up = hit_hi & (hi_code == _UP)
            for local in np.flatnonzero(cross_down | cross_up):
                j = idx[local]
                where = P[reg[local]] if cross_down[local] else P[reg[local] + 1]
                if policy == CrossingPolicy.REFUSE:
                    logger.warning(
                        "One-way crossing of a reflecting point refused",
                        extra={"location": float(where), "step": i + 1},
                    )
                    raise IllPosedScenario(
                        f"Path {path_indices[j]} reaches the reflecting point "
                        f"{where} from the side it does not reflect into"
                    )
                events[j].append(PathEvent("crossing", i + 1, float(where)))
            sides = ((hit_lo, lo_code, 0), (hit_hi, hi_code, 1))
            for side_hit, side_code, offset in sides:
                stops = side_hit & _STOPS[side_code]
                for local in np.flatnonzero(stops):
                    j = idx[local]
                    p = float(P[reg[local] + offset])
                    stopped[local] = True
                    active[j] = False
                    if side_code[local] == _ABSORB:
                        X[j, i + 1 :] = p
                        statuses[j] = PathStatus.absorbed(p, i + 1)
                        events[j].append(PathEvent("absorbed", i + 1, p))
                    else:
                        X[j, i + 1] = p
                        end_step[j] = i + 1
                        statuses[j] = PathStatus.no_solution_hit(p, i + 1)
                        events[j].append(PathEvent("no_solution", i + 1, p))
            reg[cross_down] -= 1
            reg[cross_up] += 1
        else:
            y = np.clip(y, GP[reg], GP[reg + 1])

        move = ~stopped
        if not move.any():
            continue
        moving = idx[move]
        y_move = y[move]
        x_new = np.asarray(gt.G_inverse(y_move), dtype=float)
        x_new = np.clip(x_new, P[reg[move]], P[reg[move] + 1])
        X[moving, i + 1] = x_new
        Y[moving] = y_move
        region[moving] = reg[move]

        for j in moving[np.abs(x_new) >= x_max]:
            active[j] = False
            end_step[j] = i + 1
            statuses[j] = PathStatus.exploded(i + 1)
            events[j].append(PathEvent("exploded", i + 1, float(X[j, i + 1])))

    return _assemble(path_indices, dt, X, dB, qv, statuses, events, end_step)


def _assemble(path_indices, dt, X, dB, qv, statuses, events, end_step) -> List[Path]:
    paths = []
    for j, index in enumerate(path_indices):
        n = int(end_step[j])
        paths.append(
            Path(
                dt=dt,
                values=X[j, : n + 1].copy(),
                brownian_increments=dB[j, :n].copy(),
                qv_increments=qv[j, :n].copy(),
                status=statuses[j],
                events=events[j],
                path_index=int(index),
            )
        )
    return paths


def simulate_path(
    spec: SdeSpec,
    t_end: float,
    dt: float,
    rng: RngStream,
    x_max: float,
    one_way_crossing: CrossingPolicy = CrossingPolicy.REDISPATCH,
) -> Path:
    """
    Simulate one path of the SDE.

    Raises:
        InvalidParameter: dt <= 0, t_end < dt or x_max <= |x0|
        NoSolutionAtStart: x0 admits no solution
        IllPosedScenario: one-way crossing under the "refuse" policy
    """
    n_steps = _check_grid(t_end, dt)
    if not x_max > abs(spec.x0):
        raise InvalidParameter("x_max", x_max, "must exceed |x0|")
    plan = plan_simulation(spec)
    return _simulate_batch(
        plan,
        rng.seed,
        [rng.path_index],
        n_steps,
        dt,
        x_max,
        CrossingPolicy(one_way_crossing),
        rng.stream,
    )[0]


def batch_size_from_env() -> int:
    return int(os.getenv("GDRIFT_BATCH_SIZE", str(DEFAULT_BATCH_SIZE)))


def workers_from_env() -> int:
    return int(os.getenv("GDRIFT_WORKERS", "1"))


def _batches(n_paths: int, batch_size: int) -> List[range]:
    return [
        range(start, min(start + batch_size, n_paths))
        for start in range(0, n_paths, batch_size)
    ]


def _batch_task(args) -> List[Path]:
    plan, seed, indices, n_steps, dt, x_max, policy, stream = args
    return _simulate_batch(
        plan, seed, list(indices), n_steps, dt, x_max, policy, stream
    )


def simulate_paths(
    spec: SdeSpec,
    t_end: float,
    dt: float,
    seed: int,
    n_paths: int,
    x_max: float,
    batch_size: Optional[int] = None,
    workers: Optional[int] = None,
    one_way_crossing: CrossingPolicy = CrossingPolicy.REDISPATCH,
    stream: int = SDE_STREAM,
) -> Iterator[List[Path]]:
    """
    Simulate paths 0..n_paths-1, yielding them batch by batch in index order.

    Path j uses RngStream(seed, j, stream), so every path equals the
    corresponding simulate_path call whatever the batch size or worker count.
    """
    n_steps = _check_grid(t_end, dt)
    if n_paths < 1:
        raise InvalidParameter("n_paths", n_paths, "must be >= 1")
    if not x_max > abs(spec.x0):
        raise InvalidParameter("x_max", x_max, "must exceed |x0|")
    plan = plan_simulation(spec)
    batch_size = batch_size or batch_size_from_env()
    workers = workers or workers_from_env()
    policy = CrossingPolicy(one_way_crossing)
    tasks = [
        (plan, seed, batch, n_steps, dt, x_max, policy, stream)
        for batch in _batches(n_paths, batch_size)
    ]
    logger.debug(
        "Simulating paths",
        extra={
            "n_paths": n_paths,
            "n_steps": n_steps,
            "batches": len(tasks),
            "workers": workers,
            "start_class": plan.start_class.value,
        },
    )
    for batch in map_batches(_batch_task, tasks, workers=workers):
        counts: dict = {}
        for path in batch:
            counts[path.status.kind.value] = counts.get(path.status.kind.value, 0) + 1
        logger.debug("Batch done", extra={"status_counts": counts})
        yield batch


def collect_paths(batches: Iterator[List[Path]]) -> List[Path]:
    return [path for batch in batches for path in batch]


def _skew_walk_batch(
    beta: float,
    n_steps: int,
    seed: int,
    path_indices: Sequence[int],
    stream: int,
    t_end: float,
) -> List[Path]:
    u = uniform_matrix(seed, path_indices, n_steps, stream)
    m = len(path_indices)
    S = np.zeros((m, n_steps + 1))
    up_at_zero = 0.5 * (1.0 + beta)
    for k in range(n_steps):
        p_up = np.where(S[:, k] == 0.0, up_at_zero, 0.5)
        S[:, k + 1] = S[:, k] + np.where(u[:, k] < p_up, 1.0, -1.0)
    dt = t_end / n_steps
    scale = np.sqrt(dt)
    return [
        Path(
            dt=dt,
            values=S[j] * scale,
            brownian_increments=np.diff(S[j]) * scale,
            qv_increments=np.full(n_steps, dt),
            path_index=int(index),
        )
        for j, index in enumerate(path_indices)
    ]


def _check_beta(beta: float, n_steps: int) -> None:
    if abs(beta) > 1.0:
        raise InvalidParameter("beta", beta, "|beta| must be <= 1")
    if n_steps < 1:
        raise InvalidParameter("n_steps", n_steps, "must be >= 1")


def simulate_skew_walk(
    beta: float, n_steps: int, rng: RngStream, t_end: float = 1.0
) -> Path:
    """
    Skew random walk oracle: from 0 step +1 with probability (1 + beta)/2,
    elsewhere a fair ±1 step; space scaled by sqrt(t_end/n), time by t_end/n.

    Raises:
        InvalidParameter: |beta| > 1 or n_steps < 1
    """
    _check_beta(beta, n_steps)
    return _skew_walk_batch(beta, n_steps, rng.seed, [rng.path_index], rng.stream, t_end)[0]


def simulate_skew_walks(
    beta: float,
    n_steps: int,
    seed: int,
    n_paths: int,
    stream: int = ORACLE_STREAM,
    t_end: float = 1.0,
    batch_size: Optional[int] = None,
) -> Iterator[List[Path]]:
    _check_beta(beta, n_steps)
    for batch in _batches(n_paths, batch_size or batch_size_from_env()):
        yield _skew_walk_batch(beta, n_steps, seed, list(batch), stream, t_end)


def _reflected_bm_batch(
    n_steps: int, dt: float, seed: int, path_indices: Sequence[int], stream: int
) -> List[Path]:
    dW = brownian_matrix(seed, path_indices, n_steps, dt, stream)
    W = np.concatenate([np.zeros((len(path_indices), 1)), np.cumsum(dW, axis=1)], axis=1)
    return [
        Path(
            dt=dt,
            values=np.abs(W[j]),
            brownian_increments=dW[j].copy(),
            qv_increments=np.full(n_steps, dt),
            path_index=int(index),
        )
        for j, index in enumerate(path_indices)
    ]


def simulate_reflected_bm(t_end: float, dt: float, rng: RngStream) -> Path:
    """|W| for a Wiener path W started at 0."""
    n_steps = _check_grid(t_end, dt)
    return _reflected_bm_batch(n_steps, dt, rng.seed, [rng.path_index], rng.stream)[0]


def simulate_reflected_bms(
    t_end: float,
    dt: float,
    seed: int,
    n_paths: int,
    stream: int = ORACLE_STREAM,
    batch_size: Optional[int] = None,
) -> Iterator[List[Path]]:
    n_steps = _check_grid(t_end, dt)
    for batch in _batches(n_paths, batch_size or batch_size_from_env()):
        yield _reflected_bm_batch(n_steps, dt, seed, list(batch), stream)


def _sticky_bm_path(
    stickiness: float, x0: float, n_steps: int, dt: float, substeps: int, rng: RngStream
) -> Path:
    h = dt / substeps
    n_fine = n_steps * substeps
    W = x0 + np.concatenate([[0.0], np.cumsum(rng.brownian_increments(n_fine, h))])
    pushed = np.maximum(0.0, -np.minimum.accumulate(W))
    R = W + pushed
    # Fine step j ends at clock time j·h plus the time held at zero so far.
    clock = np.arange(n_fine + 1) * h + pushed / stickiness
    t = np.arange(n_steps + 1) * dt
    j = np.searchsorted(clock, t, side="right") - 1
    moving = t < clock[j] + h
    running = j * h + np.minimum(t - clock[j], h)
    return Path(
        dt=dt,
        values=np.where(moving, R[j], R[np.minimum(j + 1, n_fine)]),
        brownian_increments=np.diff(W[j]),
        qv_increments=np.diff(running),
        path_index=rng.path_index,
    )


def _check_sticky(stickiness: float, x0: float, substeps: int) -> None:
    if not stickiness > 0.0:
        raise InvalidParameter("stickiness", stickiness, "must be > 0")
    if not x0 >= 0.0:
        raise InvalidParameter("x0", x0, "must be >= 0")
    if substeps < 1:
        raise InvalidParameter("substeps", substeps, "must be >= 1")


def simulate_sticky_bm(
    stickiness: float,
    x0: float,
    t_end: float,
    dt: float,
    rng: RngStream,
    substeps: int = 8,
) -> Path:
    """
    Brownian motion on [0, ∞) held at 0 for a time proportional to its
    local time there:

        X_t = x0 + ∫ 1{X_s > 0} dB_s + stickiness·∫ 1{X_s = 0} ds.

    Built from a reflected walk R = W + ℓ (ℓ the running push off zero) on a
    grid of dt/substeps, run on the clock A(s) = s + ℓ_s/stickiness. The
    path's qv_increments are those of ∫ 1{X > 0} ds, so
    t_end minus their sum is the time spent at 0.

    Raises:
        InvalidParameter: stickiness <= 0, x0 < 0, substeps < 1 or a bad grid
    """
    _check_sticky(stickiness, x0, substeps)
    n_steps = _check_grid(t_end, dt)
    return _sticky_bm_path(stickiness, x0, n_steps, dt, substeps, rng)


def simulate_sticky_bms(
    stickiness: float,
    x0: float,
    t_end: float,
    dt: float,
    seed: int,
    n_paths: int,
    substeps: int = 8,
    stream: int = SECOND_ORACLE_STREAM,
    batch_size: Optional[int] = None,
) -> Iterator[List[Path]]:
    _check_sticky(stickiness, x0, substeps)
    n_steps = _check_grid(t_end, dt)
    for batch in _batches(n_paths, batch_size or batch_size_from_env()):
        yield [
            _sticky_bm_path(
                stickiness, x0, n_steps, dt, substeps, RngStream(seed, index, stream)
            )
            for index in batch
        ]


@dataclass
class EnsembleSummary:
    """Terminal-value moments and status counts of a simulated ensemble."""

    n_paths: int
    terminal_mean: Optional[float]
    terminal_variance: Optional[float]
    status_counts: dict

    @classmethod
    def from_outcomes(
        cls, terminals: Sequence[float], kinds: Sequence[StatusKind]
    ) -> "EnsembleSummary":
        """
        Moments over the paths that reach t_end (completed or absorbed);
        truncated paths stop early and only enter the counts.
        """
        kinds = [StatusKind(k) for k in kinds]
        counts = {kind.value: 0 for kind in StatusKind}
        for kind in kinds:
            counts[kind.value] += 1
        reached = np.asarray(
            [x for x, kind in zip(terminals, kinds) if kind not in _TRUNCATING],
            dtype=float,
        )
        if reached.size == 0:
            mean = variance = None
        else:
            mean = float(reached.mean())
            variance = float(reached.var(ddof=1)) if reached.size > 1 else 0.0
        return cls(len(kinds), mean, variance, counts)

    @classmethod
    def from_paths(cls, paths: Sequence[Path]) -> "EnsembleSummary":
        return cls.from_outcomes(
            [p.terminal for p in paths], [p.status.kind for p in paths]
        )

    def to_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "terminal_mean": self.terminal_mean,
            "terminal_variance": self.terminal_variance,
            "status_counts": dict(self.status_counts),
        }
