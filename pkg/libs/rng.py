"""
Reproducible per-path random streams.

Each simulated path owns a counter-based Philox stream keyed by
SeedSequence([seed, path_index]), so a path's increments depend only on
(seed, path_index) and never on how paths are batched or scheduled across
workers. Oracles that need randomness independent of the SDE paths use a
numbered substream spawned from the same key.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from libs.errors import InvalidParameter

SDE_STREAM = 0
ORACLE_STREAM = 1
SECOND_ORACLE_STREAM = 2

_MAX_SEED = 2**64


@dataclass(frozen=True)
class RngStream:
    """Random stream of one path: (seed, path_index) plus a substream number."""

    seed: int
    path_index: int
    stream: int = SDE_STREAM

    def __post_init__(self):
        if not 0 <= int(self.seed) < _MAX_SEED:
            raise InvalidParameter("seed", self.seed, "must be a 64-bit unsigned integer")
        if int(self.path_index) < 0:
            raise InvalidParameter("path_index", self.path_index, "must be >= 0")
        if int(self.stream) < 0:
            raise InvalidParameter("stream", self.stream, "must be >= 0")

    def seed_sequence(self) -> np.random.SeedSequence:
        root = np.random.SeedSequence([int(self.seed), int(self.path_index)])
        if self.stream == SDE_STREAM:
            return root
        return root.spawn(self.stream)[self.stream - 1]

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of the stream."""
        return np.random.Generator(np.random.Philox(self.seed_sequence()))

    def brownian_increments(self, n_steps: int, dt: float) -> np.ndarray:
        """First n_steps standard normals of the stream, scaled by sqrt(dt)."""
        return self.generator().standard_normal(n_steps) * np.sqrt(dt)

    def uniforms(self, n: int) -> np.ndarray:
        return self.generator().random(n)

    def substream(self, stream: int) -> "RngStream":
        return RngStream(self.seed, self.path_index, stream)


def brownian_matrix(
    seed: int,
    path_indices: Sequence[int],
    n_steps: int,
    dt: float,
    stream: int = SDE_STREAM,
) -> np.ndarray:
    """Stack the increments of several paths, one row per path index."""
    out = np.empty((len(path_indices), n_steps))
    for row, index in enumerate(path_indices):
        out[row] = RngStream(seed, int(index), stream).brownian_increments(n_steps, dt)
    return out


def uniform_matrix(
    seed: int, path_indices: Sequence[int], n: int, stream: int = ORACLE_STREAM
) -> np.ndarray:
    out = np.empty((len(path_indices), n))
    for row, index in enumerate(path_indices):
        out[row] = RngStream(seed, int(index), stream).uniforms(n)
    return out
