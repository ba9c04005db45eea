"""
Drift measures.

A drift measure is represented by finitely many atoms plus a piecewise-constant
Lebesgue density on finitely many bounded half-open intervals [l, r). This
covers point masses and density drifts, and keeps the integral equation for
the space transform solvable in closed form.

Values are immutable; all operations return new measures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np

from libs.errors import InvalidInterval, InvalidMeasure


class Convention(str, Enum):
    """Which local time drives the generalized drift term."""

    RIGHT = "right"
    LEFT = "left"
    SYMMETRIC = "symmetric"


class IntervalKind(str, Enum):
    """Endpoint inclusion of an interval."""

    CLOSED = "[]"
    CLOSED_OPEN = "[)"
    OPEN_CLOSED = "(]"
    OPEN = "()"


@dataclass(frozen=True)
class Interval:
    """Bounded interval with explicit endpoint inclusion."""

    left: float
    right: float
    kind: IntervalKind = IntervalKind.CLOSED

    @classmethod
    def closed(cls, left: float, right: float) -> "Interval":
        return cls(left, right, IntervalKind.CLOSED)

    @classmethod
    def closed_open(cls, left: float, right: float) -> "Interval":
        return cls(left, right, IntervalKind.CLOSED_OPEN)

    @classmethod
    def open_closed(cls, left: float, right: float) -> "Interval":
        return cls(left, right, IntervalKind.OPEN_CLOSED)

    @classmethod
    def open(cls, left: float, right: float) -> "Interval":
        return cls(left, right, IntervalKind.OPEN)

    def contains(self, x: float) -> bool:
        if self.kind in (IntervalKind.CLOSED, IntervalKind.CLOSED_OPEN):
            above = x >= self.left
        else:
            above = x > self.left
        if self.kind in (IntervalKind.CLOSED, IntervalKind.OPEN_CLOSED):
            below = x <= self.right
        else:
            below = x < self.right
        return above and below


@dataclass(frozen=True)
class Atom:
    location: float
    weight: float


@dataclass(frozen=True)
class DensityPiece:
    """Constant density `value` on the half-open interval [left, right)."""

    left: float
    right: float
    value: float


def _normalize_atoms(atoms: Iterable[Tuple[float, float] | Atom]) -> Tuple[Atom, ...]:
    merged: dict[float, float] = {}
    for item in atoms:
        location, weight = (
            (item.location, item.weight) if isinstance(item, Atom) else item
        )
        location, weight = float(location), float(weight)
        if not (np.isfinite(location) and np.isfinite(weight)):
            raise InvalidMeasure(f"Non-finite atom ({location}, {weight})")
        merged[location] = merged.get(location, 0.0) + weight
    return tuple(
        Atom(location, weight)
        for location, weight in sorted(merged.items())
        if weight != 0.0
    )


def _normalize_density(
    pieces: Iterable[Tuple[float, float, float] | DensityPiece],
) -> Tuple[DensityPiece, ...]:
    raw = []
    for item in pieces:
        left, right, value = (
            (item.left, item.right, item.value)
            if isinstance(item, DensityPiece)
            else item
        )
        left, right, value = float(left), float(right), float(value)
        if not (np.isfinite(left) and np.isfinite(right) and np.isfinite(value)):
            raise InvalidMeasure(f"Non-finite density piece [{left}, {right}): {value}")
        if left >= right:
            raise InvalidMeasure(f"Empty or reversed density piece [{left}, {right})")
        if value != 0.0:
            raw.append(DensityPiece(left, right, value))

    raw.sort(key=lambda piece: piece.left)
    normalized: list[DensityPiece] = []
    for piece in raw:
        if normalized and piece.left < normalized[-1].right:
            raise InvalidMeasure(
                f"Overlapping density pieces at [{piece.left}, {piece.right})"
            )
        if (
            normalized
            and piece.left == normalized[-1].right
            and piece.value == normalized[-1].value
        ):
            previous = normalized.pop()
            piece = DensityPiece(previous.left, piece.right, piece.value)
        normalized.append(piece)
    return tuple(normalized)


@dataclass(frozen=True)
class DriftMeasure:
    """
    Finite signed measure on every bounded interval: atoms plus a
    piecewise-constant density.

    Construction normalizes the representation: atoms are sorted, atoms at the
    same location are merged and zero weights dropped; density pieces are
    sorted, zero pieces dropped and adjacent equal pieces merged.
    """

    atoms: Tuple[Atom, ...] = ()
    density: Tuple[DensityPiece, ...] = ()
    _locations: np.ndarray = field(init=False, repr=False, compare=False)
    _weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "atoms", _normalize_atoms(self.atoms))
        object.__setattr__(self, "density", _normalize_density(self.density))
        locations = np.array([atom.location for atom in self.atoms], dtype=float)
        weights = np.array([atom.weight for atom in self.atoms], dtype=float)
        locations.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "_locations", locations)
        object.__setattr__(self, "_weights", weights)

    @classmethod
    def zero(cls) -> "DriftMeasure":
        return cls()

    @classmethod
    def from_atoms(cls, *atoms: Tuple[float, float]) -> "DriftMeasure":
        return cls(atoms=tuple(atoms))

    @property
    def locations(self) -> np.ndarray:
        return self._locations

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def is_zero(self) -> bool:
        return not self.atoms and not self.density

    def knots(self) -> np.ndarray:
        """Sorted union of atom locations and density endpoints."""
        points = set(self._locations.tolist())
        for piece in self.density:
            points.add(piece.left)
            points.add(piece.right)
        return np.array(sorted(points), dtype=float)

    def density_at(self, x: float) -> float:
        """Density value at x (right-continuous, zero outside the pieces)."""
        for piece in self.density:
            if piece.left <= x < piece.right:
                return piece.value
        return 0.0

    def density_integral(self, left: float, right: float) -> float:
        """Integral of the density over [left, right]."""
        total = 0.0
        for piece in self.density:
            overlap = min(right, piece.right) - max(left, piece.left)
            if overlap > 0.0:
                total += piece.value * overlap
        return total

    def total_variation(self, left: float, right: float) -> float:
        """Total variation |ν| of the closed window [left, right]."""
        mask = (self._locations >= left) & (self._locations <= right)
        total = float(np.abs(self._weights[mask]).sum())
        for piece in self.density:
            overlap = min(right, piece.right) - max(left, piece.left)
            if overlap > 0.0:
                total += abs(piece.value) * overlap
        return total

    def restrict_atoms(self, keep: Callable[[float, float], bool]) -> "DriftMeasure":
        """Keep the density and only the atoms for which keep(location, weight)."""
        return DriftMeasure(
            atoms=tuple(a for a in self.atoms if keep(a.location, a.weight)),
            density=self.density,
        )

    def without_atoms(self, locations: Iterable[float]) -> "DriftMeasure":
        """Remove the atoms at the given (exact) locations."""
        dropped = set(float(x) for x in locations)
        return self.restrict_atoms(lambda location, _: location not in dropped)

    def with_atom_weights(self, weights: Sequence[float]) -> "DriftMeasure":
        """Same atom locations and density, new atom weights (in atom order)."""
        if len(weights) != len(self.atoms):
            raise InvalidMeasure("Weight list does not match the atom list")
        return DriftMeasure(
            atoms=tuple(
                Atom(atom.location, float(w)) for atom, w in zip(self.atoms, weights)
            ),
            density=self.density,
        )


def atom_weight(nu: DriftMeasure, x: float) -> float:
    """ν({x}): the atom weight at x, zero if x is not an atom location."""
    index = int(np.searchsorted(nu.locations, x))
    if index < len(nu.atoms) and nu.locations[index] == x:
        return float(nu.weights[index])
    return 0.0


def interval_mass(nu: DriftMeasure, interval: Interval) -> float:
    """
    ν(interval): atom weights inside the interval plus the density integral.

    Raises:
        InvalidInterval: if interval.left > interval.right
    """
    if interval.left > interval.right:
        raise InvalidInterval(interval.left, interval.right)

    left_side = (
        "left"
        if interval.kind in (IntervalKind.CLOSED, IntervalKind.CLOSED_OPEN)
        else "right"
    )
    right_side = (
        "right"
        if interval.kind in (IntervalKind.CLOSED, IntervalKind.OPEN_CLOSED)
        else "left"
    )
    start = int(np.searchsorted(nu.locations, interval.left, side=left_side))
    stop = int(np.searchsorted(nu.locations, interval.right, side=right_side))
    atom_part = float(nu.weights[start:stop].sum()) if stop > start else 0.0
    return atom_part + nu.density_integral(interval.left, interval.right)


def shift(nu: DriftMeasure, x0: float) -> DriftMeasure:
    """
    The measure B ↦ ν(B + x0): every atom and density piece moves by −x0.

    Shifting back by −x0 restores every location exactly when locations and
    x0 are dyadic rationals of moderate size (quarter-integers, say). For
    arbitrary floats each location comes back within two ulps of
    max(|location|, |x0|).
    """
    return DriftMeasure(
        atoms=tuple(Atom(a.location - x0, a.weight) for a in nu.atoms),
        density=tuple(
            DensityPiece(p.left - x0, p.right - x0, p.value) for p in nu.density
        ),
    )


def negate_reflect(nu: DriftMeasure) -> DriftMeasure:
    """
    The measure A ↦ −ν(−A).

    A density value v on [l, r) becomes −v on (−r, −l], stored in canonical
    half-open form [−r, −l) (the two differ on a Lebesgue-null set).
    """
    return DriftMeasure(
        atoms=tuple(Atom(-a.location, -a.weight) for a in nu.atoms),
        density=tuple(DensityPiece(-p.right, -p.left, -p.value) for p in nu.density),
    )


def dirac(location: float, weight: float = 1.0) -> DriftMeasure:
    """Convenience constructor for weight·δ_location."""
    return DriftMeasure(atoms=((location, weight),))


def from_pieces(
    atoms: Optional[Iterable[Tuple[float, float]]] = None,
    density: Optional[Iterable[Tuple[float, float, float]]] = None,
) -> DriftMeasure:
    return DriftMeasure(atoms=tuple(atoms or ()), density=tuple(density or ()))
