"""
Point classification and convention conversion.

Every point x of the line is classified by the atom weight a = ν({x}), the
local-time convention and whether the diffusion coefficient vanishes there:

- strict atom condition holds: the drift can be removed, the point is regular;
- boundary value of the condition: the point reflects solutions into one side;
- strict violation with b(x) = 0: solutions started at x stay there;
- strict violation with b(x) != 0: no solution can reach (or start at) x.

The same SDE can be written with right, left or symmetric local time by
reweighting the atoms of ν; the conversion maps below preserve the class of
every point.
"""

from __future__ import annotations

import logging
from enum import Enum
from typing import Callable, NamedTuple, Tuple

from libs.errors import ConversionUndefined, InvalidParameter
from libs.measure import Convention, DriftMeasure, atom_weight

logger = logging.getLogger(__name__)


class PointClass(str, Enum):
    """Behavior of solutions at a point."""

    REGULAR = "regular"
    REFLECTING_UP = "reflecting_up"
    REFLECTING_DOWN = "reflecting_down"
    ABSORBING = "absorbing"
    NO_SOLUTION_IF_REACHED = "no_solution_if_reached"

    @property
    def is_reflecting(self) -> bool:
        return self in (PointClass.REFLECTING_UP, PointClass.REFLECTING_DOWN)

    @property
    def is_regular(self) -> bool:
        return self == PointClass.REGULAR


class LocalTimeRelation(NamedTuple):
    """Coefficients of the identity c_plus·L₊(t,x) = c_minus·L₋(t,x)."""

    c_plus: float
    c_minus: float


class ClassifiedPoint(NamedTuple):
    location: float
    weight: float
    point_class: PointClass


def _violation_class(b_at_x: float) -> PointClass:
    if b_at_x == 0.0:
        return PointClass.ABSORBING
    return PointClass.NO_SOLUTION_IF_REACHED


def classify_weight(a: float, conv: Convention, b_at_x: float) -> PointClass:
    """Class of a point carrying atom weight a (exact comparisons)."""
    conv = Convention(conv)
    if conv == Convention.RIGHT:
        if a < 0.5:
            return PointClass.REGULAR
        if a == 0.5:
            return PointClass.REFLECTING_UP
        return _violation_class(b_at_x)
    if conv == Convention.LEFT:
        if a > -0.5:
            return PointClass.REGULAR
        if a == -0.5:
            return PointClass.REFLECTING_DOWN
        return _violation_class(b_at_x)
    if abs(a) < 1.0:
        return PointClass.REGULAR
    if a == 1.0:
        return PointClass.REFLECTING_UP
    if a == -1.0:
        return PointClass.REFLECTING_DOWN
    return _violation_class(b_at_x)


def classify_point(
    nu: DriftMeasure, conv: Convention, x: float, b_at_x: float
) -> PointClass:
    """Classify x from the atom weight ν({x}) and the scalar b(x)."""
    return classify_weight(atom_weight(nu, x), conv, b_at_x)


def classify_measure(
    nu: DriftMeasure, conv: Convention, b: Callable[[float], float]
) -> Tuple[ClassifiedPoint, ...]:
    """Class of every atom location of ν, in location order."""
    return tuple(
        ClassifiedPoint(
            atom.location,
            atom.weight,
            classify_weight(atom.weight, conv, float(b(atom.location))),
        )
        for atom in nu.atoms
    )


def non_regular_points(
    nu: DriftMeasure, conv: Convention, b: Callable[[float], float]
) -> Tuple[ClassifiedPoint, ...]:
    return tuple(
        p for p in classify_measure(nu, conv, b) if not p.point_class.is_regular
    )


def local_time_relation(a: float, conv: Convention) -> LocalTimeRelation:
    """
    Relation between right and left local time at an atom of weight a.

    Right: (1 - 2a)·L₊ = L₋; Left: L₊ = (1 + 2a)·L₋;
    Symmetric: (1 - a)·L₊ = (1 + a)·L₋.
    """
    conv = Convention(conv)
    if conv == Convention.RIGHT:
        return LocalTimeRelation(1.0 - 2.0 * a, 1.0)
    if conv == Convention.LEFT:
        return LocalTimeRelation(1.0, 1.0 + 2.0 * a)
    return LocalTimeRelation(1.0 - a, 1.0 + a)


def vanishing_local_times(a: float, conv: Convention) -> Tuple[bool, bool]:
    """(L₋ forced zero, L₊ forced zero) at an atom of weight a."""
    conv = Convention(conv)
    if conv == Convention.RIGHT:
        return a >= 0.5, a > 0.5
    if conv == Convention.LEFT:
        return a < -0.5, a <= -0.5
    strict = abs(a) > 1.0
    return strict or a == 1.0, strict or a == -1.0


def _right_to_symmetric(a: float) -> float:
    return 2.0 * a / (2.0 - 2.0 * a) if a < 1.0 else 2.0 * a


def _symmetric_to_right(a: float) -> float:
    return a / (1.0 + a) if a > -1.0 else -a / 2.0


def _right_to_left(a: float) -> float:
    return a / (1.0 - 2.0 * a) if a < 0.5 else -a


def _left_to_right(a: float) -> float:
    return a / (1.0 + 2.0 * a) if a > -0.5 else -a


def _left_to_symmetric(a: float) -> float:
    return 2.0 * a / (2.0 + 2.0 * a) if a > -1.0 else 2.0 * a


def _symmetric_to_left(a: float) -> float:
    return a / (1.0 - a) if a < 1.0 else -a / 2.0


# (source, target) -> (weight map, excluded source weight or None)
_ATOM_MAPS: dict = {
    (Convention.RIGHT, Convention.SYMMETRIC): (_right_to_symmetric, None),
    (Convention.SYMMETRIC, Convention.RIGHT): (_symmetric_to_right, -1.0),
    (Convention.RIGHT, Convention.LEFT): (_right_to_left, 0.5),
    (Convention.LEFT, Convention.RIGHT): (_left_to_right, -0.5),
    (Convention.LEFT, Convention.SYMMETRIC): (_left_to_symmetric, None),
    (Convention.SYMMETRIC, Convention.LEFT): (_symmetric_to_left, 1.0),
}


def convert_weight(
    a: float, source: Convention, target: Convention, location: float = 0.0
) -> float:
    """
    Atom weight in the target convention describing the same SDE.

    Raises:
        ConversionUndefined: a is the excluded weight of this direction
    """
    source, target = Convention(source), Convention(target)
    if source == target:
        return float(a)
    weight_map, excluded = _ATOM_MAPS[(source, target)]
    if excluded is not None and a == excluded:
        raise ConversionUndefined(location, a, source.value, target.value)
    return float(weight_map(a))


def convert_measure(
    nu: DriftMeasure, source: Convention, target: Convention
) -> DriftMeasure:
    """
    Rewrite ν for another local-time convention.

    Atom weights are mapped one by one; the density part is unchanged.

    Raises:
        ConversionUndefined: an atom weight is excluded for this direction
    """
    source, target = Convention(source), Convention(target)
    if source == target:
        return nu
    weights = [convert_weight(a.weight, source, target, a.location) for a in nu.atoms]
    logger.debug(
        f"Converted measure from {source.value} to {target.value}",
        extra={"n_atoms": len(weights)},
    )
    return nu.with_atom_weights(weights)


_REPRESENTABLE = {
    Convention.RIGHT: frozenset(PointClass) - {PointClass.REFLECTING_DOWN},
    Convention.LEFT: frozenset(PointClass) - {PointClass.REFLECTING_UP},
    Convention.SYMMETRIC: frozenset(PointClass),
}


def relabel_class(
    point_class: PointClass, source: Convention, target: Convention
) -> PointClass:
    """
    Expected class of a point after converting its atom from source to target.

    Conversions preserve the behavior of solutions, so the class carries over
    unchanged; a class with no atom weight in the target convention (right
    local time cannot express downward reflection, left cannot express
    upward reflection) has no relabeling.

    Raises:
        InvalidParameter: the class is not expressible in the target convention
    """
    point_class = PointClass(point_class)
    for conv in (Convention(source), Convention(target)):
        if point_class not in _REPRESENTABLE[conv]:
            raise InvalidParameter(
                "point_class",
                point_class.value,
                f"not expressible with {conv.value} local time",
            )
    return point_class
