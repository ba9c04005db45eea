"""
Diffusion coefficients.

The diffusion coefficient b is a piecewise-constant table: sorted breakpoints
with right-continuous values between them, plus isolated point overrides
(e.g. b(0) = 0 and 1 elsewhere). A closed-form tag records which named family
produced the table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from libs.errors import InvalidParameter


@dataclass(frozen=True)
class PiecewiseCoefficient:
    """
    b(x) = values[k] on [breakpoints[k-1], breakpoints[k]), with values[0] on
    (-inf, breakpoints[0]) and values[-1] on [breakpoints[-1], inf); an entry
    of point_values overrides the table at its exact location.
    """

    breakpoints: Tuple[float, ...] = ()
    values: Tuple[float, ...] = (1.0,)
    point_values: Tuple[Tuple[float, float], ...] = ()
    kind: Optional[str] = None
    _bp: np.ndarray = field(init=False, repr=False, compare=False)
    _vals: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        breakpoints = tuple(float(x) for x in self.breakpoints)
        values = tuple(float(v) for v in self.values)
        if len(values) != len(breakpoints) + 1:
            raise InvalidParameter(
                "values", values, "need exactly one more value than breakpoints"
            )
        if any(nxt <= prev for prev, nxt in zip(breakpoints, breakpoints[1:])):
            raise InvalidParameter(
                "breakpoints", breakpoints, "must be strictly increasing"
            )
        if not all(np.isfinite(values)) or not all(np.isfinite(breakpoints)):
            raise InvalidParameter("values", values, "must be finite")
        points = tuple(sorted((float(x), float(v)) for x, v in self.point_values))
        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "point_values", points)
        object.__setattr__(self, "_bp", np.array(breakpoints, dtype=float))
        object.__setattr__(self, "_vals", np.array(values, dtype=float))

    @classmethod
    def constant(cls, value: float = 1.0) -> "PiecewiseCoefficient":
        return cls(values=(value,), kind="constant")

    @classmethod
    def indicator_positive(cls) -> "PiecewiseCoefficient":
        """b = 1 on (0, inf), 0 on (-inf, 0]."""
        return cls(
            breakpoints=(0.0,),
            values=(0.0, 1.0),
            point_values=((0.0, 0.0),),
            kind="indicator_positive",
        )

    @classmethod
    def vanishing_at(
        cls, points: Sequence[float], value: float = 1.0
    ) -> "PiecewiseCoefficient":
        """Constant `value` except b = 0 at each listed point."""
        return cls(
            values=(value,),
            point_values=tuple((float(x), 0.0) for x in points),
            kind="vanishing_at",
        )

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = self._vals[np.searchsorted(self._bp, x_arr, side="right")]
        for location, value in self.point_values:
            out = np.where(x_arr == location, value, out)
        if np.ndim(x) == 0:
            return float(out)
        return out

    def at(self, x: float) -> float:
        return float(self(float(x)))
