"""
Configuration Schema

Pydantic models for the JSON configuration files read by the command line:
drift measures, diffusion coefficients, SDE specifications and Monte Carlo
parameters. Every model converts to and from the library value it describes.
"""

from __future__ import annotations

import json
import os
from enum import Enum
from pathlib import Path
from typing import List, Optional, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from libs.coefficient import PiecewiseCoefficient
from libs.errors import ConfigurationError
from libs.measure import Atom, Convention, DensityPiece, DriftMeasure
from libs.simulate import CrossingPolicy, SdeSpec

ModelT = TypeVar("ModelT", bound=BaseModel)


class CoefficientKind(str, Enum):
    """Closed-form families of diffusion coefficients."""

    TABLE = "table"
    CONSTANT = "constant"
    INDICATOR_POSITIVE = "indicator_positive"
    VANISHING_AT = "vanishing_at"


class QvMode(str, Enum):
    """Source of quadratic-variation increments for local-time estimates."""

    MODEL = "model"
    SQUARED = "squared"


class AtomConfig(BaseModel):
    at: float = Field(description="Atom location")
    weight: float = Field(description="Atom weight ν({at})")


class DensityPieceConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    start: float = Field(alias="from", description="Left end (included)")
    to: float = Field(description="Right end (excluded)")
    value: float = Field(description="Constant density on [from, to)")

    @model_validator(mode="after")
    def validate_order(self):
        if not self.start < self.to:
            raise ValueError(f"Density piece needs from < to, got [{self.start}, {self.to})")
        return self


class MeasureConfig(BaseModel):
    """Drift measure: atoms plus a piecewise-constant density."""

    atoms: List[AtomConfig] = Field(default_factory=list, description="Point masses")
    density: List[DensityPieceConfig] = Field(
        default_factory=list, description="Density pieces on half-open intervals"
    )

    def to_measure(self) -> DriftMeasure:
        return DriftMeasure(
            atoms=tuple(Atom(a.at, a.weight) for a in self.atoms),
            density=tuple(DensityPiece(p.start, p.to, p.value) for p in self.density),
        )

    @classmethod
    def from_measure(cls, nu: DriftMeasure) -> "MeasureConfig":
        return cls(
            atoms=[AtomConfig(at=a.location, weight=a.weight) for a in nu.atoms],
            density=[
                DensityPieceConfig(start=p.left, to=p.right, value=p.value)
                for p in nu.density
            ],
        )

    def dump(self) -> dict:
        return self.model_dump(by_alias=True)


class PointValueConfig(BaseModel):
    at: float = Field(description="Isolated point")
    value: float = Field(description="Coefficient value at that point")


class CoefficientConfig(BaseModel):
    """
    Piecewise-constant diffusion coefficient.

    values[k] holds on [breakpoints[k-1], breakpoints[k]); point_values
    override isolated points. A non-table kind builds the named family and
    ignores the table.
    """

    kind: CoefficientKind = Field(CoefficientKind.TABLE, description="Coefficient family")
    breakpoints: List[float] = Field(default_factory=list, description="Sorted breakpoints")
    values: List[float] = Field(
        default_factory=lambda: [1.0], description="Right-continuous values"
    )
    point_values: List[PointValueConfig] = Field(
        default_factory=list, description="Point overrides"
    )
    value: float = Field(1.0, description="Level for the constant/vanishing_at kinds")
    points: List[float] = Field(
        default_factory=list, description="Zeros for the vanishing_at kind"
    )

    @field_validator("breakpoints")
    @classmethod
    def validate_breakpoints(cls, v):
        if any(nxt <= prev for prev, nxt in zip(v, v[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        return v

    @model_validator(mode="after")
    def validate_table(self):
        if self.kind == CoefficientKind.TABLE and len(self.values) != len(
            self.breakpoints
        ) + 1:
            raise ValueError("values must have exactly one more entry than breakpoints")
        return self

    def to_coefficient(self) -> PiecewiseCoefficient:
        if self.kind == CoefficientKind.CONSTANT:
            return PiecewiseCoefficient.constant(self.value)
        if self.kind == CoefficientKind.INDICATOR_POSITIVE:
            return PiecewiseCoefficient.indicator_positive()
        if self.kind == CoefficientKind.VANISHING_AT:
            return PiecewiseCoefficient.vanishing_at(self.points, self.value)
        return PiecewiseCoefficient(
            breakpoints=tuple(self.breakpoints),
            values=tuple(self.values),
            point_values=tuple((p.at, p.value) for p in self.point_values),
        )


class SdeConfig(BaseModel):
    """SDE specification: coefficient b, drift measure ν, convention and x0."""

    b: CoefficientConfig = Field(
        default_factory=CoefficientConfig, description="Diffusion coefficient"
    )
    nu: MeasureConfig = Field(default_factory=MeasureConfig, description="Drift measure")
    convention: Convention = Field(
        Convention.SYMMETRIC, description="Local-time convention of the drift term"
    )
    x0: float = Field(0.0, description="Initial point")

    @field_validator("x0")
    @classmethod
    def validate_x0(cls, v):
        if v != v or v in (float("inf"), float("-inf")):
            raise ValueError("x0 must be finite")
        return v

    def to_spec(self) -> SdeSpec:
        return SdeSpec(
            b=self.b.to_coefficient(),
            nu=self.nu.to_measure(),
            convention=self.convention,
            x0=self.x0,
        )


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


class MonteCarloParams(BaseModel):
    """Monte Carlo and discretization parameters."""

    n_paths: int = Field(1000, ge=1, description="Number of simulated paths")
    dt: float = Field(1e-3, gt=0.0, description="Time step")
    epsilon: float = Field(0.1, gt=0.0, description="Local-time window width")
    t_end: float = Field(1.0, gt=0.0, description="Time horizon")
    seed: int = Field(0, ge=0, lt=2**64, description="Master seed")
    x_max: float = Field(1e6, gt=0.0, description="Explosion threshold on |X|")
    batch_size: int = Field(
        default_factory=lambda: _env_int("GDRIFT_BATCH_SIZE", 256),
        ge=1,
        description="Paths simulated per vectorized batch",
    )
    workers: int = Field(
        default_factory=lambda: _env_int("GDRIFT_WORKERS", 1),
        ge=1,
        description="Worker processes for batch simulation",
    )
    one_way_crossing: CrossingPolicy = Field(
        CrossingPolicy.REDISPATCH,
        description="Reaching a reflecting point from its far side: redispatch or refuse",
    )
    qv_mode: QvMode = Field(QvMode.MODEL, description="Quadratic-variation source")

    @model_validator(mode="after")
    def validate_grid(self):
        if self.t_end < self.dt:
            raise ValueError(f"t_end ({self.t_end}) must be >= dt ({self.dt})")
        return self

    def with_overrides(self, **overrides) -> "MonteCarloParams":
        """Validated copy with the non-None overrides applied."""
        update = {k: v for k, v in overrides.items() if v is not None}
        return MonteCarloParams.model_validate({**self.model_dump(), **update})


class RunConfig(BaseModel):
    """SDE plus Monte Carlo parameters, as read by the simulate command."""

    sde: SdeConfig = Field(default_factory=SdeConfig)
    monte_carlo: MonteCarloParams = Field(default_factory=MonteCarloParams)


def load_config(path: str | Path, model: Type[ModelT]) -> ModelT:
    """
    Read a JSON file into the given model.

    Raises:
        ConfigurationError: the file is missing or not valid JSON
        pydantic.ValidationError: the content does not fit the model
    """
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"Cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"Config file {path} is not valid JSON: {exc}") from exc
    return model.model_validate(raw)


def config_echo(model: Optional[BaseModel]) -> dict:
    """JSON-ready dump used in report and table headers."""
    if model is None:
        return {}
    return model.model_dump(mode="json", by_alias=True)
