# src/config.py
"""
Scenario files: YAML in, validated pydantic models out.

    name: measles-like
    run: r0                      # simulate | steady | r0 | lyapunov | vaccinate | sweep
    grid: {a_max: 100, n: 2001}
    demography:
      mu: 0.02                   # a number is shorthand for {shape: constant, value: ...}
      beta: {shape: piecewise_linear, breakpoints: [[15, 0], [30, 0.08], [45, 0]]}
    epi: {mu1: 0.2, q1: 0.1, gamma1: 0.05, gamma2: 0.1, gamma: 0.1, k1: 1, k2: 1}

Every violation is collected before anything is computed.
"""
from __future__ import annotations

from typing import Annotated, Literal, Optional, Union

import yaml
from pydantic import (
    AfterValidator,
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)


def _non_negative(value: float) -> float:
    if value < 0:
        raise ValueError("rate must be ≥ 0")
    return value


Rate = Annotated[float, AfterValidator(_non_negative)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False, validate_default=True)


# --- profile shapes ---------------------------------------------------------

class ConstantShape(_Strict):
    shape: Literal["constant"]
    value: Rate


class PiecewiseLinearShape(_Strict):
    """Linear between breakpoints (age, value), flat outside them."""

    shape: Literal["piecewise_linear"]
    breakpoints: list[tuple[float, Rate]] = Field(min_length=1)

    @field_validator("breakpoints")
    @classmethod
    def _ages_increase(cls, breakpoints):
        ages = [age for age, _ in breakpoints]
        if any(b <= a for a, b in zip(ages, ages[1:])):
            raise ValueError("breakpoint ages must be strictly increasing")
        return breakpoints


class ExponentialShape(_Strict):
    """amplitude · e^{rate·a} + offset (Gompertz-style mortality)."""

    shape: Literal["exponential"]
    amplitude: Rate
    rate: float
    offset: Rate = 0.0


def _number_as_constant(value):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return {"shape": "constant", "value": value}
    return value


ProfileSpec = Annotated[
    Union[ConstantShape, PiecewiseLinearShape, ExponentialShape],
    Field(discriminator="shape"),
    BeforeValidator(_number_as_constant),
]


# --- scenario sections ------------------------------------------------------

class GridConfig(_Strict):
    a_max: float = Field(100.0, gt=0)
    n: int = Field(2001, ge=3)


class DemographyConfig(_Strict):
    mu: ProfileSpec
    beta: Optional[ProfileSpec] = None  # defaults to mu, which makes the net reproduction rate 1
    survival_tolerance: float = Field(1e-6, gt=0, lt=1)


class EpiConfig(_Strict):
    mu1: Rate
    q1: Rate
    gamma1: Rate
    gamma2: Rate
    gamma: Rate
    k1: ProfileSpec = 1.0
    k2: ProfileSpec = 1.0
    contact_scale: Rate = 1.0


class CostConfig(_Strict):
    g1: ProfileSpec = 1.0
    g2: ProfileSpec = 1.0
    f: ProfileSpec = 1.0
    F_bar: float = Field(gt=0)


class SeedConfig(_Strict):
    compartment: Literal["e", "q", "i"] = "e"
    mass: float = Field(1e-4, ge=0)
    center: float = Field(25.0, ge=0)
    width: float = Field(2.5, gt=0)


class SimulateConfig(_Strict):
    t_end: float = Field(500.0, ge=0)
    sample_every: int = Field(10, ge=1)


class LyapunovConfig(_Strict):
    t_end: float = Field(300.0, ge=0)
    sample_every: int = Field(10, ge=1)
    tolerance: float = Field(1e-4, gt=0)


class VaccinateConfig(_Strict):
    enforce_consistency: bool = False
    refine: bool = True
    self_consistent: bool = True
    target_tol: float = Field(1e-8, gt=0)
    max_iter: int = Field(100, ge=1)


class SweepConfig(_Strict):
    F_bar: list[Annotated[float, Field(gt=0)]] = Field(min_length=1)


class Scenario(_Strict):
    name: str = "scenario"
    run: Literal["simulate", "steady", "r0", "lyapunov", "vaccinate", "sweep"]
    output_dir: Optional[str] = None
    grid: GridConfig = GridConfig()
    demography: DemographyConfig
    epi: EpiConfig
    costs: Optional[CostConfig] = None
    seed: SeedConfig = SeedConfig()
    simulate: SimulateConfig = SimulateConfig()
    lyapunov: LyapunovConfig = LyapunovConfig()
    vaccinate: VaccinateConfig = VaccinateConfig()
    sweep: Optional[SweepConfig] = None

    @model_validator(mode="after")
    def _sections_for_run(self):
        if self.run in ("vaccinate", "sweep") and self.costs is None:
            raise ValueError(f"run '{self.run}' needs a costs section")
        if self.run == "sweep" and self.sweep is None:
            raise ValueError("run 'sweep' needs a sweep section with F_bar values")
        return self


class Diagnostic(BaseModel):
    field: str
    message: str
    line: Optional[int] = None

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{where}{self.field or '<root>'}: {self.message}"


# --- validation -------------------------------------------------------------

def _walk(node: Optional[yaml.Node], loc: tuple) -> tuple[list[str], Optional[int]]:
    """Follow a pydantic error location through the YAML node tree."""
    path: list[str] = []
    line = node.start_mark.line + 1 if node is not None else None
    for part in loc:
        child = None
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                if key.value == str(part):
                    child, line = value, key.start_mark.line + 1
                    break
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            child = node.value[part]
            line = child.start_mark.line + 1
        if child is None:
            continue
        path.append(str(part))
        node = child
    return path, line


def _diagnostic(error: dict, root: Optional[yaml.Node]) -> Diagnostic:
    loc = tuple(error["loc"])
    path, line = _walk(root, loc)
    if error["type"] == "missing" and loc:
        path.append(str(loc[-1]))
    if error["type"] == "value_error":
        message = str(error["ctx"]["error"])
    else:
        message = error["msg"]
    return Diagnostic(field=".".join(path), message=message, line=line)


def validate_config(
    text: str,
    default_name: Optional[str] = None,
    grid_overrides: Optional[dict] = None,
) -> tuple[Optional[Scenario], list[Diagnostic]]:
    """Parse and validate a scenario; diagnostics list every violation, not just the first."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        return None, [Diagnostic(field="", message=f"invalid YAML: {exc}", line=mark.line + 1 if mark else None)]

    if data is None:
        data = {}
    if not isinstance(data, dict):
        return None, [Diagnostic(field="", message="a scenario must be a mapping of sections", line=1)]
    if default_name and "name" not in data:
        data["name"] = default_name
    if grid_overrides:
        grid = data.get("grid") if isinstance(data.get("grid"), dict) else {}
        data["grid"] = {**grid, **grid_overrides}

    try:
        return Scenario.model_validate(data), []
    except ValidationError as exc:
        return None, [_diagnostic(error, root) for error in exc.errors()]
