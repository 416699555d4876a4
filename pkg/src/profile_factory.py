import logging
from typing import Optional

import numpy as np

from src.config import ConstantShape, ExponentialShape, PiecewiseLinearShape
from src.numerics.grid_quadrature import AgeGrid, Profile

log = logging.getLogger(__name__)


def get_profile(spec, grid: AgeGrid) -> Profile:
    """Turn a validated profile spec (or a bare number) into values on `grid`."""
    if isinstance(spec, (int, float)):
        spec = ConstantShape(shape="constant", value=spec)
    shape = getattr(spec, "shape", None)
    if shape == "constant":
        return grid.constant(spec.value)
    elif shape == "piecewise_linear":
        ages, values = zip(*spec.breakpoints)
        log.debug("piecewise-linear profile through %d breakpoints", len(ages))
        return grid.from_function(lambda a: np.interp(a, ages, values))
    elif shape == "exponential":
        return grid.from_function(lambda a: spec.amplitude * np.exp(spec.rate * a) + spec.offset)
    else:
        raise ValueError(f"❌ Unknown profile shape: {shape}")


def constant_value(spec) -> Optional[float]:
    """The value of a constant spec, None for any age-dependent shape."""
    if isinstance(spec, ConstantShape):
        return spec.value
    if isinstance(spec, PiecewiseLinearShape) and len({v for _, v in spec.breakpoints}) == 1:
        return spec.breakpoints[0][1]
    if isinstance(spec, ExponentialShape) and (spec.rate == 0 or spec.amplitude == 0):
        return spec.amplitude * (spec.rate == 0) + spec.offset
    return None
