# src/model/demography.py
"""
Stable population structure: survival, the stable age density U(a) and the net
reproduction rate of a stationary population.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from src.errors import DegenerateDemography, NetReproductionRateWarning, TruncationWarning
from src.numerics.grid_quadrature import AgeGrid, Profile, cumulative_integral, integrate

log = logging.getLogger(__name__)

DEFAULT_SURVIVAL_TOLERANCE = 1e-6
NET_REPRODUCTION_SLACK = 1e-3


@dataclass(frozen=True, eq=False)
class Demography:
    """
    Mortality μ(a) and fertility β(a), both per year.

    The age axis is truncated at the grid's a_max, so the survival at a_max must be
    negligible: e^{-∫μ} ≤ survival_tolerance stands in for ∫_0^∞ μ = ∞.
    """

    mu: Profile
    beta: Profile
    survival_tolerance: float = DEFAULT_SURVIVAL_TOLERANCE

    def __post_init__(self):
        if self.mu.grid != self.beta.grid:
            raise ValueError("mu and beta must share one AgeGrid")
        if self.mu.min() < 0:
            raise ValueError("mortality rate must be ≥ 0")
        if self.beta.min() < 0:
            raise ValueError("fertility rate must be ≥ 0")
        if not 0 < self.survival_tolerance < 1:
            raise ValueError("survival_tolerance must lie in (0, 1)")

        tail = float(np.exp(-integrate(self.mu)))
        if tail > self.survival_tolerance:
            raise DegenerateDemography(
                f"survival at a_max = {self.grid.a_max:g} is {tail:.3g} > {self.survival_tolerance:g}; "
                "extend the grid or increase mortality"
            )
        if self.survival_tolerance > DEFAULT_SURVIVAL_TOLERANCE:
            warnings.warn(
                f"relaxed survival tolerance {self.survival_tolerance:g}: tail mass beyond "
                f"a_max is {tail:.3g} and enters every tolerance budget",
                TruncationWarning,
                stacklevel=2,
            )

    @property
    def grid(self) -> AgeGrid:
        return self.mu.grid


def survival(d: Demography) -> Profile:
    """π(a) = exp(-∫_0^a μ)."""
    return (-cumulative_integral(d.mu)).map(np.exp)


def stable_age_distribution(d: Demography) -> Profile:
    """U(a) = β₀ π(a) with β₀ = 1 / ∫π, so that ∫U = 1 under the library's quadrature."""
    pi = survival(d)
    beta0 = 1.0 / integrate(pi)
    log.debug("stable age distribution: beta0 = %.12g", beta0)
    return beta0 * pi


def net_reproduction_rate(d: Demography) -> float:
    """R_net = ∫ β(a) π(a) da. Stationarity assumes 1; anything else is only warned about."""
    r_net = integrate(d.beta * survival(d))
    if abs(r_net - 1.0) > NET_REPRODUCTION_SLACK:
        warnings.warn(
            f"net reproduction rate is {r_net:.6g}, not 1: the stationary population assumed "
            "by the steady-state theory does not hold for this demography",
            NetReproductionRateWarning,
            stacklevel=2,
        )
    return r_net
