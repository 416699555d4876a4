# src/model/steady_state.py
"""
Steady states of the normalised SEQIR system with separable mixing, φ(a) = h·k₁(a).

The endemic condition reduces to one scalar equation G(h) = 1 where

    G(h) = ∫ k₂(b) U(b) ĩ_h(b) db

and ĩ_h is the infective profile driven by k₁·s_h instead of φ·s_h (so i_h = h·ĩ_h).
G(0) is R₀, evaluated by the same code path.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.optimize import bisect

from src.errors import DegenerateDemography, NoBracket, NoInfection, NotConverged
from src.model.demography import Demography, survival
from src.model.lyapunov import compute_weights
from src.model.transient_dynamics import CLAMP_EPS, COMPARTMENTS, EpiParams
from src.numerics.grid_quadrature import (
    Profile,
    cumulative_integral,
    exponential_convolution,
    integrate,
)

log = logging.getLogger(__name__)

ROOT_TOLERANCE = 1e-10
H_CEILING = 1e6


@dataclass(frozen=True, eq=False)
class SteadyState:
    h: float
    phi: Profile
    s: Profile
    e: Profile
    q: Profile
    i: Profile
    r: Profile

    @property
    def grid(self):
        return self.s.grid

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"a": self.grid.nodes})
        for name in COMPARTMENTS:
            frame[name] = getattr(self, name).values
        return frame


class R0Breakdown(BaseModel):
    """R₀ split into the direct route E → I (r1) and the quarantine route E → Q → I (r2)."""

    model_config = ConfigDict(frozen=True)

    r0: float
    r1: float
    r2: float

    @model_validator(mode="after")
    def _routes_add_up(self):
        if min(self.r0, self.r1, self.r2) < 0:
            raise ValueError("reproduction numbers must be ≥ 0")
        if abs(self.r0 - (self.r1 + self.r2)) > 1e-12 * max(1.0, self.r0):
            raise ValueError("r0 must equal r1 + r2")
        return self


def _susceptible(h: float, params: EpiParams) -> Profile:
    return (-cumulative_integral(h * params.k1)).map(np.exp)


def _cascade(drive: Profile, params: EpiParams) -> tuple[Profile, Profile, Profile, Profile]:
    """(e, q, i_direct, i_quarantine) driven by an infection inflow `drive` into E."""
    e = exponential_convolution(drive, params.mu1 + params.q1)
    q = exponential_convolution(params.q1 * e, params.gamma1 + params.gamma2)
    i_direct = exponential_convolution(params.mu1 * e, params.gamma)
    i_quarantine = exponential_convolution(params.gamma1 * q, params.gamma)
    return e, q, i_direct, i_quarantine


def steady_profiles(h: float, params: EpiParams) -> SteadyState:
    """
    s = exp(-∫φ), then e, q, i as the iterated exponential convolutions of the steady
    system and r = 1 - s - e - q - i.
    """
    if not h >= 0:
        raise ValueError(f"h must be ≥ 0, got {h}")
    phi = h * params.k1
    s = _susceptible(h, params)
    e, q, i_direct, i_quarantine = _cascade(phi * s, params)
    i = i_direct + i_quarantine
    r = 1.0 - s - e - q - i
    r = r.map(lambda v: np.where((v < 0) & (v > -CLAMP_EPS), 0.0, v))
    return SteadyState(h=float(h), phi=phi, s=s, e=e, q=q, i=i, r=r)


def _routes(h: float, params: EpiParams, U: Profile) -> tuple[float, float]:
    _, _, i_direct, i_quarantine = _cascade(params.k1 * _susceptible(h, params), params)
    weight = params.k2 * U
    return integrate(weight * i_direct), integrate(weight * i_quarantine)


def characteristic_value(h: float, params: EpiParams, U: Profile) -> float:
    """G(h); endemic states satisfy G(h) = 1 and G(0) = R₀."""
    if not h >= 0:
        raise ValueError(f"h must be ≥ 0, got {h}")
    direct, quarantine = _routes(h, params, U)
    return direct + quarantine


def r0_quadrature(params: EpiParams, U: Profile) -> float:
    return characteristic_value(0.0, params, U)


def r0_quadrature_breakdown(params: EpiParams, U: Profile) -> R0Breakdown:
    r1, r2 = _routes(0.0, params, U)
    return R0Breakdown(r0=r1 + r2, r1=r1, r2=r2)


def r0_reordered(params: EpiParams, U: Profile) -> float:
    """
    R₀ with the outermost integral taken over the age of infection: ∫ k₁ α₁ da,
    where α₁ collects the tail integrals from the Lyapunov weights.
    """
    return integrate(params.k1 * compute_weights(params, U).alpha1)


def r0_closed_form(
    mu: float,
    gamma: float,
    mu1: float,
    q1: float,
    gamma1: float,
    gamma2: float,
    k2: float,
) -> R0Breakdown:
    """Constant parameters with U(a) = μ e^{-μa}: the cancelled final forms only."""
    values = dict(mu=mu, gamma=gamma, mu1=mu1, q1=q1, gamma1=gamma1, gamma2=gamma2, k2=k2)
    for name, value in values.items():
        if not value >= 0:
            raise ValueError(f"{name} must be ≥ 0, got {value}")
    if mu == 0:
        raise DegenerateDemography("closed-form R0 needs mu > 0 (no stable age distribution otherwise)")

    r1 = k2 * mu1 / ((mu + gamma) * (mu + mu1 + q1))
    r2 = k2 * gamma1 * q1 / ((mu + gamma) * (mu + gamma1 + gamma2) * (mu + mu1 + q1))
    return R0Breakdown(r0=r1 + r2, r1=r1, r2=r2)


def solve_endemic(params: EpiParams, U: Profile) -> SteadyState | None:
    """Endemic steady state, or None when R₀ ≤ 1 and only the disease-free state exists."""
    r0 = r0_quadrature(params, U)
    if r0 <= 1.0:
        log.info("R0 = %.6g ≤ 1: no endemic state", r0)
        return None

    h_hi = 1.0
    while characteristic_value(h_hi, params, U) >= 1.0:
        h_hi *= 2.0
        if h_hi > H_CEILING:
            raise NoBracket(f"G(h) ≥ 1 up to h = {H_CEILING:g}; check the contact kernels")

    h_star = bisect(
        lambda h: characteristic_value(h, params, U) - 1.0,
        0.0,
        h_hi,
        xtol=1e-300,
        rtol=1e-15,
        maxiter=400,
    )
    residual = abs(characteristic_value(h_star, params, U) - 1.0)
    if residual > ROOT_TOLERANCE:
        raise NotConverged(f"|G(h*) - 1| = {residual:.3g} after bisection", [h_star])
    log.info("endemic h* = %.12g (R0 = %.6g)", h_star, r0)
    return steady_profiles(h_star, params)


def average_age_of_infection(ss: SteadyState, d: Demography) -> float:
    """𝒜 = ∫ a φ s π da / ∫ φ s π da, with π the survival."""
    if ss.h <= 0:
        raise NoInfection("average age of infection needs h > 0")
    weight = ss.phi * ss.s * survival(d)
    denominator = integrate(weight)
    if denominator <= 0:
        raise NoInfection("force of infection vanishes on the whole age range")
    return integrate(weight * ss.grid.ages()) / denominator


def average_age_closed_form(mu: float, phi: float) -> float:
    """Constant mortality and force of infection: 𝒜 = 1 / (φ + μ)."""
    if mu < 0 or phi < 0 or mu + phi == 0:
        raise ValueError("need mu, phi ≥ 0 and not both zero")
    return 1.0 / (phi + mu)
