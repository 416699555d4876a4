# src/model/lyapunov.py
"""
Lyapunov functional V = ∫ (α₁ e + α₂ q + α₃ i) da for the disease-free state.

The weights solve, backwards from a_max,

    α₃' = γ α₃ - k₂ U
    α₂' = (γ₁ + γ₂) α₂ - γ₁ α₃
    α₁' = (μ₁ + q₁) α₁ - q₁ α₂ - μ₁ α₃

which gives V̇ = (∫ k₁ α₁ s - 1) ∫ k₂ U i ≤ (R₀ - 1) ∫ k₂ U i along solutions.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.model.transient_dynamics import EpiParams, EpiState, Trajectory
from src.numerics.grid_quadrature import Profile, exponential_tail, integrate

log = logging.getLogger(__name__)

DECREASE_TOLERANCE = 1e-4


@dataclass(frozen=True, eq=False)
class LyapunovWeights:
    alpha1: Profile
    alpha2: Profile
    alpha3: Profile


class LyapunovSample(BaseModel):
    t: float
    V: float
    bound: float
    dV_dt: Optional[float] = None


class LyapunovReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    r0: float
    tolerance: float
    max_violation: float
    passed: bool = Field(serialization_alias="pass")
    samples: list[LyapunovSample]


def compute_weights(params: EpiParams, U: Profile) -> LyapunovWeights:
    """α₃ first, then α₂ from α₃, then α₁ from both: all as exponential tail integrals."""
    alpha3 = exponential_tail(params.k2 * U, params.gamma)
    alpha2 = exponential_tail(params.gamma1 * alpha3, params.gamma1 + params.gamma2)
    alpha1 = exponential_tail(params.q1 * alpha2 + params.mu1 * alpha3, params.mu1 + params.q1)
    return LyapunovWeights(alpha1=alpha1, alpha2=alpha2, alpha3=alpha3)


def evaluate_V(state: EpiState, w: LyapunovWeights) -> float:
    return integrate(w.alpha1 * state.e + w.alpha2 * state.q + w.alpha3 * state.i)


def lyapunov_integral(s: Profile, w: LyapunovWeights, params: EpiParams) -> float:
    """∫ k₁ α₁ s da; equals R₀ at s ≡ 1 and never exceeds it for 0 ≤ s ≤ 1."""
    return integrate(params.k1 * w.alpha1 * s)


def weight_residuals(w: LyapunovWeights, params: EpiParams, U: Profile) -> dict[str, float]:
    """Sup-norm residuals of the three weight equations, central differences on interior nodes."""
    dx = U.grid.step
    a1, a2, a3 = w.alpha1.values, w.alpha2.values, w.alpha3.values
    d1, d2, d3 = (np.gradient(x, dx) for x in (a1, a2, a3))
    k2U = (params.k2 * U).values
    residuals = {
        "alpha3": d3 - params.gamma * a3 + k2U,
        "alpha2": d2 - (params.gamma1 + params.gamma2) * a2 + params.gamma1 * a3,
        "alpha1": d1 - (params.mu1 + params.q1) * a1 + params.q1 * a2 + params.mu1 * a3,
    }
    return {name: float(np.abs(r[2:-2]).max()) for name, r in residuals.items()}


def verify_decrease(
    traj: Trajectory,
    w: LyapunovWeights,
    params: EpiParams,
    U: Profile,
    r0: float,
    tolerance: float = DECREASE_TOLERANCE,
) -> LyapunovReport:
    """
    Compare the finite-difference rate ΔV/Δt between consecutive samples with the
    bound (R₀ - 1) ∫ k₂ i U averaged over the interval.
    """
    weight = params.k2 * U
    samples: list[LyapunovSample] = []
    max_violation = 0.0
    previous = None
    for state in traj:
        V = evaluate_V(state, w)
        bound = (r0 - 1.0) * integrate(weight * state.i)
        sample = LyapunovSample(t=state.t, V=V, bound=bound)
        if previous is not None:
            rate = (V - previous.V) / (state.t - previous.t)
            sample.dV_dt = rate
            max_violation = max(max_violation, rate - 0.5 * (bound + previous.bound))
        samples.append(sample)
        previous = sample

    passed = max_violation <= tolerance
    log.info("Lyapunov check: max violation %.3g (tolerance %.1g) -> %s", max_violation, tolerance, passed)
    return LyapunovReport(
        r0=r0,
        tolerance=tolerance,
        max_violation=max_violation,
        passed=passed,
        samples=samples,
    )
