# src/model/transient_dynamics.py
"""
Normalised SEQIR system (fractions of the stable age density) integrated forward
in time along characteristics.

The time step is locked to the age step, so node k at t + Δ takes its value from
node k-1 at t. Each compartment decays exactly over the cell and its inflow is
the mass that left the upstream compartment during the same cell, spread at a
constant rate. The step therefore moves mass between compartments without
creating or losing any, and every compartment stays non-negative. r is taken
from conservation; r's own equation is kept as the residual check.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from src.errors import ConservationViolation, QuarantineIgnoredWarning
from src.numerics.grid_quadrature import AgeGrid, Profile, integrate

log = logging.getLogger(__name__)

COMPARTMENTS = ("s", "e", "q", "i", "r")
CLAMP_EPS = 1e-10
EMIT_TOLERANCE = 1e-8
R_RESIDUAL_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class EpiParams:
    """
    Scalar rates (per year) and the separable contact kernel k(a, b) = k₁(a) k₂(b).

    mu1: progression from exposure to onset of symptoms (E → I)
    q1: recruitment of exposed individuals into quarantine (E → Q)
    gamma1: quarantined individuals becoming infective (Q → I)
    gamma2: quarantined individuals recovering (Q → R)
    gamma: recovery of infectives (I → R)
    """

    mu1: float
    q1: float
    gamma1: float
    gamma2: float
    gamma: float
    k1: Profile
    k2: Profile

    def __post_init__(self):
        for name in ("mu1", "q1", "gamma1", "gamma2", "gamma"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"{name}: rate must be ≥ 0 (got {value})")
        if self.k1.grid != self.k2.grid:
            raise ValueError("k1 and k2 must share one AgeGrid")
        if self.k1.min() < 0 or self.k2.min() < 0:
            raise ValueError("contact kernels k1, k2 must be ≥ 0")

    @property
    def grid(self) -> AgeGrid:
        return self.k1.grid

    def scaled_contacts(self, factor: float) -> "EpiParams":
        """Scale k₂ by `factor`; R₀ is linear in k₂, so this places R₀ wherever needed."""
        return replace(self, k2=factor * self.k2)

    def quarantine_free(self) -> "EpiParams":
        if self.q1 or self.gamma1 or self.gamma2:
            warnings.warn(
                "the vaccination model has no quarantine class; q1, gamma1 and gamma2 are set to 0",
                QuarantineIgnoredWarning,
                stacklevel=2,
            )
        return replace(self, q1=0.0, gamma1=0.0, gamma2=0.0)


@dataclass(frozen=True, eq=False)
class EpiState:
    """Fractions s, e, q, i, r of the stable density at time t (years)."""

    s: Profile
    e: Profile
    q: Profile
    i: Profile
    r: Profile
    t: float = 0.0

    @property
    def grid(self) -> AgeGrid:
        return self.s.grid

    def total(self) -> np.ndarray:
        return self.s.values + self.e.values + self.q.values + self.i.values + self.r.values

    def conservation_error(self) -> float:
        return float(np.abs(self.total() - 1.0).max())

    def check(self, tolerance: float = EMIT_TOLERANCE) -> None:
        if self.conservation_error() > tolerance:
            raise ConservationViolation(
                f"s+e+q+i+r deviates from 1 by {self.conservation_error():.3g}", self.t
            )
        for name in COMPARTMENTS:
            values = getattr(self, name).values
            if values.min() < -CLAMP_EPS or values.max() > 1 + CLAMP_EPS:
                raise ConservationViolation(f"compartment {name} left [0, 1]", self.t)
        if self.s[0] != 1.0 or any(getattr(self, n)[0] != 0.0 for n in COMPARTMENTS[1:]):
            raise ConservationViolation("boundary condition s(0)=1 violated", self.t)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"a": self.grid.nodes})
        frame.insert(0, "t", self.t)
        for name in COMPARTMENTS:
            frame[name] = getattr(self, name).values
        return frame


@dataclass
class Trajectory:
    """Sampled states of one simulation run, timestamps strictly increasing."""

    states: list[EpiState] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, index) -> EpiState:
        return self.states[index]

    @property
    def times(self) -> np.ndarray:
        return np.array([state.t for state in self.states])

    def to_frame(self) -> pd.DataFrame:
        return pd.concat([state.to_frame() for state in self.states], ignore_index=True)


def disease_free_state(grid: AgeGrid, t: float = 0.0) -> EpiState:
    zero = grid.constant(0.0)
    return EpiState(s=grid.constant(1.0), e=zero, q=zero, i=zero, r=zero, t=t)


def seeded_state(
    grid: AgeGrid,
    compartment: str = "e",
    mass: float = 1e-4,
    center: float = 25.0,
    width: float = 2.5,
) -> EpiState:
    """Disease-free state with a Gaussian bump of total mass `mass` moved from s into `compartment`."""
    if compartment not in COMPARTMENTS[1:]:
        raise ValueError(f"cannot seed compartment {compartment!r}")
    bump = np.exp(-0.5 * ((grid.nodes - center) / width) ** 2)
    bump[0] = 0.0
    area = integrate(grid.profile(bump))
    if mass > 0 and area <= 0:
        raise ValueError("seed bump lies outside the age grid")
    bump = bump * (mass / area) if mass > 0 else np.zeros_like(bump)
    if bump.max() > 1:
        raise ValueError("seed is too concentrated: a fraction exceeds 1")
    state = disease_free_state(grid)
    return replace(state, s=grid.profile(1.0 - bump), **{compartment: grid.profile(bump)})


def force_of_infection(state: EpiState, params: EpiParams, U: Profile) -> Profile:
    """φ(a) = k₁(a) ∫ k₂(σ) U(σ) i(σ) dσ."""
    return integrate(params.k2 * U * state.i) * params.k1


def _inflow_weight(rate: float, dt: float) -> float:
    """Fraction of a cell's inflow still present at the cell end when it arrives at a constant rate."""
    x = rate * dt
    return 1.0 if x == 0 else float(-np.expm1(-x) / x)


def _advance(prev: np.ndarray, inflow: np.ndarray, rate: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """(value at the cell end, mass that left during the cell) for a compartment with sink `rate`."""
    weight = _inflow_weight(rate, dt)
    value = np.exp(-rate * dt) * prev + weight * inflow
    outflow = -np.expm1(-rate * dt) * prev + (1.0 - weight) * inflow
    return value, outflow


def _split(outflow: np.ndarray, rate_a: float, rate_b: float) -> tuple[np.ndarray, np.ndarray]:
    total = rate_a + rate_b
    if total == 0:
        return np.zeros_like(outflow), np.zeros_like(outflow)
    return outflow * (rate_a / total), outflow * (rate_b / total)


def step(state: EpiState, params: EpiParams, U: Profile, dt: float | None = None) -> EpiState:
    """Advance every compartment by one characteristic step (dt must equal Δa)."""
    grid = state.grid
    if dt is None:
        dt = grid.step
    if not np.isclose(dt, grid.step, rtol=1e-12, atol=0.0):
        raise ValueError(f"dt = {dt} must equal the age step {grid.step}")

    phi = force_of_infection(state, params, U).values
    s, e, q, i, r = (getattr(state, name).values for name in COMPARTMENTS)
    mu1, q1, g1, g2, gamma = params.mu1, params.q1, params.gamma1, params.gamma2, params.gamma
    t_new = state.t + dt

    s_cell = s[:-1] * np.exp(-0.5 * dt * (phi[:-1] + phi[1:]))
    infected = s[:-1] - s_cell
    e_cell, e_out = _advance(e[:-1], infected, mu1 + q1, dt)
    e_to_q, e_to_i = _split(e_out, q1, mu1)
    q_cell, q_out = _advance(q[:-1], e_to_q, g1 + g2, dt)
    q_to_i, q_to_r = _split(q_out, g1, g2)
    i_cell, i_out = _advance(i[:-1], e_to_i + q_to_i, gamma, dt)

    new = {name: np.zeros_like(s) for name in COMPARTMENTS}
    new["s"][0] = 1.0
    for name, cell in zip(COMPARTMENTS[:4], (s_cell, e_cell, q_cell, i_cell)):
        new[name][1:] = cell
    new["r"] = 1.0 - new["s"] - new["e"] - new["q"] - new["i"]
    new["r"][0] = 0.0

    # r's own equation: the residual is the mass the step failed to conserve
    r_cell = r[:-1] + i_out + q_to_r
    residual = float(np.abs(r_cell - new["r"][1:]).max())
    if residual > R_RESIDUAL_TOLERANCE:
        raise ConservationViolation(f"s+e+q+i+r deviates from 1 by {residual:.3g} (r-equation residual)", t_new)

    new["r"] = np.where((new["r"] < 0) & (new["r"] > -CLAMP_EPS), 0.0, new["r"])
    for name in COMPARTMENTS:
        if new[name].min() < -CLAMP_EPS:
            raise ConservationViolation(f"compartment {name} left [0, 1]", t_new)

    return EpiState(t=t_new, **{name: grid.profile(values) for name, values in new.items()})


def simulate(
    initial: EpiState,
    params: EpiParams,
    U: Profile,
    t_end: float,
    sample_every: int = 1,
) -> Trajectory:
    """
    Repeated `step` from `initial` until t_end (rounded to whole steps). Every
    `sample_every`-th state is stored, plus the final one.
    """
    if t_end < 0:
        raise ValueError("t_end must be ≥ 0")
    if sample_every < 1:
        raise ValueError("sample_every must be ≥ 1")

    dt = initial.grid.step
    n_steps = int(round(t_end / dt))
    trajectory = Trajectory([initial])
    state = initial
    log.info("simulating %d steps of %.4g years", n_steps, dt)
    for k in range(1, n_steps + 1):
        state = step(state, params, U, dt)
        if k % sample_every == 0 or k == n_steps:
            state.check(EMIT_TOLERANCE)
            trajectory.states.append(state)
    return trajectory
