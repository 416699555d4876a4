# src/vaccination/kernels.py
"""
Delta-peak vaccination policies and the linear kernels of the vaccination problem.

A policy vaccinates a fraction 1 - e^{-c_j} of the not-yet-vaccinated susceptible
and exposed individuals at age A_j. With ψ(a) = e^{-∫₀^a v} v(a) every quantity of
interest is affine in the atom weights of ψ:

    cost          C(ψ) = Σ w_j C₁(A_j)
    prevalence    F̃(v) = F̃(0) - Σ w_j F₁(A_j)
    consistency   H̃(v) = H̃(0) - Σ w_j H₁(A_j)

The vaccination model is quarantine-free and uses the per-capita normalisation of
the steady system, with the force of infection frozen at φ = h·k₁.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy.signal import lfilter

from src.errors import KernelMismatch
from src.model.demography import Demography, stable_age_distribution
from src.model.transient_dynamics import EpiParams
from src.numerics.grid_quadrature import AgeGrid, Profile, cumulative_integral, exponential_convolution, integrate

log = logging.getLogger(__name__)

MAX_ATOMS = 3
MISMATCH_TOLERANCE = 1e-6
MISMATCH_SAMPLES = 20


class PolicyAtom(NamedTuple):
    age: float
    intensity: float  # math.inf depletes everyone left

    @property
    def deplete(self) -> bool:
        return math.isinf(self.intensity)


class PsiAtom(NamedTuple):
    age: float
    weight: float


def _check_ages(ages: list[float]) -> None:
    if len(ages) > MAX_ATOMS:
        raise ValueError(f"at most {MAX_ATOMS} vaccination ages, got {len(ages)}")
    if any(not (np.isfinite(a) and a >= 0) for a in ages):
        raise ValueError("vaccination ages must be finite and ≥ 0")
    if any(b <= a for a, b in zip(ages, ages[1:])):
        raise ValueError("vaccination ages must be strictly increasing")


@dataclass(frozen=True)
class VaccinationPolicy:
    atoms: tuple[PolicyAtom, ...] = ()

    def __post_init__(self):
        atoms = tuple(PolicyAtom(float(a), float(c)) for a, c in self.atoms)
        _check_ages([atom.age for atom in atoms])
        for j, atom in enumerate(atoms):
            if not atom.intensity > 0:
                raise ValueError(f"intensity at age {atom.age:g} must be > 0")
            if atom.deplete and j != len(atoms) - 1:
                raise ValueError("nobody is left to vaccinate after a depleting atom")
        object.__setattr__(self, "atoms", atoms)

    @property
    def ages(self) -> list[float]:
        return [atom.age for atom in self.atoms]

    def __len__(self) -> int:
        return len(self.atoms)


@dataclass(frozen=True)
class PsiMeasure:
    atoms: tuple[PsiAtom, ...] = ()

    def __post_init__(self):
        atoms = tuple(PsiAtom(float(a), float(w)) for a, w in self.atoms)
        _check_ages([atom.age for atom in atoms])
        if any(not atom.weight > 0 for atom in atoms):
            raise ValueError("ψ weights must be > 0")
        if sum(atom.weight for atom in atoms) > 1.0 + 1e-12:
            raise ValueError("ψ has total mass Q > 1")
        object.__setattr__(self, "atoms", atoms)

    @property
    def ages(self) -> np.ndarray:
        return np.array([atom.age for atom in self.atoms], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([atom.weight for atom in self.atoms], dtype=float)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return len(self.atoms)


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous piecewise constant: values[0] before breakpoints[0], values[j+1] from breakpoints[j]."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("a step function needs one more value than breakpoints")

    def __call__(self, age):
        index = np.searchsorted(np.asarray(self.breakpoints, dtype=float), age, side="right")
        return np.asarray(self.values, dtype=float)[index]

    def allclose(self, other: "StepFunction", atol: float = 1e-12) -> bool:
        return self.breakpoints == other.breakpoints and bool(
            np.allclose(self.values, other.values, rtol=0.0, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class CostWeights:
    """g1, g2: cost per vaccinated susceptible/exposed; f: weight of one infective; F_bar: prevalence cap."""

    g1: Profile
    g2: Profile
    f: Profile
    F_bar: float

    def __post_init__(self):
        for name in ("g1", "g2", "f"):
            if getattr(self, name).min() < 0:
                raise ValueError(f"cost weight {name} must be ≥ 0")
        if not self.F_bar > 0:
            raise ValueError(f"F_bar must be > 0, got {self.F_bar}")

    def with_cap(self, F_bar: float) -> "CostWeights":
        return replace(self, F_bar=F_bar)


class PolicyValues(NamedTuple):
    cost: float
    prevalence: float  # F(ψ), the reduction of F̃
    consistency: float  # H(ψ), the reduction of H̃
    mass: float  # Q(ψ)


@dataclass(frozen=True, eq=False)
class _CellTerms:
    """What the exact partial-cell integral needs: source u = μ₁e₀, its decay and the backward tails."""

    u: np.ndarray
    decay: float
    tail_f: np.ndarray
    tail_h: np.ndarray


@dataclass(frozen=True, eq=False)
class VaccKernels:
    C1: Profile
    F1: Profile
    H1: Profile
    F0: float
    H0: float
    h: float
    cells: Optional[_CellTerms] = field(default=None, repr=False)

    @property
    def grid(self) -> AgeGrid:
        return self.C1.grid

    def _locate(self, ages) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ages = np.atleast_1d(np.asarray(ages, dtype=float))
        if np.any(ages < 0) or np.any(ages >= self.grid.a_max):
            raise ValueError(f"vaccination ages must lie in [0, {self.grid.a_max:g})")
        position = ages / self.grid.step
        cell = np.clip(np.floor(position).astype(int), 0, self.grid.n - 2)
        return ages, cell, position - cell

    def _partial(self, ages, nodes: Profile, tail: np.ndarray) -> np.ndarray:
        ages, k, t = self._locate(ages)
        if self.cells is None:
            return np.interp(ages, self.grid.nodes, nodes.values)
        u, d, dx = self.cells.u, self.cells.decay, self.grid.step
        return nodes.values[k + 1] + dx * tail[k + 1] * (
            u[k] * d * 0.5 * (1 - t) ** 2 + u[k + 1] * 0.5 * (1 - t**2)
        )

    def cost_at(self, ages) -> np.ndarray:
        ages, _, _ = self._locate(ages)
        return np.interp(ages, self.grid.nodes, self.C1.values)

    def prevalence_at(self, ages) -> np.ndarray:
        return self._partial(ages, self.F1, None if self.cells is None else self.cells.tail_f)

    def consistency_at(self, ages) -> np.ndarray:
        return self._partial(ages, self.H1, None if self.cells is None else self.cells.tail_h)


# --- ψ and policies ---------------------------------------------------------

def policy_to_psi(p: VaccinationPolicy) -> PsiMeasure:
    """w_j = e^{-(c_1+...+c_{j-1})} (1 - e^{-c_j}); an infinite c_j takes the whole remaining mass."""
    remaining = 1.0
    atoms = []
    for atom in p.atoms:
        weight = remaining if atom.deplete else remaining * -math.expm1(-atom.intensity)
        atoms.append(PsiAtom(atom.age, weight))
        remaining -= weight
    return PsiMeasure(tuple(atoms))


def psi_to_policy(psi: PsiMeasure, deplete_tolerance: float = 1e-12) -> VaccinationPolicy:
    remaining = 1.0
    atoms = []
    for atom in psi.atoms:
        if atom.weight >= remaining * (1.0 - deplete_tolerance):
            atoms.append(PolicyAtom(atom.age, math.inf))
            remaining = 0.0
        else:
            atoms.append(PolicyAtom(atom.age, -math.log1p(-atom.weight / remaining)))
            remaining -= atom.weight
    return VaccinationPolicy(tuple(atoms))


def _as_psi(policy: Union[VaccinationPolicy, PsiMeasure]) -> PsiMeasure:
    return policy_to_psi(policy) if isinstance(policy, VaccinationPolicy) else policy


def survival_steps(policy: VaccinationPolicy) -> StepFunction:
    """D(a) = e^{-∫₀^a v}: multiplied by e^{-c_j} at every A_j."""
    values = [1.0]
    for atom in policy.atoms:
        values.append(0.0 if atom.deplete else values[-1] * math.exp(-atom.intensity))
    return StepFunction(tuple(policy.ages), tuple(values))


def one_minus_cumulative_psi(psi: PsiMeasure) -> StepFunction:
    """1 - ∫₀^a ψ."""
    values = [1.0]
    for atom in psi.atoms:
        values.append(values[-1] - atom.weight)
    return StepFunction(tuple(float(a) for a in psi.ages), tuple(values))


# --- profiles and kernels ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class VaccinatedState:
    """Per-capita steady profiles under a delta-peak policy; z is the vaccinated-immune fraction."""

    s: Profile
    e: Profile
    i: Profile
    r: Profile
    z: Profile


def _unvaccinated(h: float, params: EpiParams) -> tuple[Profile, Profile]:
    s0 = (-cumulative_integral(h * params.k1)).map(np.exp)
    e0 = exponential_convolution(h * params.k1 * s0, params.mu1)
    return s0, e0


def _backward_tail(weight: np.ndarray, dx: float, decay: float) -> np.ndarray:
    """B_j = Σ_{m ≥ j} W_m weight_m decay^{m-j}, W the trapezoid weights."""
    trapezoid = np.full(weight.shape, dx)
    trapezoid[[0, -1]] = 0.5 * dx
    return lfilter([1.0], [1.0, -decay], (trapezoid * weight)[::-1])[::-1]


def vaccinated_profiles(
    h: float,
    params: EpiParams,
    U: Profile,
    policy: Union[VaccinationPolicy, PsiMeasure],
) -> VaccinatedState:
    """
    s = D s₀ and e = D e₀ with D = 1 - ∫ψ; i integrates μ₁ D e₀ cell by cell, splitting
    each cell at the atom so the jump of D is integrated exactly.
    """
    if params.q1 or params.gamma1 or params.gamma2:
        raise ValueError("vaccinated profiles need quarantine-free parameters")
    psi = _as_psi(policy)
    grid = U.grid
    dx, nodes = grid.step, grid.nodes
    s0, e0 = _unvaccinated(h, params)
    u = params.mu1 * e0.values
    decay = float(np.exp(-params.gamma * dx))

    drive = 0.5 * dx * (decay * u[:-1] + u[1:])
    D = np.ones(grid.n)
    z = np.zeros(grid.n)
    uncovered = s0.values + e0.values
    for age, weight in psi.atoms:
        if age >= grid.a_max:
            raise ValueError(f"vaccination age {age:g} outside [0, {grid.a_max:g})")
        position = age / dx
        k = min(int(np.floor(position)), grid.n - 2)
        t = position - k
        first = k if t == 0 else k + 1
        D[first:] -= weight
        z[first:] += weight * float(np.interp(age, nodes, uncovered))
        partial = dx * (decay * u[k] * 0.5 * (1 - t) ** 2 + u[k + 1] * 0.5 * (1 - t**2))
        drive[k] -= weight * partial
        drive[k + 1 :] -= weight * 0.5 * dx * (decay * u[k + 1 : -1] + u[k + 2 :])

    i = lfilter([1.0], [1.0, -decay], np.concatenate(([0.0], drive)))
    s = D * s0.values
    e = D * e0.values
    r = 1.0 - s - e - i - z
    return VaccinatedState(
        s=grid.profile(s), e=grid.profile(e), i=grid.profile(i), r=grid.profile(r), z=grid.profile(z)
    )


def build_kernels(
    h: float,
    params: EpiParams,
    d: Demography,
    w: CostWeights,
    check_samples: int = MISMATCH_SAMPLES,
    seed: int = 0,
) -> VaccKernels:
    """
    Linearise cost, prevalence and force-of-infection consistency in ψ at ambient h,
    then certify the affine form against directly evaluated vaccinated profiles.
    """
    if not h >= 0:
        raise ValueError(f"h must be ≥ 0, got {h}")
    params = params.quarantine_free()
    U = stable_age_distribution(d)
    grid, dx = U.grid, U.grid.step

    s0, e0 = _unvaccinated(h, params)
    u = params.mu1 * e0.values
    decay = float(np.exp(-params.gamma * dx))
    cell_source = 0.5 * dx * (decay * u[:-1] + u[1:])

    fU = (w.f * U).values
    hU = (params.k2 * U).values
    tail_f = _backward_tail(fU, dx, decay)
    tail_h = _backward_tail(hU, dx, decay)

    def node_kernel(tail: np.ndarray) -> np.ndarray:
        values = np.zeros(grid.n)
        values[:-1] = np.cumsum((cell_source * tail[1:])[::-1])[::-1]
        return values

    F1 = grid.profile(node_kernel(tail_f))
    H1 = grid.profile(node_kernel(tail_h))
    kernels = VaccKernels(
        C1=U * (w.g1 * s0 + w.g2 * e0),
        F1=F1,
        H1=H1,
        F0=float(F1[0]),
        H0=float(H1[0]),
        h=float(h),
        cells=_CellTerms(u=u, decay=decay, tail_f=tail_f, tail_h=tail_h),
    )
    log.debug("kernels at h = %.6g: F0 = %.6g, H0 = %.6g", h, kernels.F0, kernels.H0)

    rng = np.random.default_rng(seed)
    for age, weight in zip(rng.uniform(0.0, grid.a_max, check_samples), rng.uniform(0.05, 1.0, check_samples)):
        state = vaccinated_profiles(h, params, U, PsiMeasure(((age, weight),)))
        checks = (
            ("prevalence", integrate(w.f * U * state.i), kernels.F0 - weight * kernels.prevalence_at(age)[0], kernels.F0),
            ("consistency", integrate(params.k2 * U * state.i), kernels.H0 - weight * kernels.consistency_at(age)[0], kernels.H0),
        )
        for name, direct, affine, scale in checks:
            if abs(direct - affine) > MISMATCH_TOLERANCE * scale + 1e-14:
                raise KernelMismatch(
                    f"{name} kernel disagrees with direct evaluation at age {age:.4g}, weight {weight:.3g}: "
                    f"{direct:.12g} vs {affine:.12g}"
                )
    return kernels


def evaluate_policy(policy: Union[VaccinationPolicy, PsiMeasure], k: VaccKernels) -> PolicyValues:
    psi = _as_psi(policy)
    if not len(psi):
        return PolicyValues(0.0, 0.0, 0.0, 0.0)
    weights = psi.weights
    return PolicyValues(
        cost=float(weights @ k.cost_at(psi.ages)),
        prevalence=float(weights @ k.prevalence_at(psi.ages)),
        consistency=float(weights @ k.consistency_at(psi.ages)),
        mass=psi.mass,
    )
