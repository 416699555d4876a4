# src/vaccination/optimizer.py
"""
Cheapest delta-peak policy meeting the prevalence cap, its Kuhn-Tucker certificate,
and the outer loop that makes the force of infection consistent with the policy.

In ψ the problem is a linear programme over measures:

    minimise   Σ w_j C₁(A_j)
    subject to Σ w_j F₁(A_j) ≥ F̃(0) - F̄
               Σ w_j        ≤ 1
               Σ w_j H₁(A_j) = H̃(0) - h      (only with enforce_consistency)

A vertex solution over all grid ages carries at most one atom per constraint.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel
from scipy.optimize import linprog, minimize

from src.errors import Infeasible, NotConverged
from src.model.demography import Demography, stable_age_distribution
from src.model.steady_state import solve_endemic
from src.model.transient_dynamics import EpiParams
from src.vaccination.kernels import (
    CostWeights,
    PsiMeasure,
    VaccinationPolicy,
    VaccKernels,
    build_kernels,
    evaluate_policy,
    policy_to_psi,
    psi_to_policy,
)

log = logging.getLogger(__name__)

KKT_TOLERANCE = 1e-5
ATOM_THRESHOLD = 1e-12
MASS_SLACK = 1e-7
LP_METHOD = "highs-ds"


class Multipliers(BaseModel):
    """λ₁ ≥ 0 (prevalence cap), λ₂ ≤ 0 (Q ≤ 1), λ₃ free (consistency)."""

    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda3: float = 0.0


class KKTReport(BaseModel):
    stationarity: float
    support: float
    slackness_prevalence: float
    slackness_mass: float
    zero_sum: float
    sign: float
    tolerance: float
    passed: bool

    @property
    def failures(self) -> list[str]:
        checks = ("stationarity", "support", "slackness_prevalence", "slackness_mass", "zero_sum", "sign")
        return [name for name in checks if getattr(self, name) > self.tolerance]


@dataclass(frozen=True)
class OptimizationResult:

    policy: VaccinationPolicy
    psi: PsiMeasure
    multipliers: Multipliers
    kkt: KKTReport
    cost: float
    prevalence: float
    consistency: float
    mass: float
    h: float
    F0: float
    H0: float
    refined: bool = False


@dataclass(frozen=True)
class SelfConsistentResult:

    policy: VaccinationPolicy
    h: float
    h_endemic: float
    h_sequence: list[float]
    converged: bool
    result: OptimizationResult


def _scale(k: VaccKernels) -> float:
    return max(float(np.abs(k.C1.values).max()), np.finfo(float).tiny)


def _demand(k: VaccKernels, w: CostWeights) -> float:
    return k.F0 - w.F_bar


def _solve_lp(columns: dict[str, np.ndarray], k: VaccKernels, w: CostWeights, enforce_consistency: bool):
    A_ub = np.vstack([-columns["F"], np.ones_like(columns["C"])])
    b_ub = np.array([-_demand(k, w), 1.0])
    kwargs = {}
    if enforce_consistency:
        kwargs = dict(A_eq=columns["H"][None, :], b_eq=np.array([k.H0 - k.h]))
    return linprog(columns["C"], A_ub=A_ub, b_ub=b_ub, bounds=(0, None), method=LP_METHOD, **kwargs)


def _lp_multipliers(res, enforce_consistency: bool) -> Multipliers:
    lambda3 = float(res.eqlin.marginals[0]) if enforce_consistency else 0.0
    return Multipliers(
        lambda1=float(-res.ineqlin.marginals[0]),
        lambda2=float(res.ineqlin.marginals[1]),
        lambda3=lambda3,
    )


def _already_consistent(k: VaccKernels, tolerance: float) -> bool:
    """H̃(0) = h: with H₁ > 0 the consistency equality admits only the empty policy."""
    return abs(k.H0 - k.h) <= tolerance * max(k.H0, k.h, 1e-300)


def _measure(ages: np.ndarray, weights: np.ndarray) -> PsiMeasure:
    """ψ from LP weights: drop solver zeros and pull a mass within LP tolerance of 1 back onto Q = 1."""
    keep = weights > ATOM_THRESHOLD
    ages, weights = np.asarray(ages)[keep], weights[keep]
    total = float(weights.sum())
    if 1.0 < total <= 1.0 + MASS_SLACK:
        weights = weights / total
    return PsiMeasure(tuple(zip(ages, weights)))


def _fitted_multipliers(
    psi: PsiMeasure,
    k: VaccKernels,
    w: CostWeights,
    enforce_consistency: bool,
    fallback: Multipliers,
) -> Multipliers:
    """Least squares on ρ(A_j) = 0 over the active constraints; LP duals when under-determined."""
    if not len(psi):
        return fallback
    values = evaluate_policy(psi, k)
    slack = KKT_TOLERANCE * max(abs(_demand(k, w)), abs(k.F0), 1e-300)
    active = []
    if abs(values.prevalence - _demand(k, w)) <= slack:
        active.append(("lambda1", k.prevalence_at(psi.ages)))
    if abs(values.mass - 1.0) <= KKT_TOLERANCE:
        active.append(("lambda2", np.ones(len(psi))))
    if enforce_consistency:
        active.append(("lambda3", k.consistency_at(psi.ages)))
    if not active:
        return Multipliers()
    A = np.column_stack([column for _, column in active])
    solution, _, rank, _ = np.linalg.lstsq(A, k.cost_at(psi.ages), rcond=None)
    if rank < len(active):
        return fallback
    return Multipliers(**{name: float(value) for (name, _), value in zip(active, solution)})


def kkt_residuals(
    policy: Union[VaccinationPolicy, PsiMeasure],
    multipliers: Multipliers,
    k: VaccKernels,
    w: CostWeights,
    tolerance: float = KKT_TOLERANCE,
) -> KKTReport:
    """
    Minimisation form: ρ(a) = C₁ - λ₁F₁ - λ₂ - λ₃H₁ must be ≥ 0 on every grid age and
    vanish on the atoms. Residuals are relative to max |C₁|.
    """
    psi = policy if isinstance(policy, PsiMeasure) else policy_to_psi(policy)
    lam = multipliers
    scale = _scale(k)
    rho_nodes = k.C1.values - lam.lambda1 * k.F1.values - lam.lambda2 - lam.lambda3 * k.H1.values
    stationarity = max(0.0, float(-rho_nodes[:-1].min())) / scale

    values = evaluate_policy(psi, k)
    if len(psi):
        ages = psi.ages
        rho_atoms = k.cost_at(ages) - lam.lambda1 * k.prevalence_at(ages) - lam.lambda2 - lam.lambda3 * k.consistency_at(ages)
        support = float(np.abs(rho_atoms).max()) / scale
    else:
        support = 0.0

    slackness_prevalence = abs(lam.lambda1 * (values.prevalence - _demand(k, w))) / scale
    slackness_mass = abs(lam.lambda2 * (values.mass - 1.0)) / scale
    zero_sum = abs(
        values.cost - lam.lambda1 * values.prevalence - lam.lambda2 * values.mass - lam.lambda3 * values.consistency
    ) / scale
    sign = max(0.0, -lam.lambda1 * k.F1.max(), lam.lambda2) / scale

    residuals = (stationarity, support, slackness_prevalence, slackness_mass, zero_sum, sign)
    return KKTReport(
        stationarity=stationarity,
        support=support,
        slackness_prevalence=slackness_prevalence,
        slackness_mass=slackness_mass,
        zero_sum=zero_sum,
        sign=sign,
        tolerance=tolerance,
        passed=all(r <= tolerance for r in residuals),
    )


def optimize(
    k: VaccKernels,
    w: CostWeights,
    enforce_consistency: bool = False,
    refine: bool = True,
) -> OptimizationResult:
    """
    Vertex LP over ψ-mass at every grid age below a_max, then optional Nelder-Mead
    refinement of the atom ages with the weights re-solved at fixed ages.
    """
    demand = _demand(k, w)
    pinned = enforce_consistency and _already_consistent(k, KKT_TOLERANCE)
    if demand <= 0 and (pinned or not enforce_consistency):
        log.info("prevalence cap %.6g already met without vaccination", w.F_bar)
        return _result(PsiMeasure(), Multipliers(), k, w)
    if pinned:
        raise Infeasible(
            f"H̃(0) = h = {k.h:.6g}: only the empty policy keeps the force of infection consistent, "
            f"and it misses the prevalence cap {w.F_bar:.6g}"
        )
    if demand > 0 and k.F1.max() < demand:
        raise Infeasible(
            f"vaccinating everyone at the best age reduces prevalence by {k.F1.max():.6g}, "
            f"{demand:.6g} is needed (F_bar = {w.F_bar:.6g})"
        )

    nodes = k.grid.nodes[:-1]
    columns = {"C": k.C1.values[:-1], "F": k.F1.values[:-1], "H": k.H1.values[:-1]}
    res = _solve_lp(columns, k, w, enforce_consistency)
    if res.status == 2:
        raise Infeasible(f"no policy meets the prevalence cap {w.F_bar:.6g} and the constraints")
    if not res.success:
        raise Infeasible(f"vaccination LP failed: {res.message}")

    psi = _measure(nodes, res.x)
    lp_duals = _lp_multipliers(res, enforce_consistency)
    result = _result(psi, _certified(psi, k, w, enforce_consistency, lp_duals), k, w)
    log.info("grid optimum: %d atom(s), cost %.8g", len(psi), result.cost)

    if refine and len(psi):
        refined = _refine(result, k, w, enforce_consistency)
        if refined is not None:
            result = refined
    return result


def _certified(psi: PsiMeasure, k: VaccKernels, w: CostWeights, enforce: bool, lp_duals: Multipliers) -> Multipliers:
    fitted = _fitted_multipliers(psi, k, w, enforce, lp_duals)
    if fitted == lp_duals or kkt_residuals(psi, fitted, k, w).passed:
        return fitted
    return lp_duals


def _result(psi: PsiMeasure, multipliers: Multipliers, k: VaccKernels, w: CostWeights, refined: bool = False) -> OptimizationResult:
    values = evaluate_policy(psi, k)
    return OptimizationResult(
        policy=psi_to_policy(psi),
        psi=psi,
        multipliers=multipliers,
        kkt=kkt_residuals(psi, multipliers, k, w),
        cost=values.cost,
        prevalence=values.prevalence,
        consistency=values.consistency,
        mass=values.mass,
        h=k.h,
        F0=k.F0,
        H0=k.H0,
        refined=refined,
    )


def _refine(start: OptimizationResult, k: VaccKernels, w: CostWeights, enforce: bool) -> Optional[OptimizationResult]:
    a_max, dx = k.grid.a_max, k.grid.step

    def reduced(ages: np.ndarray):
        if np.any(ages < 0) or np.any(ages >= a_max) or np.any(np.diff(ages) <= 0):
            return None
        columns = {"C": k.cost_at(ages), "F": k.prevalence_at(ages), "H": k.consistency_at(ages)}
        res = _solve_lp(columns, k, w, enforce)
        return res if res.status == 0 else None

    def objective(ages: np.ndarray) -> float:
        res = reduced(ages)
        return np.inf if res is None else float(res.fun)

    x0 = start.psi.ages
    simplex = np.vstack([x0] + [x0 + dx * np.eye(len(x0))[j] for j in range(len(x0))])
    simplex = np.where(simplex >= a_max, x0 - dx, simplex)
    opt = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": 1e-6 * dx, "fatol": 1e-14 * _scale(k), "maxiter": 400},
    )
    if not opt.fun < start.cost - 1e-12 * _scale(k):
        return None

    res = reduced(opt.x)
    if res is None:
        return None
    try:
        psi = _measure(opt.x, res.x)
    except ValueError as exc:
        log.debug("refined ages %s give no valid ψ (%s); keeping the grid optimum", opt.x, exc)
        return None
    refined = _result(psi, _certified(psi, k, w, enforce, _lp_multipliers(res, enforce)), k, w, refined=True)
    if not refined.kkt.passed:
        log.debug("refined ages %s fail the KKT check; keeping the grid optimum", opt.x)
        return None
    log.info("refined atom ages %s: cost %.10g -> %.10g", np.round(opt.x, 6), start.cost, refined.cost)
    return refined


def sweep(
    k: VaccKernels,
    w: CostWeights,
    caps: list[float],
    refine: bool = False,
) -> list[tuple[float, Optional[OptimizationResult]]]:
    """Optimal policies for several prevalence caps on fixed kernels; None marks an infeasible cap."""
    rows = []
    for F_bar in caps:
        try:
            rows.append((F_bar, optimize(k, w.with_cap(F_bar), refine=refine)))
        except Infeasible as exc:
            log.info("F_bar = %.6g infeasible: %s", F_bar, exc)
            rows.append((F_bar, None))
    return rows


def solve_self_consistent(
    params: EpiParams,
    d: Demography,
    w: CostWeights,
    target_tol: float = 1e-8,
    max_iter: int = 100,
    damping: float = 0.5,
    refine: bool = False,
) -> SelfConsistentResult:
    """
    Damped fixed point h ← h + damping·(H̃_h(v*) - h), starting from the unvaccinated
    endemic h (0 when R₀ ≤ 1). The inner problem drops the consistency equality.
    """
    params = params.quarantine_free()
    endemic = solve_endemic(params, stable_age_distribution(d))
    h = endemic.h if endemic is not None else 0.0
    h_endemic = h
    sequence = [h]

    for iteration in range(1, max_iter + 1):
        kernels = build_kernels(h, params, d, w)
        result = optimize(kernels, w, enforce_consistency=False, refine=refine)
        h_next = h + damping * (kernels.H0 - result.consistency - h)
        sequence.append(h_next)
        log.debug("self-consistent iteration %d: h = %.12g -> %.12g", iteration, h, h_next)
        if abs(h_next - h) <= target_tol:
            log.info("self-consistent h* = %.10g after %d iteration(s)", h, iteration)
            return SelfConsistentResult(
                policy=result.policy,
                h=h,
                h_endemic=h_endemic,
                h_sequence=sequence,
                converged=True,
                result=result,
            )
        h = h_next

    raise NotConverged(f"h did not settle within {max_iter} iterations (last step {sequence[-1] - sequence[-2]:.3g})", sequence)
