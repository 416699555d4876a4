# src/analyses/vaccination_analyses.py
"""Run types for the optimal vaccination problem: vaccinate and sweep."""
from __future__ import annotations

import logging

import pandas as pd

from src.analyses.base_analysis import AnalysisOutput, BaseAnalysis
from src.model.steady_state import solve_endemic
from src.vaccination.kernels import MAX_ATOMS, VaccKernels, build_kernels
from src.vaccination.optimizer import OptimizationResult, optimize, solve_self_consistent, sweep

log = logging.getLogger(__name__)


def policy_report(result: OptimizationResult, converged: bool = True) -> dict:
    atoms = []
    for (age, intensity), (_, weight) in zip(result.policy.atoms, result.psi.atoms):
        deplete = intensity == float("inf")
        atoms.append({"age": age, "intensity": None if deplete else intensity, "weight": weight, "deplete": deplete})
    kkt = result.kkt.model_dump()
    kkt["failures"] = result.kkt.failures
    return {
        "atoms": atoms,
        "cost": result.cost,
        "prevalence": result.F0 - result.prevalence,
        "prevalence_without_vaccination": result.F0,
        "h": result.h,
        "mass": result.mass,
        "multipliers": result.multipliers.model_dump(),
        "kkt": kkt,
        "refined": result.refined,
        "converged": converged,
    }


def kernel_table(kernels: VaccKernels) -> pd.DataFrame:
    return pd.DataFrame(
        {"a": kernels.grid.nodes, "C1": kernels.C1.values, "F1": kernels.F1.values, "H1": kernels.H1.values}
    )


def describe_policy(result: OptimizationResult) -> str:
    if not len(result.policy):
        return "no vaccination needed"
    ages = ", ".join(f"{age:.4g}" for age in result.policy.ages)
    return f"{len(result.policy)} age(s) [{ages}]"


class VaccinateAnalysis(BaseAnalysis):
    name = "vaccinate"

    def _endemic_h(self, params) -> float:
        endemic = solve_endemic(params, self.context.U)
        return endemic.h if endemic is not None else 0.0

    def run(self) -> AnalysisOutput:
        ctx = self.context
        config = ctx.scenario.vaccinate
        params = ctx.params.quarantine_free()

        if config.self_consistent:
            outcome = solve_self_consistent(
                params,
                ctx.demography,
                ctx.costs,
                target_tol=config.target_tol,
                max_iter=config.max_iter,
                refine=config.refine,
            )
            result = outcome.result
            payload = policy_report(result, outcome.converged)
            payload["h"] = outcome.h
            payload["h_endemic"] = outcome.h_endemic
            payload["h_sequence"] = outcome.h_sequence
            kernels = build_kernels(outcome.h, params, ctx.demography, ctx.costs)
        else:
            h = self._endemic_h(params)
            kernels = build_kernels(h, params, ctx.demography, ctx.costs)
            result = optimize(kernels, ctx.costs, enforce_consistency=config.enforce_consistency, refine=config.refine)
            payload = policy_report(result)
            payload["h_endemic"] = h

        verdict = "PASS" if result.kkt.passed else "FAIL"
        summary = f"optimal policy: {describe_policy(result)}, cost {result.cost:.6g}, KKT {verdict}"
        return AnalysisOutput(summary=summary, payload=payload, table=kernel_table(kernels))


class SweepAnalysis(BaseAnalysis):
    """Optimal cost along a list of prevalence caps, kernels frozen at the unvaccinated endemic h."""

    name = "sweep"

    def run(self) -> AnalysisOutput:
        ctx = self.context
        params = ctx.params.quarantine_free()
        endemic = solve_endemic(params, ctx.U)
        h = endemic.h if endemic is not None else 0.0
        kernels = build_kernels(h, params, ctx.demography, ctx.costs)

        rows = []
        for F_bar, result in sweep(kernels, ctx.costs, ctx.scenario.sweep.F_bar):
            row = {"F_bar": F_bar, "feasible": result is not None}
            row["cost"] = result.cost if result is not None else None
            row["n_atoms"] = len(result.policy) if result is not None else None
            for j in range(MAX_ATOMS):
                atom = result.psi.atoms[j] if result is not None and j < len(result.psi) else None
                row[f"age_{j + 1}"] = atom.age if atom else None
                row[f"weight_{j + 1}"] = atom.weight if atom else None
            rows.append(row)

        table = pd.DataFrame(rows)
        feasible = table[table["feasible"]]
        payload = {"h": h, "F0": kernels.F0, "rows": table.to_dict(orient="records")}
        summary = f"swept {len(table)} prevalence caps at h = {h:.6g}: {len(feasible)} feasible"
        return AnalysisOutput(summary=summary, payload=payload, table=table)
