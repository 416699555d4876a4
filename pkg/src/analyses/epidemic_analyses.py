# src/analyses/epidemic_analyses.py
"""Run types built on the unvaccinated model: simulate, steady, r0 and lyapunov."""
from __future__ import annotations

import logging

import pandas as pd

from src.analyses.base_analysis import AnalysisOutput, BaseAnalysis
from src.errors import NoInfection
from src.model.demography import net_reproduction_rate
from src.model.lyapunov import compute_weights, verify_decrease, weight_residuals
from src.model.steady_state import (
    average_age_of_infection,
    r0_closed_form,
    r0_quadrature_breakdown,
    r0_reordered,
    solve_endemic,
    steady_profiles,
)
from src.model.transient_dynamics import simulate
from src.numerics.grid_quadrature import integrate
from src.profile_factory import constant_value

log = logging.getLogger(__name__)


class SimulateAnalysis(BaseAnalysis):
    name = "simulate"

    def run(self) -> AnalysisOutput:
        ctx = self.context
        config = ctx.scenario.simulate
        trajectory = simulate(ctx.initial_state(), ctx.params, ctx.U, config.t_end, config.sample_every)
        final = trajectory[-1]
        prevalence = [integrate(state.i * ctx.U) for state in trajectory]
        payload = {
            "t_end": final.t,
            "samples": len(trajectory),
            "initial_prevalence": prevalence[0],
            "final_prevalence": prevalence[-1],
            "max_conservation_error": max(state.conservation_error() for state in trajectory),
        }
        summary = f"simulated {len(trajectory)} samples to t = {final.t:.6g}: ∫iU = {prevalence[-1]:.6g}"
        return AnalysisOutput(summary=summary, payload=payload, table=trajectory.to_frame())


class SteadyAnalysis(BaseAnalysis):
    name = "steady"

    def run(self) -> AnalysisOutput:
        ctx = self.context
        net_reproduction_rate(ctx.demography)
        breakdown = r0_quadrature_breakdown(ctx.params, ctx.U)
        state = solve_endemic(ctx.params, ctx.U)
        avg_age = None
        if state is None:
            state = steady_profiles(0.0, ctx.params)
        else:
            try:
                avg_age = average_age_of_infection(state, ctx.demography)
            except NoInfection as exc:
                log.warning("average age of infection undefined: %s", exc)

        payload = {
            "h": state.h,
            "r0": breakdown.r0,
            "r1": breakdown.r1,
            "r2": breakdown.r2,
            "avg_age": avg_age,
        }
        if state.h > 0:
            age_text = f"{avg_age:.4g}" if avg_age is not None else "undefined"
            summary = f"endemic h* = {state.h:.6g} (R0 = {breakdown.r0:.4g}, average age of infection {age_text})"
        else:
            summary = f"disease-free only (R0 = {breakdown.r0:.4g} ≤ 1)"
        return AnalysisOutput(summary=summary, payload=payload, table=state.to_frame())


class R0Analysis(BaseAnalysis):
    name = "r0"

    def _closed_form(self):
        """Only defined for constant mortality and constant contact kernels."""
        ctx = self.context
        mu = constant_value(ctx.scenario.demography.mu)
        k1 = ctx.params.k1
        k2 = ctx.params.k2
        if mu is None or not (k1.is_constant() and k2.is_constant()):
            return None
        p = ctx.params
        return r0_closed_form(mu, p.gamma, p.mu1, p.q1, p.gamma1, p.gamma2, k1[0] * k2[0])

    def run(self) -> AnalysisOutput:
        ctx = self.context
        quadrature = r0_quadrature_breakdown(ctx.params, ctx.U)
        reordered = r0_reordered(ctx.params, ctx.U)
        closed = self._closed_form()

        payload = {
            "r0_quadrature": quadrature.r0,
            "r1_quadrature": quadrature.r1,
            "r2_quadrature": quadrature.r2,
            "r0_reordered": reordered,
            "closed_form": closed.model_dump() if closed is not None else None,
            "relative_gap": abs(quadrature.r0 - closed.r0) / closed.r0 if closed is not None and closed.r0 > 0 else None,
        }
        rows = [{"method": "quadrature", **quadrature.model_dump()}]
        rows.append({"method": "reordered", "r0": reordered, "r1": None, "r2": None})
        if closed is not None:
            rows.append({"method": "closed_form", **closed.model_dump()})
        shown = closed if closed is not None else quadrature
        summary = f"R0 = {shown.r0:.4g} (R1 = {shown.r1:.4g}, R2 = {shown.r2:.4g})"
        return AnalysisOutput(summary=summary, payload=payload, table=pd.DataFrame(rows))


class LyapunovAnalysis(BaseAnalysis):
    name = "lyapunov"

    def run(self) -> AnalysisOutput:
        ctx = self.context
        config = ctx.scenario.lyapunov
        r0 = r0_quadrature_breakdown(ctx.params, ctx.U).r0
        weights = compute_weights(ctx.params, ctx.U)
        trajectory = simulate(ctx.initial_state(), ctx.params, ctx.U, config.t_end, config.sample_every)
        report = verify_decrease(trajectory, weights, ctx.params, ctx.U, r0, config.tolerance)

        payload = report.model_dump(by_alias=True)
        payload["weight_residuals"] = weight_residuals(weights, ctx.params, ctx.U)
        verdict = "PASS" if report.passed else "FAIL"
        summary = f"Lyapunov decrease {verdict}: R0 = {r0:.4g}, max violation {report.max_violation:.3g}"
        table = pd.DataFrame([sample.model_dump() for sample in report.samples])
        return AnalysisOutput(summary=summary, payload=payload, table=table)
