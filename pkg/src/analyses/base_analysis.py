# src/analyses/base_analysis.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import pandas as pd

from src.config import Scenario
from src.model.demography import Demography, stable_age_distribution
from src.model.transient_dynamics import EpiParams, EpiState, seeded_state
from src.numerics.grid_quadrature import AgeGrid, Profile
from src.profile_factory import get_profile
from src.vaccination.kernels import CostWeights


@dataclass(frozen=True, eq=False)
class ScenarioContext:
    """Everything an analysis needs, built once from a validated Scenario."""

    scenario: Scenario
    grid: AgeGrid
    demography: Demography
    U: Profile
    params: EpiParams
    costs: Optional[CostWeights] = None

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "ScenarioContext":
        grid = AgeGrid(a_max=scenario.grid.a_max, n=scenario.grid.n)
        mu = get_profile(scenario.demography.mu, grid)
        beta_spec = scenario.demography.beta if scenario.demography.beta is not None else scenario.demography.mu
        demography = Demography(
            mu=mu,
            beta=get_profile(beta_spec, grid),
            survival_tolerance=scenario.demography.survival_tolerance,
        )
        epi = scenario.epi
        params = EpiParams(
            mu1=epi.mu1,
            q1=epi.q1,
            gamma1=epi.gamma1,
            gamma2=epi.gamma2,
            gamma=epi.gamma,
            k1=get_profile(epi.k1, grid),
            k2=get_profile(epi.k2, grid),
        ).scaled_contacts(epi.contact_scale)
        costs = None
        if scenario.costs is not None:
            costs = CostWeights(
                g1=get_profile(scenario.costs.g1, grid),
                g2=get_profile(scenario.costs.g2, grid),
                f=get_profile(scenario.costs.f, grid),
                F_bar=scenario.costs.F_bar,
            )
        return cls(
            scenario=scenario,
            grid=grid,
            demography=demography,
            U=stable_age_distribution(demography),
            params=params,
            costs=costs,
        )

    def initial_state(self) -> EpiState:
        seed = self.scenario.seed
        return seeded_state(self.grid, seed.compartment, seed.mass, seed.center, seed.width)


@dataclass
class AnalysisOutput:
    """A tidy table for {run}.csv, a payload for {run}.json and a one-line summary."""

    summary: str
    payload: dict[str, Any]
    table: Optional[pd.DataFrame] = None


class BaseAnalysis:
    """
    Common interface of every run type: construct with a context, call run().
    """

    name = "base"

    def __init__(self, context: ScenarioContext):
        self.context = context

    def run(self) -> AnalysisOutput:
        raise NotImplementedError
