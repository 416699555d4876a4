import numpy as np
import pytest

from src.model.demography import Demography, stable_age_distribution
from src.model.steady_state import r0_quadrature
from src.model.transient_dynamics import EpiParams
from src.numerics.grid_quadrature import AgeGrid

REFERENCE_RATES = dict(mu1=0.2, q1=0.1, gamma1=0.05, gamma2=0.1, gamma=0.1)
FAST_RATES = dict(mu1=2.0, q1=1.0, gamma1=0.5, gamma2=1.0, gamma=1.0)


def gompertz(grid: AgeGrid):
    return grid.from_function(lambda a: 0.0005 * np.exp(0.085 * a) + 0.0005)


def make_params(grid: AgeGrid, k1=1.0, k2=1.0, **rates) -> EpiParams:
    merged = {**REFERENCE_RATES, **rates}
    k1 = k1 if not np.isscalar(k1) else grid.constant(k1)
    k2 = k2 if not np.isscalar(k2) else grid.constant(k2)
    return EpiParams(k1=k1, k2=k2, **merged)


def with_r0(params: EpiParams, U, target: float) -> EpiParams:
    return params.scaled_contacts(target / r0_quadrature(params, U))


@pytest.fixture
def long_grid():
    """Constant mortality 0.02 leaves e^{-20} survivors at 1000 years."""
    return AgeGrid(a_max=1000.0, n=20001)


@pytest.fixture
def constant_demography(long_grid):
    mu = long_grid.constant(0.02)
    return Demography(mu=mu, beta=mu)


@pytest.fixture
def human_grid():
    return AgeGrid(a_max=100.0, n=1001)


@pytest.fixture
def gompertz_demography(human_grid):
    mu = gompertz(human_grid)
    return Demography(mu=mu, beta=mu)


@pytest.fixture
def human_U(gompertz_demography):
    return stable_age_distribution(gompertz_demography)


def vaccination_setup(n: int = 501, target_r0: float = 3.0):
    """Quarantine-free SEIR rates, constant contacts, Gompertz mortality on [0, 100]."""
    grid = AgeGrid(a_max=100.0, n=n)
    mu = gompertz(grid)
    d = Demography(mu=mu, beta=mu)
    U = stable_age_distribution(d)
    params = make_params(grid, mu1=2.0, q1=0.0, gamma1=0.0, gamma2=0.0, gamma=1.0)
    return grid, d, U, with_r0(params, U, target_r0)
