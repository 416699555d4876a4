import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from src.model.steady_state import solve_endemic, steady_profiles
from src.numerics.grid_quadrature import integrate
from src.vaccination.kernels import (
    CostWeights,
    PolicyAtom,
    PsiMeasure,
    StepFunction,
    VaccinationPolicy,
    build_kernels,
    evaluate_policy,
    one_minus_cumulative_psi,
    policy_to_psi,
    psi_to_policy,
    survival_steps,
    vaccinated_profiles,
)
from tests.conftest import make_params, vaccination_setup


@pytest.fixture(scope="module")
def setup():
    grid, d, U, params = vaccination_setup()
    h = solve_endemic(params, U).h
    costs = CostWeights(
        g1=grid.from_function(lambda a: 1.0 + a / 50.0),
        g2=grid.constant(1.0),
        f=grid.constant(1.0),
        F_bar=0.01,
    )
    return grid, d, U, params, h, costs, build_kernels(h, params, d, costs)


def random_policy(rng) -> VaccinationPolicy:
    n = int(rng.integers(1, 4))
    ages = np.sort(rng.choice(np.arange(0.0, 100.0, 0.5), size=n, replace=False))
    intensities = list(rng.uniform(0.01, 5.0, size=n))
    if rng.random() < 0.2:
        intensities[-1] = math.inf
    return VaccinationPolicy(tuple(zip(ages, intensities)))


def test_policy_validation():
    with pytest.raises(ValueError):
        VaccinationPolicy(((1, 1.0), (2, 1.0), (3, 1.0), (4, 1.0)))
    with pytest.raises(ValueError):
        VaccinationPolicy(((5, 1.0), (5, 1.0)))
    with pytest.raises(ValueError):
        VaccinationPolicy(((5, math.inf), (10, 1.0)))
    with pytest.raises(ValueError):
        VaccinationPolicy(((5, 0.0),))
    with pytest.raises(ValueError):
        PsiMeasure(((5, 0.6), (10, 0.6)))
    assert len(VaccinationPolicy()) == 0
    assert PolicyAtom(3.0, math.inf).deplete


def test_policy_to_psi_weights():
    psi = policy_to_psi(VaccinationPolicy(((10.0, math.log(2.0)), (20.0, math.inf))))
    assert psi.weights == pytest.approx([0.5, 0.5])
    assert psi.mass == pytest.approx(1.0)


def test_psi_to_policy_recovers_intensities_and_depletion():
    policy = psi_to_policy(PsiMeasure(((10.0, 0.5), (20.0, 0.5))))
    assert policy.atoms[0].intensity == pytest.approx(math.log(2.0))
    assert policy.atoms[1].deplete


def test_survival_equals_one_minus_cumulative_psi():
    rng = np.random.default_rng(7)
    for _ in range(100):
        policy = random_policy(rng)
        D = survival_steps(policy)
        assert D.allclose(one_minus_cumulative_psi(policy_to_psi(policy)), atol=1e-12)


def test_step_function_is_right_continuous():
    D = StepFunction((10.0, 20.0), (1.0, 0.5, 0.25))
    assert D(9.999) == 1.0
    assert D(10.0) == 0.5
    assert D(25.0) == 0.25


def test_kernel_shapes(setup):
    grid, _, _, _, h, _, k = setup
    assert k.h == h
    assert k.F0 > 0 and k.F1[0] == k.F0
    assert k.F1.min() >= 0 and k.F1[-1] == 0.0
    assert np.all(np.diff(k.F1.values) <= 1e-15)
    assert k.H1.sup_norm() > 0


def test_cost_kernel_at_zero_force(setup):
    grid, d, U, params, _, _, _ = setup
    costs = CostWeights(g1=grid.constant(1.0), g2=grid.constant(0.0), f=grid.constant(1.0), F_bar=0.01)
    k = build_kernels(0.0, params, d, costs)
    assert np.allclose(k.C1.values, U.values, rtol=1e-14)
    assert k.F0 == 0.0 and k.F1.sup_norm() == 0.0


def test_linearisation_is_exact_for_three_atoms(setup):
    _, _, U, params, h, costs, k = setup
    psi = PsiMeasure(((3.37, 0.2), (12.9, 0.3), (40.05, 0.4)))
    state = vaccinated_profiles(h, params, U, psi)
    values = evaluate_policy(psi, k)
    assert integrate(costs.f * U * state.i) == pytest.approx(k.F0 - values.prevalence, rel=1e-10)
    assert integrate(params.k2 * U * state.i) == pytest.approx(k.H0 - values.consistency, rel=1e-10)


def test_vaccinated_profiles_conserve(setup):
    _, _, U, params, h, _, _ = setup
    state = vaccinated_profiles(h, params, U, VaccinationPolicy(((5.5, 0.7), (30.0, math.inf))))
    total = state.s + state.e + state.i + state.r + state.z
    assert np.allclose(total.values, 1.0, atol=1e-12)
    assert state.s.at(40.0) == 0.0


def test_single_atom_cost(setup):
    grid, _, _, _, _, _, k = setup
    c = 0.8
    values = evaluate_policy(VaccinationPolicy(((20.0, c),)), k)
    assert values.cost == pytest.approx(-math.expm1(-c) * k.C1.at(20.0), rel=1e-12)
    assert values.prevalence > 0
    assert evaluate_policy(VaccinationPolicy(), k).cost == 0.0


def test_vaccinated_profiles_need_quarantine_free_rates(setup):
    grid, _, U, _, h, _, _ = setup
    with pytest.raises(ValueError):
        vaccinated_profiles(h, make_params(grid), U, PsiMeasure(((5.0, 0.5),)))


def test_ages_outside_the_grid_rejected(setup):
    k = setup[-1]
    with pytest.raises(ValueError):
        k.prevalence_at([100.0])


def test_empty_policy_reproduces_the_steady_infectives(setup):
    grid, d, U, params, h, costs, k = setup
    state = vaccinated_profiles(h, params, U, PsiMeasure())
    steady = steady_profiles(h, params)
    assert np.allclose(state.i.values, steady.i.values, rtol=0.0, atol=1e-15)
    assert np.allclose(state.s.values, steady.s.values, rtol=0.0, atol=1e-15)


def test_vaccinated_profiles_match_an_age_ode_with_jumps():
    grid, _, U, params = vaccination_setup(n=4001)
    h = solve_endemic(params, U).h
    psi = PsiMeasure(((20.0, 0.4), (47.3, 0.3)))
    state = vaccinated_profiles(h, params, U, psi)
    phi, mu1, gamma = h * params.k1[0], params.mu1, params.gamma

    def rhs(a, y):
        s, e, i = y
        return [-phi * s, phi * s - mu1 * e, mu1 * e - gamma * i]

    y, start, covered = [1.0, 0.0, 0.0], 0.0, 1.0
    pieces = []
    for end, weight in (*psi.atoms, (grid.a_max, 0.0)):
        inside = (grid.nodes >= start) & ((grid.nodes < end) | (end == grid.a_max))
        sol = solve_ivp(rhs, (start, end), y, method="DOP853", dense_output=True, rtol=1e-11, atol=1e-14)
        pieces.append(sol.sol(grid.nodes[inside])[2])
        s, e, i = sol.sol(end)
        factor = (covered - weight) / covered
        y, start, covered = [s * factor, e * factor, i], end, covered - weight
    expected = np.concatenate(pieces)

    assert expected.shape == (grid.n,)
    assert np.abs(state.i.values - expected).max() <= 1e-3 * expected.max()
    assert state.s.at(60.0) == pytest.approx(0.3 * np.exp(-phi * 60.0), rel=1e-9)
