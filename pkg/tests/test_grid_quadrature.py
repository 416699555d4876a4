import numpy as np
import pytest

from src.numerics.grid_quadrature import (
    AgeGrid,
    Profile,
    cumulative_integral,
    exponential_convolution,
    exponential_tail,
    inner,
    integrate,
)


def test_grid_rejects_degenerate_shapes():
    with pytest.raises(ValueError):
        AgeGrid(a_max=10.0, n=2)
    with pytest.raises(ValueError):
        AgeGrid(a_max=0.0, n=11)


def test_grid_nodes_uniform_and_read_only():
    grid = AgeGrid(a_max=10.0, n=11)
    assert grid.step == 1.0
    assert np.allclose(np.diff(grid.nodes), 1.0)
    with pytest.raises(ValueError):
        grid.nodes[0] = 5.0


def test_profile_validates_length_and_finiteness():
    grid = AgeGrid(a_max=1.0, n=5)
    with pytest.raises(ValueError):
        Profile(grid, np.zeros(4))
    with pytest.raises(ValueError):
        Profile(grid, [0.0, 1.0, np.nan, 0.0, 0.0])


def test_profiles_on_different_grids_do_not_mix():
    a = AgeGrid(a_max=1.0, n=5).constant(1.0)
    b = AgeGrid(a_max=2.0, n=5).constant(1.0)
    with pytest.raises(ValueError):
        a + b


def test_integrate_simple_cases():
    grid = AgeGrid(a_max=10.0, n=101)
    assert integrate(grid.constant(0.0)) == 0.0
    assert integrate(grid.constant(1.0)) == pytest.approx(10.0, abs=1e-12)


def test_integrate_exponential():
    grid = AgeGrid(a_max=50.0, n=5001)
    assert integrate(grid.from_function(lambda a: np.exp(-a))) == pytest.approx(1.0, abs=1e-5)


def test_cumulative_integral_exact_for_linear():
    grid = AgeGrid(a_max=1.0, n=11)
    F = cumulative_integral(grid.ages())
    assert F[0] == 0.0
    assert F[-1] == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(cumulative_integral(grid.constant(3.0)).values, 3.0 * grid.nodes, atol=1e-13)


def test_cumulative_end_value_equals_integral():
    grid = AgeGrid(a_max=7.0, n=301)
    p = grid.from_function(lambda a: np.sin(a) ** 2 + a)
    assert cumulative_integral(p)[-1] == pytest.approx(integrate(p), rel=1e-14)


def test_linearity():
    grid = AgeGrid(a_max=5.0, n=201)
    p = grid.from_function(np.cos)
    q = grid.from_function(lambda a: a**2)
    assert integrate(2.0 * p - 3.0 * q) == pytest.approx(2.0 * integrate(p) - 3.0 * integrate(q), rel=1e-13)


def test_refinement_is_second_order():
    coarse = AgeGrid(a_max=10.0, n=101)
    fine = coarse.refined(2)
    exact = 1.0 - np.exp(-10.0)
    err_coarse = abs(integrate(coarse.from_function(lambda a: np.exp(-a))) - exact)
    err_fine = abs(integrate(fine.from_function(lambda a: np.exp(-a))) - exact)
    assert err_coarse / err_fine == pytest.approx(4.0, rel=0.01)


def test_exponential_convolution_of_constant():
    grid = AgeGrid(a_max=20.0, n=4001)
    y = exponential_convolution(grid.constant(1.0), 0.5)
    exact = (1.0 - np.exp(-0.5 * grid.nodes)) / 0.5
    assert y[0] == 0.0
    assert np.max(np.abs(y.values - exact)) < 1e-5


def test_exponential_tail_is_the_trapezoid_adjoint():
    grid = AgeGrid(a_max=30.0, n=601)
    rng = np.random.default_rng(3)
    f = grid.profile(rng.random(grid.n))
    g = grid.profile(rng.random(grid.n))
    lhs = inner(g, exponential_convolution(f, 0.3))
    rhs = inner(f, exponential_tail(g, 0.3))
    assert lhs == pytest.approx(rhs, rel=1e-13)


def test_exponential_tail_of_constant_interior():
    grid = AgeGrid(a_max=40.0, n=8001)
    y = exponential_tail(grid.constant(1.0), 1.0)
    exact = 1.0 - np.exp(-(40.0 - grid.nodes))
    assert np.max(np.abs(y.values[1:-1] - exact[1:-1])) < 1e-5
