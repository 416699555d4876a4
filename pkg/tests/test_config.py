import textwrap

import numpy as np
import pytest

from src.config import ConstantShape, ExponentialShape, PiecewiseLinearShape, validate_config
from src.numerics.grid_quadrature import AgeGrid
from src.profile_factory import constant_value, get_profile

MINIMAL = """\
run: r0
demography:
  mu: 0.02
epi:
  mu1: 0.2
  q1: 0.1
  gamma1: 0.05
  gamma2: 0.1
  gamma: 0.1
"""


def by_field(diagnostics):
    return {d.field: d for d in diagnostics}


def test_minimal_scenario_gets_defaults():
    scenario, diagnostics = validate_config(MINIMAL, default_name="minimal")
    assert diagnostics == []
    assert scenario.name == "minimal"
    assert (scenario.grid.a_max, scenario.grid.n) == (100.0, 2001)
    assert scenario.epi.k1 == ConstantShape(shape="constant", value=1.0)
    assert scenario.demography.beta is None
    assert scenario.seed.compartment == "e"


def test_grid_overrides_win():
    scenario, _ = validate_config(MINIMAL, grid_overrides={"n": 401, "a_max": 80.0})
    assert (scenario.grid.a_max, scenario.grid.n) == (80.0, 401)


def test_missing_rate_is_reported_by_path():
    scenario, diagnostics = validate_config(MINIMAL.replace("  gamma: 0.1\n", ""))
    assert scenario is None
    assert "epi.gamma" in by_field(diagnostics)


def test_negative_rate_reports_message_and_line():
    _, diagnostics = validate_config(MINIMAL.replace("mu1: 0.2", "mu1: -0.2"))
    diagnostic = by_field(diagnostics)["epi.mu1"]
    assert diagnostic.message == "rate must be ≥ 0"
    assert diagnostic.line == 5
    assert str(diagnostic) == "line 5: epi.mu1: rate must be ≥ 0"


def test_every_violation_is_collected():
    text = MINIMAL.replace("mu1: 0.2", "mu1: -0.2").replace("  gamma: 0.1\n", "  typo: 3\n")
    _, diagnostics = validate_config(text)
    fields = set(by_field(diagnostics))
    assert {"epi.mu1", "epi.gamma", "epi.typo"} <= fields


def test_invalid_yaml():
    _, diagnostics = validate_config("run: [r0\n")
    assert len(diagnostics) == 1
    assert diagnostics[0].message.startswith("invalid YAML")


def test_unknown_run_type():
    _, diagnostics = validate_config(MINIMAL.replace("run: r0", "run: forecast"))
    assert "run" in by_field(diagnostics)


def test_vaccination_needs_costs():
    _, diagnostics = validate_config(MINIMAL.replace("run: r0", "run: vaccinate"))
    assert any("costs" in d.message for d in diagnostics)


def test_sweep_needs_caps():
    text = MINIMAL.replace("run: r0", "run: sweep") + "costs: {F_bar: 0.1}\n"
    _, diagnostics = validate_config(text)
    assert any("sweep" in d.message for d in diagnostics)


def test_profile_shapes():
    text = MINIMAL + textwrap.dedent(
        """\
        costs:
          F_bar: 0.1
          g1: {shape: piecewise_linear, breakpoints: [[0, 1.0], [50, 3.0]]}
          f: {shape: exponential, amplitude: 0.5, rate: 0.0, offset: 0.5}
        """
    )
    scenario, diagnostics = validate_config(text)
    assert diagnostics == []
    assert isinstance(scenario.costs.g1, PiecewiseLinearShape)
    assert isinstance(scenario.costs.f, ExponentialShape)


def test_breakpoints_must_increase():
    text = MINIMAL.replace("mu: 0.02", "mu: {shape: piecewise_linear, breakpoints: [[10, 0.1], [5, 0.2]]}")
    _, diagnostics = validate_config(text)
    diagnostic = by_field(diagnostics)["demography.mu.breakpoints"]
    assert "strictly increasing" in diagnostic.message


def test_get_profile_evaluates_every_shape():
    grid = AgeGrid(a_max=100.0, n=101)
    assert get_profile(2.5, grid).sup_norm() == 2.5
    ramp = get_profile(PiecewiseLinearShape(shape="piecewise_linear", breakpoints=[(0, 1.0), (50, 3.0)]), grid)
    assert ramp.at(25.0) == pytest.approx(2.0)
    assert ramp.at(90.0) == pytest.approx(3.0)
    gompertz = get_profile(ExponentialShape(shape="exponential", amplitude=0.001, rate=0.1, offset=0.01), grid)
    assert gompertz.at(10.0) == pytest.approx(0.001 * np.e + 0.01)
    with pytest.raises(ValueError, match="Unknown profile shape"):
        get_profile(object(), grid)


def test_constant_value():
    assert constant_value(ConstantShape(shape="constant", value=0.02)) == 0.02
    assert constant_value(PiecewiseLinearShape(shape="piecewise_linear", breakpoints=[(0, 1.0), (50, 3.0)])) is None
    assert constant_value(ExponentialShape(shape="exponential", amplitude=0.5, rate=0.0, offset=0.5)) == 1.0
