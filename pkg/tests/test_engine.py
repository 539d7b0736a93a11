import math

import numpy as np
import pytest

from fklattice.config import preset
from fklattice.engine import (
    convergence_study,
    fit_loglog,
    hull_white_problem,
    hull_white_theta,
    price,
    price_problem,
    surface_problem,
)
from fklattice.expr import Function
from fklattice.model import (
    ZERO_POTENTIAL,
    BoundaryPair,
    DiffusionModel,
    Payoff,
    Problem,
    SchemeParams,
    SmoothPotential,
)

EXAMPLES = ["example1", "example2", "example3"]


def wide_problem(potential=ZERO_POTENTIAL, payoff=None):
    return Problem(DiffusionModel.driftless(0.0), BoundaryPair.constant(-10, 10), potential,
                   payoff or Payoff.unit())


@pytest.mark.parametrize("n", [10, 30])
def test_wide_strip_survives(n):
    q = price_problem(wide_problem(), n).q
    assert 0.999 <= q.real <= 1.0 + 1e-12
    assert q.imag == 0


def test_example1_is_complex_and_bounded():
    result = price_problem(preset("example1").problem(), 30)
    assert math.isfinite(result.q.real) and math.isfinite(result.q.imag)
    assert abs(result.q) <= 1
    assert result.q.imag != 0
    assert result.layer_count == 31 and result.layer_sizes[0] == 1
    assert result.layer_sizes[15] == 81


def test_zero_payoff():
    problem = wide_problem(payoff=Payoff(lambda x: np.zeros_like(x)))
    assert price_problem(problem, 12).q == 0


def test_real_potential_gives_real_price():
    assert price_problem(preset("example2").problem(), 30).q.imag == 0
    assert price_problem(preset("example3").problem(), 30).q.imag == 0


@pytest.mark.parametrize("name", EXAMPLES)
def test_forward_matches_backward(name):
    problem = preset(name).problem()
    forward = price_problem(problem, 30).q
    surface = surface_problem(problem, 30)
    assert abs(surface.q - forward) <= 1e-12 * abs(forward)


def test_surface_terminal_layer_is_payoff():
    problem = preset("bcp").problem()
    problem = Problem(problem.model, problem.bounds, payoff=Payoff(lambda x: np.cos(x)))
    surface = surface_problem(problem, 16)
    last = surface.layers[-1]
    np.testing.assert_array_equal(last.values, np.cos(last.nodes))
    assert last.t == 1.0 and surface.layers[0].t == 0.0


def test_example2_surface_real_and_bounded():
    surface = surface_problem(preset("example2").problem(), 30)
    # rates reach -0.06 at the lower barrier, so discounting can exceed one by at most e^0.06
    for layer in surface.layers:
        assert np.max(np.abs(layer.values.imag)) < 1e-12
        assert np.all(layer.values.real >= 0)
        assert np.all(layer.values.real <= math.exp(0.06))


def test_example1_surface_vanishes_at_upper_barrier():
    surface = surface_problem(preset("example1").problem(), 30)
    for layer in surface.layers[1:-1]:
        mags = np.abs(layer.values)
        assert mags[0] < 0.5 * mags.max()
        assert mags[0] < mags[1] < mags[2]


def test_killing_is_monotone():
    small = SmoothPotential(lambda x: 0.5 * np.ones_like(x))
    large = SmoothPotential(lambda x: 0.5 + x**2)
    q0 = price_problem(preset("bcp").problem(), 30).q.real
    bounds = preset("bcp").problem().bounds
    model = DiffusionModel.driftless(0.0)
    q1 = price_problem(Problem(model, bounds, small), 30).q.real
    q2 = price_problem(Problem(model, bounds, large), 30).q.real
    assert q0 >= q1 >= q2 > 0
    assert q1 == pytest.approx(q0 * math.exp(-0.5), rel=1e-12)


@pytest.mark.parametrize("n", [20, 30, 47])
def test_nested_strips(n):
    model = DiffusionModel.driftless(0.0)
    outer = BoundaryPair(Function("-4 + t^2", ("t",)), Function("4 - t^2", ("t",)))
    inner = BoundaryPair(Function("-1 + 0.5*t^2", ("t",)), Function("1.5 - t", ("t",)))
    q_outer = price_problem(Problem(model, outer), n).q.real
    q_inner = price_problem(Problem(model, inner), n).q.real
    assert 0 <= q_inner <= q_outer <= 1


def test_survival_probability_in_unit_interval():
    q = price_problem(preset("bcp").problem(), 30).q
    assert 0 <= q.real <= 1


def test_step_correction_switch():
    problem = preset("example3").problem()
    corrected = price_problem(problem, 30).q.real
    trapezoid = price_problem(problem, 30, step_correction=False).q.real
    assert corrected != trapezoid
    assert abs(corrected - trapezoid) < 0.05


def test_flat_forward_theta():
    theta, theta_dt, f = hull_white_theta(0.01, 0.01, "0.03")
    for t in (0.0, 0.37, 1.0):
        assert theta(t) == pytest.approx(0.0003 + 0.005 * (1 - math.exp(-0.02 * t)), rel=1e-13)
        assert theta_dt(t) == pytest.approx(0.0001 * math.exp(-0.02 * t), rel=1e-13)
    assert f(0.5) == 0.03


def test_curved_forward_theta_derivative():
    theta, theta_dt, _ = hull_white_theta(0.1, 0.02, "0.03 + 0.01*t - 0.004*t^2 + 0.001*sin(2*t)")
    h = 1e-5
    for t in (0.2, 0.8):
        assert theta_dt(t) == pytest.approx((theta(t + h) - theta(t - h)) / (2 * h), rel=1e-6)
    f1 = 0.01 - 0.008 * 0.2 + 0.002 * math.cos(0.4)
    f0 = 0.03 + 0.002 - 0.004 * 0.04 + 0.001 * math.sin(0.4)
    assert theta(0.2) == pytest.approx(f1 + 0.1 * f0 + 0.0004 / 0.2 * (1 - math.exp(-0.04)))


def test_hull_white_scaling():
    bounds = BoundaryPair(Function("-0.04*(1 + 0.5*sin(3*t))", ("t",)),
                          Function("0.04*(1 - 0.5*sin(3*t))", ("t",)))
    problem = hull_white_problem(0.01, 0.01, "0.03", bounds)
    assert problem.model.x0 == pytest.approx(3.0)
    for t in (0.0, 0.3, 1.0):
        lo, hi = problem.bounds.at(t)
        assert lo == pytest.approx(-4 * (1 + 0.5 * math.sin(3 * t)))
        assert hi == pytest.approx(4 * (1 - 0.5 * math.sin(3 * t)))
    np.testing.assert_allclose(problem.potential(np.array([3.0, -2.0])), [0.03, -0.02])
    mu, mu_t, mu_x, mu_xx = problem.model.partials(0.5, np.array([3.0]))
    assert mu[0] == pytest.approx((0.0003 + 0.005 * (1 - math.exp(-0.01)) - 0.0003) / 0.01)
    assert (mu_x[0], mu_xx[0]) == (-0.01, 0.0)


def test_hull_white_rejects_nonpositive_parameters():
    bounds = BoundaryPair.constant(-1, 1)
    with pytest.raises(ValueError):
        hull_white_problem(0.0, 0.01, "0.03", bounds)
    with pytest.raises(ValueError):
        hull_white_problem(0.01, -0.01, "0.03", bounds)


def test_hull_white_bond_bounded_by_survival():
    problem = preset("example2").problem()
    q = price_problem(problem, 48).q.real
    survival = price_problem(Problem(problem.model, problem.bounds), 48).q.real
    # the scaled strip keeps rates within +-0.06, which bounds the discount factor
    assert survival * math.exp(-0.06) <= q <= survival * math.exp(0.06)
    assert 0 < q < survival


def test_degenerate_study():
    study = convergence_study(wide_problem(), [10, 12, 14, 16])
    assert study.degenerate
    assert np.all(study.diff < 1e-10)
    assert math.isnan(study.slope) and math.isnan(study.r2)


def test_study_validates_n_list():
    with pytest.raises(ValueError):
        convergence_study(wide_problem(), [10, 12, 14])
    with pytest.raises(ValueError):
        convergence_study(wide_problem(), [10, 12, 12, 16])


def test_study_parallel_matches_serial():
    problem = preset("example1").problem()
    a = convergence_study(problem, [8, 10, 12, 14])
    b = convergence_study(problem, [8, 10, 12, 14], workers=4)
    np.testing.assert_array_equal(a.q, b.q)
    assert a.slope == b.slope


def test_fit_loglog_exact_power():
    n = np.array([10, 20, 40, 80])
    slope, intercept, r2 = fit_loglog(n, 5.0 * n**-3.0)
    assert slope == pytest.approx(-3.0)
    assert intercept == pytest.approx(math.log(5.0))
    assert r2 == pytest.approx(1.0)


def test_direct_price_signature():
    result = price(DiffusionModel.driftless(0.0), BoundaryPair.constant(-1, 1), ZERO_POTENTIAL,
                   Payoff.unit(), SchemeParams(32))
    assert 0.3 < result.q.real < 0.4
