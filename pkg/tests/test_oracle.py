import cmath
import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr

from fklattice.config import preset
from fklattice.kernel import expected_sojourn
from fklattice.model import ZERO_POTENTIAL, BoundaryPair, DiffusionModel, Payoff, StepPotential
from fklattice.oracle import (
    McEstimate,
    bridge_sojourn_exact,
    kac_characteristic,
    mc_price,
    strip_survival_probability,
)

UNIT = BoundaryPair.constant(-1, 1)
BM = DiffusionModel.driftless(0.0)


def eigen_series(c, terms=200):
    """``P(sup|W| < c)`` from the heat-equation eigenfunction expansion."""
    k = np.arange(terms)
    return float(4 / math.pi * np.sum((-1.0) ** k / (2 * k + 1)
                                      * np.exp(-((2 * k + 1) * math.pi / c) ** 2 / 8)))


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0, 4.0])
def test_reflection_series_matches_eigen_series(c):
    assert strip_survival_probability(c) == pytest.approx(eigen_series(c), abs=1e-12)


def test_kac_characteristic_properties():
    assert kac_characteristic(0.0) == 1
    lam = 0.7
    assert kac_characteristic(-lam) == pytest.approx(kac_characteristic(lam).conjugate())
    # small lam: E exp(i lam int W^2) ~ 1 + i lam E int W^2 = 1 + i lam/2
    eps = 1e-6
    assert (kac_characteristic(eps) - 1) / eps == pytest.approx(0.5j, abs=1e-5)
    assert kac_characteristic(1.0) == pytest.approx(cmath.sqrt(1 / cmath.cosh(cmath.sqrt(-2j))))


def test_zero_payoff_has_zero_error():
    est = mc_price(BM, UNIT, ZERO_POTENTIAL, Payoff(lambda x: np.zeros_like(x)), 100, 1000, 3)
    assert est.mean == 0 and est.std_error == (0.0, 0.0)


def test_seed_reproducible():
    args = (BM, UNIT, ZERO_POTENTIAL, Payoff.unit(), 100, 5000)
    a, b = mc_price(*args, 11), mc_price(*args, 11)
    assert a.mean == b.mean and a.std_error == b.std_error
    assert mc_price(*args, 12).mean != a.mean
    assert a.seed == 11 and a.paths == 5000 and a.steps_per_path == 100


def test_size_preconditions():
    with pytest.raises(ValueError):
        mc_price(BM, UNIT, ZERO_POTENTIAL, Payoff.unit(), 99, 1000, 0)
    with pytest.raises(ValueError):
        mc_price(BM, UNIT, ZERO_POTENTIAL, Payoff.unit(), 100, 999, 0)


def test_strip_survival_estimate():
    est = mc_price(BM, UNIT, ZERO_POTENTIAL, Payoff.unit(), 400, 100_000, 5)
    assert abs(est.mean.real - strip_survival_probability(1.0)) < 4 * est.std_error[0]
    assert est.mean.imag == 0 and est.std_error[1] == 0


def test_standard_error_scaling():
    small = mc_price(BM, UNIT, ZERO_POTENTIAL, Payoff.unit(), 100, 20_000, 1)
    large = mc_price(BM, UNIT, ZERO_POTENTIAL, Payoff.unit(), 100, 80_000, 2)
    assert large.std_error[0] / small.std_error[0] == pytest.approx(0.5, rel=0.2)


@pytest.mark.slow
def test_step_size_bias_small():
    problem = preset("bcp").problem()
    a = mc_price(problem.model, problem.bounds, ZERO_POTENTIAL, Payoff.unit(), 500, 50_000, 7)
    b = mc_price(problem.model, problem.bounds, ZERO_POTENTIAL, Payoff.unit(), 2000, 50_000, 8)
    assert abs(a.mean.real - b.mean.real) < 3 * math.hypot(a.std_error[0], b.std_error[0])


def test_complex_potential_estimate():
    bounds = BoundaryPair.constant(-8, 8)
    problem = preset("kac").problem()
    est = mc_price(BM, bounds, problem.potential, Payoff.unit(), 200, 50_000, 4)
    ref = kac_characteristic(1.0)
    assert est.z_score(ref) < 4
    assert est.std_error[1] > 0


def test_step_potential_estimate_kills():
    step = StepPotential(2.0, 1 / 19)
    problem = preset("bcp").problem()
    plain = mc_price(BM, problem.bounds, ZERO_POTENTIAL, Payoff.unit(), 200, 20_000, 9)
    killed = mc_price(BM, problem.bounds, step, Payoff.unit(), 200, 20_000, 9)
    assert 0.3 < killed.mean.real < plain.mean.real


def test_z_score():
    est = McEstimate(1 + 1j, (0.1, 0.2), 1000, 100, 0)
    assert est.z_score(1.3 + 1j) == pytest.approx(3.0)
    assert est.z_score(1 + 0.6j) == pytest.approx(2.0)
    assert McEstimate(1.0, (0.0, 0.0), 1000, 100, 0).z_score(1.0) == 0
    assert McEstimate(1.0, (0.0, 0.0), 1000, 100, 0).z_score(1.5) == math.inf


def _sojourn_adaptive(r, t, x, y):
    f = lambda s: ndtr((x + (y - x) * s / t - r) / math.sqrt((t - s) * s / t))  # noqa: E731
    points = [t * (r - x) / (y - x)] if (x - r) * (y - r) < 0 else None
    return quad(f, 0, t, points=points, epsabs=1e-15, epsrel=1e-12, limit=500)[0]


@pytest.mark.parametrize("x, y", [(0.0, 0.0), (0.1, -0.2), (-1.0, 1.0), (0.3, 0.3),
                                  (-0.5, 0.0), (2.0, -3.0), (0.2, 0.01), (-0.4, -0.3)])
def test_exact_sojourn_matches_adaptive_quadrature(x, y):
    r, t = 1 / 19, 1 / 30
    assert bridge_sojourn_exact(r, t, x, y) == pytest.approx(_sojourn_adaptive(r, t, x, y),
                                                             rel=1e-10, abs=1e-15)


def test_exact_sojourn_limits_and_symmetry():
    t = 0.05
    assert bridge_sojourn_exact(0.0, t, 0.0, 0.0) == pytest.approx(t / 2)
    assert bridge_sojourn_exact(0.0, t, 40.0, 39.0) == t
    assert bridge_sojourn_exact(0.0, t, -40.0, -39.0) == 0.0
    x, y = np.random.default_rng(0).normal(size=(2, 50))
    np.testing.assert_allclose(bridge_sojourn_exact(0.2, t, x, y) + bridge_sojourn_exact(-0.2, t, -x, -y),
                               t, rtol=1e-12)


def test_kernel_quadrature_converges_to_exact():
    r, t = 1 / 19, 1 / 30
    x, y = np.meshgrid(np.linspace(-1, 1, 41), np.linspace(-1, 1, 41))
    exact = bridge_sojourn_exact(r, t, x, y)
    errors = [np.max(np.abs(expected_sojourn(r, t, x, y, order) - exact)) for order in (8, 16, 32, 64)]
    assert all(b < a for a, b in zip(errors, errors[1:]))
    assert errors[1] < 1e-3 * t
