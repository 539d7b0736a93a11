"""Pricing by chained transition matrices, value surfaces and convergence studies."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .autodiff import HyperDual
from .expr import Function
from .grid import build_layers
from .kernel import DEFAULT_QUAD_ORDER, NumericalError, assemble_layer
from .model import (
    BoundaryPair,
    DiffusionModel,
    Payoff,
    Potential,
    Problem,
    SchemeParams,
    SmoothPotential,
)

DEFAULT_N_LIST = (16, 24, 32, 48, 64, 96, 128)
# successive differences below this are treated as roundoff, not convergence
DEGENERATE_DIFF = 1e-10


@dataclass(frozen=True)
class PriceResult:
    n: int
    q: complex
    layer_count: int
    wall_time: float
    layer_sizes: tuple = ()


@dataclass(frozen=True)
class SurfaceLayer:
    k: int
    t: float
    nodes: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class ValueSurface:
    layers: list

    @property
    def q(self) -> complex:
        return complex(self.layers[0].values[0])

    def rows(self):
        """``(t, x, v)`` triples in layer order."""
        for layer in self.layers:
            for x, v in zip(layer.nodes, layer.values):
                yield layer.t, float(x), complex(v)


@dataclass(frozen=True)
class ConvergenceStudy:
    """``q[i] = Q_{n[i]}``, ``q_next[i] = Q_{n[i]+1}``, ``diff[i] = |Re q_next - Re q|``.

    ``slope`` and ``r2`` come from a least-squares line through
    ``(log n, log diff)``; both are nan when ``degenerate``.
    """

    n: np.ndarray
    q: np.ndarray
    q_next: np.ndarray
    diff: np.ndarray
    slope: float
    intercept: float
    r2: float
    degenerate: bool


def _check_finite(values, k: int) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"nonfinite values after layer {k}")


def price(model: DiffusionModel, bounds: BoundaryPair, potential: Potential, payoff: Payoff,
          params: SchemeParams, *, quad_order: int = DEFAULT_QUAD_ORDER,
          step_correction: bool = True) -> PriceResult:
    """Approximate the killed Feynman-Kac expectation with ``params.n`` time steps.

    Propagates the single row of the initial state forward through the
    transition matrices and finishes with the payoff on the terminal lattice.
    """
    start = time.perf_counter()
    layers = build_layers(bounds, params, model.x0)
    row = np.ones(1, dtype=complex)
    for k in range(1, params.n + 1):
        row = row @ assemble_layer(model, potential, params, layers, k, quad_order=quad_order,
                                   step_correction=step_correction).weights
        _check_finite(row, k)
    q = complex(row @ payoff(layers[-1].nodes))
    if not (math.isfinite(q.real) and math.isfinite(q.imag)):
        raise NumericalError("nonfinite price")
    return PriceResult(params.n, q, len(layers), time.perf_counter() - start,
                       tuple(len(layer) for layer in layers))


def value_surface(model: DiffusionModel, bounds: BoundaryPair, potential: Potential,
                  payoff: Payoff, params: SchemeParams, *, quad_order: int = DEFAULT_QUAD_ORDER,
                  step_correction: bool = True) -> ValueSurface:
    """Backward pass giving the value at every lattice node; layer 0 holds the price."""
    layers = build_layers(bounds, params, model.x0)
    values = np.asarray(payoff(layers[-1].nodes), dtype=complex)
    out = [SurfaceLayer(params.n, layers[-1].t, layers[-1].nodes, values)]
    for k in range(params.n, 0, -1):
        S = assemble_layer(model, potential, params, layers, k, quad_order=quad_order,
                           step_correction=step_correction)
        values = S.weights @ values
        _check_finite(values, k)
        out.append(SurfaceLayer(k - 1, layers[k - 1].t, layers[k - 1].nodes, values))
    out.reverse()
    return ValueSurface(out)


def price_problem(problem: Problem, n: int, **kwargs) -> PriceResult:
    kwargs.setdefault("quad_order", problem.quad_order)
    return price(problem.model, problem.bounds, problem.potential, problem.payoff,
                 problem.params(n), **kwargs)


def surface_problem(problem: Problem, n: int, **kwargs) -> ValueSurface:
    kwargs.setdefault("quad_order", problem.quad_order)
    return value_surface(problem.model, problem.bounds, problem.potential, problem.payoff,
                         problem.params(n), **kwargs)


def fit_loglog(n, diff) -> tuple[float, float, float]:
    """Least-squares ``log diff = slope*log n + intercept``; returns ``(slope, intercept, r2)``."""
    lx, ly = np.log(np.asarray(n, dtype=float)), np.log(np.asarray(diff, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else math.nan
    return float(slope), float(intercept), float(r2)


def convergence_study(problem: Problem, n_list=DEFAULT_N_LIST, *, workers: int = 1,
                      **price_kwargs) -> ConvergenceStudy:
    """Compute ``Q_n`` and ``Q_{n+1}`` for each listed ``n`` and fit the decay of their difference.

    Differences use real parts (complex problems are judged on Re Q).
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 4 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list needs at least 4 increasing values")
    wanted = sorted(set(n_list) | {n + 1 for n in n_list})

    def run(n):
        return price_problem(problem, n, **price_kwargs).q

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            qs = dict(zip(wanted, pool.map(run, wanted)))
    else:
        qs = {n: run(n) for n in wanted}

    q = np.array([qs[n] for n in n_list])
    q_next = np.array([qs[n + 1] for n in n_list])
    diff = np.abs(q_next.real - q.real)
    degenerate = bool(np.any(diff < DEGENERATE_DIFF) or not np.all(np.isfinite(diff)))
    if degenerate:
        slope = intercept = r2 = math.nan
    else:
        slope, intercept, r2 = fit_loglog(n_list, diff)
    return ConvergenceStudy(np.array(n_list), q, q_next, diff, slope, intercept, r2, degenerate)


# Hull-White short rate

def hull_white_theta(alpha: float, sigma: float, forward_curve):
    """Return ``theta(t)`` and its time derivative fitted to the forward curve ``f``.

    ``theta = f' + alpha*f + sigma**2/(2*alpha) * (1 - exp(-2*alpha*t))``; the
    derivatives of ``f`` come from one hyper-dual evaluation.
    """
    f = forward_curve if callable(forward_curve) else Function(forward_curve, ("t",))

    def jets(t):
        out = f(HyperDual.seed(float(t)))
        return out.parts() if isinstance(out, HyperDual) else (out, 0.0, 0.0, 0.0)

    def theta(t):
        f0, f1, _, _ = jets(t)
        return float(f1 + alpha * f0 + sigma**2 / (2 * alpha) * (1 - math.exp(-2 * alpha * t)))

    def theta_dt(t):
        _, f1, _, f2 = jets(t)
        return float(f2 + alpha * f1 + sigma**2 * math.exp(-2 * alpha * t))

    return theta, theta_dt, lambda t: float(jets(t)[0])


def hull_white_problem(alpha: float, sigma: float, forward_curve, bounds: BoundaryPair, *,
                       gamma: float = 2.0, delta: float = 0.0) -> Problem:
    """Zero-coupon bond with rate barriers, rescaled to unit diffusion.

    The state is ``x = r/sigma``: ``x0 = f(0)/sigma``, drift
    ``(theta(t) - alpha*sigma*x)/sigma``, barriers ``g/sigma``, discount rate
    ``V(x) = sigma*x`` and unit payoff.
    """
    if not (alpha > 0 and sigma > 0):
        raise ValueError("alpha and sigma must be positive")
    theta, theta_dt, f = hull_white_theta(alpha, sigma, forward_curve)

    def drift(t, x):
        return (theta(t) - alpha * sigma * np.asarray(x)) / sigma

    def drift_dt(t, x):
        return np.full(np.shape(x), theta_dt(t) / sigma)

    def drift_dx(t, x):
        return np.full(np.shape(x), -alpha)

    def drift_dxx(t, x):
        return np.zeros(np.shape(x))

    model = DiffusionModel(f(0.0) / sigma, drift, drift_dt, drift_dx, drift_dxx)
    scaled = BoundaryPair(lambda t: bounds.lower(t) / sigma, lambda t: bounds.upper(t) / sigma)
    potential = SmoothPotential(lambda x: sigma * np.asarray(x))
    return Problem(model, scaled, potential, Payoff.unit(), gamma, delta)
