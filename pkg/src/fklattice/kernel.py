"""One-step transition weights between consecutive lattice layers.

An entry of the layer-k matrix is the product of three factors: a Gaussian
pseudo-transition probability (unnormalised), a Brownian bridge survival
factor for the two barriers, and a factor accounting for the killing rate
over the step.  All functions broadcast, so ``x[:, None]`` against
``y[None, :]`` yields whole matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from .grid import LatticeLayer
from .model import DiffusionModel, Potential, SchemeParams, StepPotential

DEFAULT_QUAD_ORDER = 16


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TransitionLayer:
    """Matrix from layer ``k-1`` nodes (rows) to layer ``k`` nodes (columns).

    ``clamped`` counts entries whose raw bridge factor was negative and set to 0.
    """

    k: int
    weights: np.ndarray
    clamped: int = 0

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]


def moments(model: DiffusionModel, params: SchemeParams, k: int, x):
    """Step mean and variance for the move from ``t_{k-1}`` to ``t_k``.

    Second-order corrected: the mean adds ``dt/2 * (mu_t + mu*mu_x + mu_xx/2)``
    to the drift and the variance is ``(1 + dt/2 * mu_x)**2 * dt``.
    """
    if not 1 <= k <= params.n:
        raise ValueError(f"layer index {k} outside 1..{params.n}")
    dt = params.dt
    mu, mu_t, mu_x, mu_xx = model.partials(params.time(k - 1), x)
    mu_step = (mu + 0.5 * dt * (mu_t + mu * mu_x + 0.5 * mu_xx)) * dt
    sigma2_step = (1.0 + 0.5 * dt * mu_x) ** 2 * dt
    if not (np.all(np.isfinite(mu_step)) and np.all(np.isfinite(sigma2_step))):
        raise NumericalError(f"nonfinite drift at layer {k}")
    return mu_step, sigma2_step


def pseudo_prob(x, y, mu_step, sigma2_step, h):
    """Gaussian density of ``y`` around ``x + mu_step`` times the node spacing ``h``."""
    z = y - x - mu_step
    return h * np.exp(-z * z / (2.0 * sigma2_step)) / np.sqrt(2.0 * np.pi * sigma2_step)


def bridge_factor(x, y, k: int, layers: list[LatticeLayer], params: SchemeParams,
                  clamp: bool = True):
    """Probability-like weight that the bridge from ``(t_{k-1}, x)`` to ``(t_k, y)`` hits neither barrier.

    Double crossings within one step are ignored, so the raw value can dip
    below zero at very coarse ``n``; it is clamped to 0 unless ``clamp=False``.
    """
    prev, cur = layers[k - 1], layers[k]
    n = params.n
    upper = np.exp(-2.0 * n * (prev.g_hi - x) * (cur.g_hi - y))
    lower = np.exp(-2.0 * n * (prev.g_lo - x) * (cur.g_lo - y))
    raw = 1.0 - upper - lower
    return np.maximum(raw, 0.0) if clamp else raw


def potential_factor_smooth(V, params: SchemeParams, x, y):
    """Trapezoid estimate ``exp(-dt/2 * (V(x) + V(y)))`` of the step's discount."""
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.exp(-0.5 * params.dt * (V(x) + V(y)))
    if not np.all(np.isfinite(out)):
        raise NumericalError("potential factor overflowed; Re V too negative for this n")
    return out


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on (0, 1)."""
    xi, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (xi + 1.0), 0.5 * w


def expected_sojourn(r, t, x, y, quad_order: int = DEFAULT_QUAD_ORDER):
    """Expected time a Brownian bridge from ``(0, x)`` to ``(t, y)`` spends above ``r``.

    Gauss-Legendre quadrature of ``P(B_s > r)`` over (0, t); the quadrature
    nodes avoid the endpoints where the bridge variance vanishes.
    """
    u, w = gauss_legendre(quad_order)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = np.zeros(np.broadcast_shapes(x.shape, y.shape))
    for uj, wj in zip(u, w):
        mean = x + (y - x) * uj
        sd = math.sqrt(t * uj * (1.0 - uj))
        total += wj * ndtr((mean - r) / sd)
    return t * total


def potential_factor_step(kappa: float, r: float, params: SchemeParams, x, y,
                          quad_order: int = DEFAULT_QUAD_ORDER):
    """First-order sojourn correction ``1 - kappa * E[time above r]`` over one step."""
    if kappa == 0:
        return np.ones(np.broadcast_shapes(np.shape(x), np.shape(y)))
    return 1.0 - kappa * expected_sojourn(r, params.dt, x, y, quad_order)


def assemble_layer(model: DiffusionModel, potential: Potential, params: SchemeParams,
                   layers: list[LatticeLayer], k: int, *,
                   quad_order: int = DEFAULT_QUAD_ORDER,
                   step_correction: bool = True) -> TransitionLayer:
    """Build the corrected transition matrix for step ``k``.

    A :class:`StepPotential` uses the sojourn correction unless
    ``step_correction`` is False, in which case it falls back to the
    trapezoid factor like any other potential.
    """
    src, dst = layers[k - 1].nodes, layers[k].nodes
    mu_step, sigma2_step = moments(model, params, k, src)
    X, Y = src[:, None], dst[None, :]
    p = pseudo_prob(X, Y, mu_step[:, None], sigma2_step[:, None], layers[k].h)
    raw = bridge_factor(X, Y, k, layers, params, clamp=False)
    clamped = int(np.count_nonzero(raw < 0))
    weights = p * np.maximum(raw, 0.0)
    if isinstance(potential, StepPotential) and step_correction:
        weights = weights * potential_factor_step(potential.kappa, potential.level, params,
                                                  X, Y, quad_order)
    else:
        weights = weights * potential_factor_smooth(potential, params, X, Y)
    weights = np.asarray(weights, dtype=complex)
    return TransitionLayer(k, weights, clamped)
