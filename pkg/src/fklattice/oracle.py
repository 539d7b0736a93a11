"""Monte Carlo reference estimator and closed-form checks.

The simulation is deliberately independent of the lattice: Euler paths on a
fine time grid, a per-step Brownian bridge survival weight, and a trapezoid
(or bridge-expected sojourn) integral of the killing rate along the path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import erfcx, ndtr

from .model import BoundaryPair, DiffusionModel, Payoff, Potential, StepPotential

MIN_STEPS = 100
MIN_PATHS = 1000
CHUNK = 100_000
# beyond this many step sd's from r the bridge sojourn equals the indicator to ~1e-9 relative
_SOJOURN_BAND = 3.0
# 1 - exp(a) == 1.0 exactly in double precision below this exponent
_NEGLIGIBLE_EXPONENT = -40.0


@dataclass(frozen=True)
class McEstimate:
    mean: complex
    std_error: tuple  # (real part, imaginary part)
    paths: int
    steps_per_path: int
    seed: int

    def z_score(self, value: complex) -> float:
        """Largest componentwise distance of ``value`` from the mean in standard errors."""
        z = []
        for diff, se in ((value.real - self.mean.real, self.std_error[0]),
                         (value.imag - self.mean.imag, self.std_error[1])):
            if se > 0:
                z.append(abs(diff) / se)
            elif diff != 0:
                z.append(math.inf)
        return max(z, default=0.0)


@njit(cache=True)
def _bridge_step(x, y, weight, lo0, hi0, lo1, hi1, dt):
    """Multiply in the bridge survival factor; paths leaving the strip get weight 0."""
    c = -2.0 / dt
    for i in range(x.size):
        if weight[i] == 0.0:
            continue
        xi, yi = x[i], y[i]
        if not lo1 < yi < hi1:
            weight[i] = 0.0
            continue
        a = c * (hi0 - xi) * (hi1 - yi)
        b = c * (lo0 - xi) * (lo1 - yi)
        if a < _NEGLIGIBLE_EXPONENT and b < _NEGLIGIBLE_EXPONENT:
            continue
        f = 1.0 - math.exp(a) - math.exp(b)
        weight[i] *= f if f > 0.0 else 0.0


@njit(cache=True)
def _sojourn_step(x, y, occupation, r, dt, nodes, weights, band):
    """Add the bridge-expected time above r over one step (exact indicator far from r)."""
    for i in range(x.size):
        xi, yi = x[i], y[i]
        if (xi > r) == (yi > r) and min(abs(xi - r), abs(yi - r)) >= band:
            if yi > r:
                occupation[i] += dt
            continue
        total = 0.0
        for j in range(nodes.size):
            u = nodes[j]
            sd = math.sqrt(dt * u * (1.0 - u))
            # P(N(m, sd^2) > r) = erfc((r - m)/(sd*sqrt 2))/2
            total += weights[j] * 0.5 * math.erfc((r - xi - (yi - xi) * u) / (sd * math.sqrt(2.0)))
        occupation[i] += dt * total


def _simulate(model, bounds, potential, payoff, m, size, rng, quad_order):
    dt = 1.0 / m
    sqdt = math.sqrt(dt)
    x = np.full(size, model.x0)
    weight = np.ones(size)
    index = np.arange(size)  # original slot of each live path
    step = isinstance(potential, StepPotential)
    if step:
        u, w = np.polynomial.legendre.leggauss(quad_order)
        u, w = 0.5 * (u + 1.0), 0.5 * w
        occupation = np.zeros(size)
    else:
        integral = np.zeros(size, dtype=complex)
        v_prev = potential(x)
    lo0, hi0 = bounds.at(0.0)

    for j in range(m):
        t = j * dt
        lo1, hi1 = bounds.at(t + dt)
        y = x + np.asarray(model.drift(t, x), dtype=float) * dt + sqdt * rng.standard_normal(len(x))
        _bridge_step(x, y, weight, lo0, hi0, lo1, hi1, dt)
        if step:
            _sojourn_step(x, y, occupation, potential.level, dt, u, w, _SOJOURN_BAND * sqdt)
        else:
            v_next = potential(y)
            integral += 0.5 * dt * (v_prev + v_next)
            v_prev = v_next

        x = y
        lo0, hi0 = lo1, hi1
        alive = weight > 0
        if alive.sum() < 0.75 * len(alive):
            x, weight, index = x[alive], weight[alive], index[alive]
            if step:
                occupation = occupation[alive]
            else:
                integral, v_prev = integral[alive], v_prev[alive]

    discount = np.exp(-potential.kappa * occupation) if step else np.exp(-integral)
    out = np.zeros(size, dtype=complex)
    out[index] = weight * payoff(x) * discount
    return out


def mc_price(model: DiffusionModel, bounds: BoundaryPair, potential: Potential, payoff: Payoff,
             m_steps: int, paths: int, seed: int, *, quad_order: int = 16) -> McEstimate:
    """Monte Carlo estimate of the killed Feynman-Kac expectation.

    Paths use Euler steps of size ``1/m_steps``; each step multiplies the path
    weight by the two-barrier bridge survival factor.  Paths are simulated in
    chunks with independent streams spawned from ``seed``, so the result is
    reproducible bit-for-bit.
    """
    if m_steps < MIN_STEPS:
        raise ValueError(f"m_steps must be at least {MIN_STEPS}, got {m_steps}")
    if paths < MIN_PATHS:
        raise ValueError(f"paths must be at least {MIN_PATHS}, got {paths}")

    sizes = [CHUNK] * (paths // CHUNK) + ([paths % CHUNK] if paths % CHUNK else [])
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    values = np.concatenate([
        _simulate(model, bounds, potential, payoff, m_steps, size, np.random.default_rng(ss), quad_order)
        for size, ss in zip(sizes, streams)
    ])
    mean = complex(values.mean())
    se = (float(values.real.std(ddof=1) / math.sqrt(paths)),
          float(values.imag.std(ddof=1) / math.sqrt(paths)))
    return McEstimate(mean, se, paths, m_steps, seed)


def strip_survival_probability(c: float, terms: int = 50) -> float:
    """``P(sup_{[0,1]} |W| < c)`` for standard Brownian motion, by the reflection series."""
    k = np.arange(-terms, terms + 1)
    return float(np.sum((-1.0) ** k * (ndtr((2 * k + 1) * c) - ndtr((2 * k - 1) * c))))


def kac_characteristic(lam: float) -> complex:
    """``E exp(i*lam*int_0^1 W(u)**2 du)`` in closed form.

    Equals ``sqrt(sech(sqrt(-2i*lam)))`` with principal branches; sech is
    even, so only the sign inside the inner root matters.
    """
    return complex(np.sqrt(1.0 / np.cosh(np.sqrt(-2j * lam))))


def _mills(w):
    """``Phibar(w)/phi(w)`` without underflow."""
    return math.sqrt(math.pi / 2) * erfcx(w / math.sqrt(2.0))


def bridge_sojourn_exact(r, t, x, y):
    """Expected time a Brownian bridge from ``(0, x)`` to ``(t, y)`` spends above ``r``, in closed form.

    Convolving the two heat kernels over the crossing time gives
    ``P(B_s > r)`` integrated over s as
    ``(1/p_t(x, y)) * int_r^inf Phibar((|x - z| + |z - y|)/sqrt(t)) dz``,
    which reduces to Mills ratios.  Used to check the quadrature in the kernel.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    st = math.sqrt(t)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    d = (hi - lo) / st

    def tail(w):
        # (t/2) * psi(w)/phi(d) with psi(w) = int_w^inf Phibar = phi(w)*(1 - w*R(w))
        return 0.5 * t * np.exp(-0.5 * (w - d) * (w + d)) * (1.0 - w * _mills(w))

    with np.errstate(over="ignore", invalid="ignore"):  # branches not selected may overflow
        above = tail((2.0 * r - x - y) / st)
        below = t - tail((x + y - 2.0 * r) / st)
        between = st * ((hi - r) * _mills(d) + 0.5 * st * (1.0 - d * _mills(d)))
    return np.where(r >= hi, above, np.where(r < lo, below, between))
