"""Problem description types: diffusion, barriers, killing potential, payoff, scheme size."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .autodiff import drift_partials
from .expr import Function, match_step, parse

# number of time samples used to check that the strip is nondegenerate
STRIP_SAMPLES = 1000


def _broadcast(values, x) -> np.ndarray:
    return np.broadcast_to(np.asarray(values, dtype=float), np.shape(x))


@dataclass(frozen=True)
class DiffusionModel:
    """Unit-diffusion process ``dX = mu(t, X) dt + dW`` started at ``x0``.

    The drift and its partials take ``(t, x)`` with scalar ``t`` and array
    ``x`` and must be pure.
    """

    x0: float
    drift: Callable
    drift_dt: Callable
    drift_dx: Callable
    drift_dxx: Callable

    @classmethod
    def driftless(cls, x0: float) -> "DiffusionModel":
        zero = lambda t, x: np.zeros(np.shape(x))  # noqa: E731
        return cls(float(x0), zero, zero, zero, zero)

    @classmethod
    def from_expression(cls, x0: float, drift) -> "DiffusionModel":
        """Build the four drift functions from one expression via hyper-dual numbers.

        ``drift`` is source text, a parsed expression, or a callable written
        in plain arithmetic.
        """
        if isinstance(drift, str):
            drift = parse(drift)
        if not callable(drift):
            drift = Function(drift, ("t", "x"))

        def part(i):
            return lambda t, x: drift_partials(drift, t, x)[i]

        return cls(float(x0), part(0), part(1), part(2), part(3))

    def partials(self, t: float, x) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(mu, dmu/dt, dmu/dx, d2mu/dx2)`` at time ``t`` over the nodes ``x``."""
        x = np.asarray(x, dtype=float)
        return tuple(_broadcast(f(t, x), x) for f in
                     (self.drift, self.drift_dt, self.drift_dx, self.drift_dxx))


@dataclass(frozen=True)
class BoundaryPair:
    """Lower and upper curvilinear barriers ``g-(t) < g+(t)`` on [0, 1]."""

    lower: Callable[[float], float]
    upper: Callable[[float], float]

    @classmethod
    def constant(cls, lower: float, upper: float) -> "BoundaryPair":
        return cls(lambda t: float(lower), lambda t: float(upper))

    def at(self, t: float) -> tuple[float, float]:
        return float(self.lower(t)), float(self.upper(t))

    def width(self, t: float) -> float:
        lo, hi = self.at(t)
        return hi - lo


@dataclass(frozen=True)
class SmoothPotential:
    """Continuous (possibly complex) killing rate ``V(x)``."""

    V: Callable

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.V(x), dtype=complex), x.shape)


@dataclass(frozen=True)
class StepPotential:
    """Killing rate ``kappa * 1{x > level}``; the indicator is strict."""

    kappa: float
    level: float

    def __post_init__(self):
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x > self.level, self.kappa, 0.0).astype(complex)


Potential = Union[SmoothPotential, StepPotential]

ZERO_POTENTIAL = SmoothPotential(lambda x: np.zeros(np.shape(x)))


def potential_from_expression(src) -> Potential:
    """Parse a potential in ``x``; ``k*step(x, r)`` shapes become :class:`StepPotential`."""
    e = parse(src) if isinstance(src, str) else src
    step = match_step(e)
    if step is not None and step[0] >= 0:
        return StepPotential(*step)
    return SmoothPotential(Function(e, ("x",), real=False))


@dataclass(frozen=True)
class Payoff:
    phi: Callable

    @classmethod
    def unit(cls) -> "Payoff":
        return cls(lambda x: np.ones(np.shape(x)))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return _broadcast(self.phi(x), x)


@dataclass(frozen=True)
class SchemeParams:
    """Number of time steps ``n``, node density ``gamma`` and refinement exponent ``delta``.

    ``delta = 0`` is allowed and is the usual choice in practice.
    """

    n: int
    gamma: float = 2.0
    delta: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not 0.0 <= self.delta <= 0.5:
            raise ValueError(f"delta must lie in [0, 1/2], got {self.delta}")

    @property
    def dt(self) -> float:
        return 1.0 / self.n

    def time(self, k: int) -> float:
        return k / self.n

    def space_scale(self, k: int) -> float:
        """``dt**(1/2 + delta)`` for interior layers, ``dt`` for the terminal one."""
        return self.dt if k == self.n else self.dt ** (0.5 + self.delta)


@dataclass(frozen=True)
class Problem:
    """Everything except the step count; ``params(n)`` completes the scheme."""

    model: DiffusionModel
    bounds: BoundaryPair
    potential: Potential = ZERO_POTENTIAL
    payoff: Payoff = field(default_factory=Payoff.unit)
    gamma: float = 2.0
    delta: float = 0.0
    quad_order: int = 16

    def params(self, n: int) -> SchemeParams:
        return SchemeParams(n, self.gamma, self.delta)


def validate_problem(model: DiffusionModel, bounds: BoundaryPair, params: SchemeParams) -> list[str]:
    """Return the violated problem invariants; an empty list means the problem is valid."""
    problems = []
    lo0, hi0 = bounds.at(0.0)
    if not (math.isfinite(lo0) and math.isfinite(hi0)):
        problems.append("boundaries not finite at t=0")
    elif not lo0 < model.x0 < hi0:
        problems.append("x0 outside strip at t=0")

    ts = np.linspace(0.0, 1.0, STRIP_SAMPLES)
    widths = np.array([bounds.width(t) for t in ts])
    if not np.all(np.isfinite(widths)):
        problems.append("boundaries not finite on [0,1]")
    else:
        j = int(np.argmin(widths))
        if widths[j] <= 0:
            problems.append(f"strip width nonpositive at t={ts[j]:g}")

    if not problems:
        for k in range(1, params.n + 1):
            width = bounds.width(params.time(k))
            if math.floor(params.gamma * width / params.space_scale(k)) < 1:
                problems.append(f"grid too coarse at k={k}: increase n or gamma")
                break
    return problems
