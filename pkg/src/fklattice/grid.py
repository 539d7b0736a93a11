"""Boundary-anchored space lattices, one per time layer."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import BoundaryPair, SchemeParams


class GridTooCoarse(ValueError):
    """The floor in the step-size formula vanished; ``n`` (or ``gamma``) is too small."""


@dataclass(frozen=True)
class LatticeLayer:
    """Restricted lattice at time ``t = k/n``.

    ``nodes`` are ``g_hi - j*h`` for ``j = 1 .. M-1``, descending, so both
    barriers sit on the unrestricted lattice and are excluded.  Layer 0 is
    the singleton ``[x0]`` and has no step (``h`` is nan).
    """

    k: int
    t: float
    h: float
    g_lo: float
    g_hi: float
    nodes: np.ndarray

    @property
    def intervals(self) -> int:
        return len(self.nodes) + 1

    def __len__(self) -> int:
        return len(self.nodes)


def layer_step(bounds: BoundaryPair, params: SchemeParams, k: int) -> tuple[float, float]:
    """Return ``(w, h)`` for layer ``k`` (1 <= k <= n)."""
    if not 1 <= k <= params.n:
        raise ValueError(f"layer index {k} outside 1..{params.n}")
    scale = params.space_scale(k)
    ratio = bounds.width(params.time(k)) / scale
    intervals = math.floor(params.gamma * ratio)
    if intervals < 1:
        raise GridTooCoarse(
            f"floor(gamma*width/scale) = 0 at k={k} (n={params.n}, gamma={params.gamma})")
    w = ratio / intervals
    return w, w * scale


def build_layers(bounds: BoundaryPair, params: SchemeParams, x0: float) -> list[LatticeLayer]:
    """Layers ``k = 0 .. n``; layer 0 is ``{x0}``."""
    lo, hi = bounds.at(0.0)
    layers = [LatticeLayer(0, 0.0, math.nan, lo, hi, np.array([float(x0)]))]
    for k in range(1, params.n + 1):
        t = params.time(k)
        lo, hi = bounds.at(t)
        _, h = layer_step(bounds, params, k)
        ratio = (hi - lo) / h
        intervals = round(ratio)
        assert abs(intervals - ratio) < 1e-6, (k, ratio)
        nodes = hi - h * np.arange(1, intervals)
        layers.append(LatticeLayer(k, t, h, lo, hi, nodes))
    return layers
