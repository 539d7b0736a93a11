"""Markov chain lattice pricing of Feynman-Kac expectations under two curvilinear barriers."""

from .engine import (
    ConvergenceStudy,
    PriceResult,
    ValueSurface,
    convergence_study,
    hull_white_problem,
    price,
    price_problem,
    surface_problem,
    value_surface,
)
from .grid import GridTooCoarse, LatticeLayer, build_layers, layer_step
from .kernel import NumericalError, TransitionLayer, assemble_layer
from .model import (
    BoundaryPair,
    DiffusionModel,
    Payoff,
    Problem,
    SchemeParams,
    SmoothPotential,
    StepPotential,
    validate_problem,
)

__all__ = [
    "BoundaryPair", "ConvergenceStudy", "DiffusionModel", "GridTooCoarse", "LatticeLayer",
    "NumericalError", "Payoff", "PriceResult", "Problem", "SchemeParams", "SmoothPotential",
    "StepPotential", "TransitionLayer", "ValueSurface", "assemble_layer", "build_layers",
    "convergence_study", "hull_white_problem", "layer_step", "price", "price_problem",
    "surface_problem", "validate_problem", "value_surface",
]
