"""Exact Bellman functions for the dyadic martingale transform problem."""
from .bellman_solver import (
    BellmanSolution,
    OmegaPoint,
    b_from_phi,
    bellman_array,
    bellman_max,
    bellman_min,
    bounds,
    equation_residual,
    in_omega,
    sharp_constant_scan,
)
from .errors import (
    ClassificationAmbiguityError,
    ConvergenceError,
    DomainError,
    NoRootError,
    SectorError,
    StepSizeError,
)
from .special_functions import ExponentParams, PlanePoint, exponent_params

__version__ = "0.1.0"

__all__ = [
    "BellmanSolution",
    "ClassificationAmbiguityError",
    "ConvergenceError",
    "DomainError",
    "ExponentParams",
    "NoRootError",
    "OmegaPoint",
    "PlanePoint",
    "SectorError",
    "StepSizeError",
    "b_from_phi",
    "bellman_array",
    "bellman_max",
    "bellman_min",
    "bounds",
    "equation_residual",
    "exponent_params",
    "in_omega",
    "sharp_constant_scan",
]
