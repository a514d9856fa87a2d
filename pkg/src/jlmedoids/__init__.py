"""Gaussian JL projections for discrete (k, z)-clustering: maps, nets, solvers, and guarantee checks."""

from . import _backend
from .clustering import ClusteringInstance, OptResult, Solution, cost, opt, opt_exact, opt_local
from .geometry import WeightedPointSet, dist, distance_matrix
from .projection import DimensionRecipe, GaussianMap, sample_map, target_dimension

__version__ = "0.1.0"
BACKEND = _backend.NAME

__all__ = [
    "BACKEND",
    "ClusteringInstance",
    "DimensionRecipe",
    "GaussianMap",
    "OptResult",
    "Solution",
    "WeightedPointSet",
    "cost",
    "dist",
    "distance_matrix",
    "opt",
    "opt_exact",
    "opt_local",
    "sample_map",
    "target_dimension",
]
