"""Desk-scale multi-depot vehicle routing laboratory.

Learned two-stage solver (attention partitioner + per-tour router), exact
oracles, classical baselines, MILP export and a benchmark harness.
"""
from .core import (FeasibilityReport, Instance, InstanceError, Solution, Tour, euclid,
                   max_tours, solution_cost, tour_length, validate)
from .instancegen import DepotLayout, Distribution, GenConfig, default_capacity, generate

__version__ = "0.1.0"

__all__ = [
    "FeasibilityReport", "Instance", "InstanceError", "Solution", "Tour", "euclid", "max_tours",
    "solution_cost", "tour_length", "validate", "DepotLayout", "Distribution", "GenConfig",
    "default_capacity", "generate", "__version__",
]
