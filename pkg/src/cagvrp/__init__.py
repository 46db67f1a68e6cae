"""Exact solver for the cooperative air-ground vehicle routing problem (CAGVRP).

A ground vehicle tours a subset of targets (stops); a UAV launched at each
stop covers the remaining targets in directed sub-tours, subject to a
communication radius between each covered target and its stop.  The optimal
joint routing is computed by branch-and-cut over a linearized MILP, with
sub-tour elimination and 2-matching inequalities separated on demand.
"""

from cagvrp.instance import Instance, euclidean_instance, generate_random, load_instance, save_instance
from cagvrp.model import MilpModel, Solution, build_model, decode, encode, objective_of, validate

__all__ = [
    "Instance",
    "MilpModel",
    "Solution",
    "build_model",
    "decode",
    "encode",
    "euclidean_instance",
    "generate_random",
    "load_instance",
    "objective_of",
    "save_instance",
    "validate",
]

__version__ = "0.1.0"
