"""Boundary-element field solver for conductor assemblies."""

from .bem import (DEFAULT_RESOLUTION, MAX_PANELS, ChargeSolution, Electrode, TrapAssembly, UnitSolutions,
                  capacitance_matrix, evaluate, factorize, influence_matrix, max_surface_field, solve_charges)
from .mesh import SizeField, SurfaceMesh
from .primitives import KINDS, Primitive, half_plane_slab

__all__ = [
    "DEFAULT_RESOLUTION", "MAX_PANELS", "ChargeSolution", "Electrode", "TrapAssembly", "UnitSolutions",
    "capacitance_matrix", "evaluate", "factorize", "influence_matrix", "max_surface_field", "solve_charges",
    "SizeField", "SurfaceMesh", "KINDS", "Primitive", "half_plane_slab",
]
