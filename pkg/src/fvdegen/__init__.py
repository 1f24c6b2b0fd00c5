"""Finite volume schemes for nonlinear degenerate convection-diffusion equations.

``u_t = div(f(u) grad V + grad r(u))`` on 1D non-uniform meshes and Cartesian
grids, with a fully upwind flux that preserves discrete steady states.
"""

from .flux import FluxKind, FluxScheme, Limiter
from .kernels import BACKEND
from .mesh import Mesh1D, MeshND, build_cartesian, build_nonuniform_1d, build_uniform_1d, restrict_halving
from .model import ProblemModel
from .solver import BoundaryCondition, SolverConfig, State, StepFailure, run

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BoundaryCondition",
    "FluxKind",
    "FluxScheme",
    "Limiter",
    "Mesh1D",
    "MeshND",
    "ProblemModel",
    "SolverConfig",
    "State",
    "StepFailure",
    "build_cartesian",
    "build_nonuniform_1d",
    "build_uniform_1d",
    "restrict_halving",
    "run",
]
