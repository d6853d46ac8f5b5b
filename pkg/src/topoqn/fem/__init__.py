"""Finite element assembly and solvers."""

from .elasticity import assemble_elasticity, energy_densities, plane_stress_lame
from .linalg import (
    NewtonConvergenceError,
    NewtonResult,
    NewtonSettings,
    SolverError,
    apply_dirichlet,
    newton_solve,
    solve_sparse,
)
from .navier_stokes import NavierStokesAssembler, assemble_navier_stokes
from .scalar import (
    assemble_scalar_diffusion_reaction,
    cubic_jacobian,
    cubic_residual,
    load_vector,
    mass_matrix,
    stiffness_matrix,
)

__all__ = [
    "NavierStokesAssembler",
    "NewtonConvergenceError",
    "NewtonResult",
    "NewtonSettings",
    "SolverError",
    "apply_dirichlet",
    "assemble_elasticity",
    "assemble_navier_stokes",
    "assemble_scalar_diffusion_reaction",
    "cubic_jacobian",
    "cubic_residual",
    "energy_densities",
    "load_vector",
    "mass_matrix",
    "newton_solve",
    "plane_stress_lame",
    "solve_sparse",
    "stiffness_matrix",
]
