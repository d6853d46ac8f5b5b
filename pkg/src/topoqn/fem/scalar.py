"""P1 assembly for scalar diffusion-reaction problems, linear and cubic."""

from __future__ import annotations

import numpy as np

from ..mesh import Mesh, quadrature
from .linalg import scatter_matrix, scatter_vector

__all__ = [
    "stiffness_matrix",
    "mass_matrix",
    "load_vector",
    "assemble_scalar_diffusion_reaction",
    "cubic_residual",
    "cubic_jacobian",
]


def _per_element(mesh: Mesh, value, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (mesh.n_triangles,)) \
        if np.ndim(value) == 0 else np.asarray(value, dtype=float)
    if arr.shape != (mesh.n_triangles,):
        raise ValueError(f"{name} must have one value per triangle "
                         f"({mesh.n_triangles}), got shape {arr.shape}")
    return arr


def stiffness_matrix(mesh: Mesh, coefficient=1.0):
    """``sum_T c_T * int_T grad(phi_j) . grad(phi_i)``."""
    c = _per_element(mesh, coefficient, "coefficient")
    G = mesh.barycentric_gradients
    local = np.einsum("t,tik,tjk->tij", c * mesh.triangle_areas, G, G)
    n = mesh.n_nodes
    return scatter_matrix(mesh.triangles, local, (n, n))


def mass_matrix(mesh: Mesh, coefficient=1.0, order: int = 2):
    """Consistent P1 mass matrix weighted by a piecewise constant coefficient."""
    c = _per_element(mesh, coefficient, "coefficient")
    pts, w = quadrature(order)  # P1 basis values are the barycentric coordinates
    ref = np.einsum("q,qi,qj->ij", w, pts, pts)
    local = (c * mesh.triangle_areas)[:, None, None] * ref
    n = mesh.n_nodes
    return scatter_matrix(mesh.triangles, local, (n, n))


def load_vector(mesh: Mesh, f) -> np.ndarray:
    """``sum_T f_T * int_T phi_i`` for piecewise constant ``f``."""
    f = _per_element(mesh, f, "f")
    local = np.repeat((f * mesh.triangle_areas / 3.0)[:, None], 3, axis=1)
    return scatter_vector(mesh.triangles, local, mesh.n_nodes)


def assemble_scalar_diffusion_reaction(mesh: Mesh, reaction, f, diffusion=1.0):
    """Matrix and load vector of ``-div(k grad u) + a u = f``.

    All coefficients are piecewise constant (one value per triangle), so the
    assembly is exact. Boundary conditions are not applied.

    Returns
    -------
    A : scipy.sparse.csr_matrix
    b : ndarray
    """
    a = _per_element(mesh, reaction, "reaction")
    if np.any(a < 0):
        raise ValueError("reaction coefficient must be non-negative")
    A = stiffness_matrix(mesh, diffusion) + mass_matrix(mesh, a)
    A.eliminate_zeros()
    return A.tocsr(), load_vector(mesh, f)


def _cubic_quadrature(mesh: Mesh, u: np.ndarray):
    pts, w = quadrature(4)
    uq = u[mesh.triangles] @ pts.T  # (T, Q)
    return pts, w, uq


def cubic_residual(mesh: Mesh, u, reaction, f, stiffness=None) -> np.ndarray:
    """Weak residual of ``-lap(u) + a u^3 - f``."""
    a = _per_element(mesh, reaction, "reaction")
    K = stiffness if stiffness is not None else stiffness_matrix(mesh)
    pts, w, uq = _cubic_quadrature(mesh, u)
    local = np.einsum("q,tq,qi->ti", w, uq**3, pts) * (a * mesh.triangle_areas)[:, None]
    return K @ u + scatter_vector(mesh.triangles, local, mesh.n_nodes) - load_vector(mesh, f)


def cubic_jacobian(mesh: Mesh, u, reaction, stiffness=None):
    """Jacobian of :func:`cubic_residual`: ``K + int 3 a u^2 phi_j phi_i``."""
    a = _per_element(mesh, reaction, "reaction")
    K = stiffness if stiffness is not None else stiffness_matrix(mesh)
    pts, w, uq = _cubic_quadrature(mesh, u)
    local = np.einsum("q,tq,qi,qj->tij", w, 3.0 * uq**2, pts, pts)
    local *= (a * mesh.triangle_areas)[:, None, None]
    n = mesh.n_nodes
    return (K + scatter_matrix(mesh.triangles, local, (n, n))).tocsr()
