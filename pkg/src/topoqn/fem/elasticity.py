"""Linear elasticity with P1 vector elements (interleaved dofs)."""

from __future__ import annotations

import numpy as np

from ..mesh import Mesh
from .linalg import scatter_matrix

__all__ = [
    "plane_stress_lame",
    "strain_matrices",
    "assemble_elasticity",
    "element_strains",
    "energy_densities",
]


def plane_stress_lame(E: float, nu: float) -> tuple[float, float]:
    """Lamé pair ``(mu, lam)`` for plane stress.

    ``mu = E / (2 (1 + nu))``; the 3D value ``lam* = E nu / ((1 + nu)(1 - 2 nu))``
    is reduced to ``lam = 2 mu lam* / (lam* + 2 mu)``.
    """
    if not E > 0:
        raise ValueError("Young's modulus must be positive")
    if not -1.0 < nu < 0.5:
        raise ValueError("Poisson ratio must lie in (-1, 1/2)")
    mu = E / (2.0 * (1.0 + nu))
    lam_star = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    lam = 2.0 * mu * lam_star / (lam_star + 2.0 * mu)
    return mu, lam


def _check_lame(mu: float, lam: float):
    if not (mu > 0 and 2.0 * mu + 2.0 * lam > 0):
        raise ValueError(f"invalid Lamé parameters mu={mu}, lam={lam}")


def strain_matrices(mesh: Mesh) -> np.ndarray:
    """Voigt strain-displacement matrices ``[exx, eyy, 2 exy]``, shape (T, 3, 6)."""
    G = mesh.barycentric_gradients
    B = np.zeros((mesh.n_triangles, 3, 6))
    B[:, 0, 0::2] = G[:, :, 0]
    B[:, 1, 1::2] = G[:, :, 1]
    B[:, 2, 0::2] = G[:, :, 1]
    B[:, 2, 1::2] = G[:, :, 0]
    return B


def _hooke(mu: float, lam: float) -> np.ndarray:
    return np.array([[2 * mu + lam, lam, 0.0], [lam, 2 * mu + lam, 0.0], [0.0, 0.0, mu]])


def assemble_elasticity(mesh: Mesh, alpha, lame: tuple[float, float]):
    """Stiffness of ``int alpha sigma(u) : e(u)`` with ``sigma = 2 mu e + lam tr(e) I``."""
    mu, lam = lame
    _check_lame(mu, lam)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (mesh.n_triangles,))
    B = strain_matrices(mesh)
    D = _hooke(mu, lam)
    local = np.einsum("t,tki,kl,tlj->tij", alpha * mesh.triangle_areas, B, D, B)
    n = 2 * mesh.n_nodes
    dofs = np.empty((mesh.n_triangles, 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * mesh.triangles
    dofs[:, 1::2] = 2 * mesh.triangles + 1
    return scatter_matrix(dofs, local, (n, n))


def element_strains(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Constant Voigt strain per triangle, shape (T, 3)."""
    ue = np.empty((mesh.n_triangles, 6))
    ue[:, 0::2] = u[2 * mesh.triangles]
    ue[:, 1::2] = u[2 * mesh.triangles + 1]
    return np.einsum("tki,ti->tk", strain_matrices(mesh), ue)


def energy_densities(mesh: Mesh, u: np.ndarray, lame: tuple[float, float]):
    """Per-triangle ``sigma(u):e(u)`` and ``tr(sigma(u)) tr(e(u))`` (no alpha weighting)."""
    mu, lam = lame
    eps = element_strains(mesh, u)
    sig_e = np.einsum("tk,kl,tl->t", eps, _hooke(mu, lam), eps)
    tr_e = eps[:, 0] + eps[:, 1]
    return sig_e, 2.0 * (mu + lam) * tr_e**2
