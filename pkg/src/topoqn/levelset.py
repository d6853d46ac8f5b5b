"""Level-set representation of designs and the L2 geometry used by the optimizers.

A design is ``Omega = {psi < 0}`` for a P1 nodal field ``psi``. Inner products
use the consistent P1 mass matrix of the hold-all domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .fem.scalar import mass_matrix
from .mesh import Mesh

__all__ = [
    "LevelSetSpace",
    "LevelSetState",
    "triangle_fractions",
    "reference_clover",
    "CLOVER_DISKS",
]

# (centre x, centre y, radius) of the inclusions of the clover reference shape
CLOVER_DISKS = (
    (0.7, 0.0, 0.5),
    (-0.7, 0.0, 0.5),
    (0.0, 0.7, 0.5),
    (0.0, -0.7, 0.5),
    (0.0, 0.0, 0.2),
)


def triangle_fractions(values: np.ndarray) -> np.ndarray:
    """Area fraction of ``{v < 0}`` for linear functions on triangles.

    Parameters
    ----------
    values : ndarray of shape (T, 3)
        Nodal values per triangle.

    Returns
    -------
    ndarray of shape (T,)
        Exact fraction of the triangle where the linear interpolant is
        negative. Zero values count as inside, so a triangle whose values are
        all zero has fraction 1.
    """
    v = np.asarray(values, dtype=float)
    neg = v <= 0.0
    n_neg = neg.sum(axis=1)
    frac = np.where(n_neg == 3, 1.0, 0.0)

    # one vertex inside: the cut corner is a similar triangle
    one = np.flatnonzero(n_neg == 1)
    if one.size:
        vv = v[one]
        k = np.argmax(neg[one], axis=1)
        a = vv[np.arange(one.size), k]
        b = vv[np.arange(one.size), (k + 1) % 3]
        c = vv[np.arange(one.size), (k + 2) % 3]
        frac[one] = (a / (a - b)) * (a / (a - c))

    # two vertices inside: complement of the positive corner
    two = np.flatnonzero(n_neg == 2)
    if two.size:
        vv = v[two]
        k = np.argmin(neg[two], axis=1)
        c = vv[np.arange(two.size), k]
        a = vv[np.arange(two.size), (k + 1) % 3]
        b = vv[np.arange(two.size), (k + 2) % 3]
        frac[two] = 1.0 - (c / (c - a)) * (c / (c - b))
    return np.clip(frac, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class LevelSetState:
    """A level-set field together with its element classification.

    Attributes
    ----------
    psi : ndarray of shape (n_nodes,)
    fractions : ndarray of shape (n_triangles,)
        Fraction of each triangle inside ``Omega``.
    volume : float
        ``|Omega|``.
    """

    psi: np.ndarray
    fractions: np.ndarray = field(repr=False)
    volume: float


class LevelSetSpace:
    """L2 geometry of P1 level-set functions on a fixed mesh.

    Parameters
    ----------
    mesh : Mesh
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh

    @cached_property
    def mass(self):
        """Consistent P1 mass matrix (CSR)."""
        return mass_matrix(self.mesh)

    def _field(self, a, name="field") -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.shape != (self.mesh.n_nodes,):
            raise ValueError(f"{name} must have {self.mesh.n_nodes} nodal values, got shape {a.shape}")
        return a

    def _nonzero(self, a, name="field") -> float:
        nrm = self.norm(a)
        if not nrm > 0.0:
            raise ValueError(f"{name} has zero L2 norm")
        return nrm

    # -- classification -------------------------------------------------------
    def classify(self, psi) -> np.ndarray:
        """Per-triangle fraction of ``{psi < 0}`` (exact for the P1 interpolant)."""
        psi = self._field(psi, "psi")
        return triangle_fractions(psi[self.mesh.triangles])

    def volume(self, psi) -> float:
        return float(self.classify(psi) @ self.mesh.triangle_areas)

    def state(self, psi) -> LevelSetState:
        psi = self._field(psi, "psi").copy()
        self._nonzero(psi, "psi")
        psi.setflags(write=False)
        frac = self.classify(psi)
        frac.setflags(write=False)
        return LevelSetState(psi, frac, float(frac @ self.mesh.triangle_areas))

    # -- L2 geometry ----------------------------------------------------------
    def inner(self, a, b) -> float:
        """``(a, b)`` in L2 of the hold-all domain."""
        a = self._field(a, "a")
        b = self._field(b, "b")
        return float(a @ (self.mass @ b))

    def norm(self, a) -> float:
        a = self._field(a, "a")
        scale = np.abs(a).max(initial=0.0)
        if scale == 0.0:
            return 0.0
        # scaling first keeps tiny or huge fields from under/overflowing
        b = a / scale
        return float(scale * np.sqrt(max(float(b @ (self.mass @ b)), 0.0)))

    def project(self, a, psi) -> np.ndarray:
        """L2-orthogonal projection of ``a`` onto the complement of ``psi``."""
        a = self._field(a, "a")
        psi = self._field(psi, "psi")
        Mpsi = self.mass @ psi
        pp = float(psi @ Mpsi)
        if not pp > 0.0:
            raise ValueError("psi has zero L2 norm")
        return a - (float(a @ Mpsi) / pp) * psi

    def angle(self, psi, d) -> float:
        """Angle in radians between ``psi`` and ``d``, in ``[0, pi]``.

        Evaluated as ``atan2(|P d| |psi|, (psi, d))`` with ``P`` the projection
        onto the complement of ``psi``. This equals the arccos of the
        normalized inner product but stays accurate near 0 and pi.
        """
        npsi = self._nonzero(psi, "psi")
        nd = self._nonzero(d, "d")
        u, v = psi / npsi, d / nd
        return float(np.arctan2(self.norm(self.project(v, u)), self.inner(u, v)))

    def normalize(self, psi) -> np.ndarray:
        psi = self._field(psi, "psi")
        return psi / self._nonzero(psi, "psi")

    def constant(self, value: float) -> np.ndarray:
        return np.full(self.mesh.n_nodes, float(value))


def reference_clover(mesh: Mesh) -> np.ndarray:
    """Clover-shaped reference level set on the hold-all ``(-2, 2)^2``.

    ``psi(x) = -min_i phi_i(x)`` with ``phi_i`` the signed distance to disk
    ``i`` of :data:`CLOVER_DISKS`. The five disks are the inclusions
    (``psi > 0``); the rest of the square is ``Omega``.
    """
    if not np.allclose(mesh.rect, (-2.0, 2.0, -2.0, 2.0), rtol=0, atol=1e-12):
        raise ValueError(f"the clover reference lives on (-2, 2)^2, got rect {mesh.rect}")
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    phi = np.stack([np.hypot(x - cx, y - cy) - r for cx, cy, r in CLOVER_DISKS])
    return -phi.min(axis=0)
