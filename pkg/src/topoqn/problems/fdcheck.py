"""Finite-radius difference quotients for checking topological derivatives.

A disk ``B(x0, eps)`` is switched to the opposite material and the change in
cost is divided by the disk area. As ``eps`` shrinks the quotient approaches
the topological derivative ``DJ(x0)``, which equals ``-DJ_gen(x0)`` inside
the design and ``+DJ_gen(x0)`` outside.
"""

from __future__ import annotations

import numpy as np

from ..mesh import Mesh, evaluate_p1, locate_triangle
from .base import ProblemOracle

__all__ = ["disk_triangle_areas", "td_fd_quotient", "generalized_fd_quotient"]


def _cross(p, q):
    return p[0] * q[1] - p[1] * q[0]


def _edge_term(a, b, r):
    """Signed area of ``disk(0, r)`` intersected with triangle ``(0, a, b)``."""

    def sector(p, q):
        return 0.5 * r * r * np.arctan2(_cross(p, q), p @ q)

    d = b - a
    A = d @ d
    if A == 0.0:
        return 0.0
    B = a @ d
    C = a @ a - r * r
    disc = B * B - A * C
    if disc <= 0.0:
        return sector(a, b)
    s = np.sqrt(disc)
    t1, t2 = (-B - s) / A, (-B + s) / A
    if t2 <= 0.0 or t1 >= 1.0:
        return sector(a, b)
    p1 = a + max(t1, 0.0) * d
    p2 = a + min(t2, 1.0) * d
    return sector(a, p1) + 0.5 * _cross(p1, p2) + sector(p2, b)


def disk_triangle_areas(mesh: Mesh, center, radius: float) -> np.ndarray:
    """Exact area of ``B(center, radius)`` inside every triangle of the mesh."""
    c = np.asarray(center, dtype=float)
    P = mesh.nodes[mesh.triangles]
    lo, hi = P.min(axis=1), P.max(axis=1)
    near = np.flatnonzero(np.all((lo <= c + radius) & (hi >= c - radius), axis=1))
    out = np.zeros(mesh.n_triangles)
    for t in near:
        v = P[t] - c
        out[t] = abs(sum(_edge_term(v[i], v[(i + 1) % 3], radius) for i in range(3)))
    return out


def _check_disk(oracle: ProblemOracle, fractions, x0, eps):
    mesh = oracle.mesh
    x0 = np.asarray(x0, dtype=float)
    if not eps > 0:
        raise ValueError("eps must be positive")
    x_lo, x_hi, y_lo, y_hi = mesh.rect
    if not (x_lo + eps < x0[0] < x_hi - eps and y_lo + eps < x0[1] < y_hi - eps):
        raise ValueError(f"disk of radius {eps} around {tuple(x0)} leaves the domain")
    areas = disk_triangle_areas(mesh, x0, eps)
    hit = areas > 0.0
    inside = fractions[locate_triangle(mesh, x0)[0]] == 1.0
    uniform = np.all(fractions[hit] == (1.0 if inside else 0.0))
    if not uniform:
        raise ValueError(f"disk of radius {eps} around {tuple(x0)} touches the interface")
    return areas, inside


def td_fd_quotient(oracle: ProblemOracle, psi, x0, eps: float, mode: str = "exact") -> float:
    """``(J(Omega_eps) - J(Omega)) / (pi eps^2)`` for a disk of the other material at ``x0``.

    Parameters
    ----------
    oracle : ProblemOracle
    psi : ndarray
        Level set of the unperturbed design.
    x0 : array_like of shape (2,)
        Centre of the disk; the disk must stay inside the domain and on one
        side of the interface.
    eps : float
        Disk radius.
    mode : {"exact", "nodal"}
        ``"exact"`` changes the element volume fractions by the exact areas of
        the disk inside each triangle. ``"nodal"`` instead overwrites the
        level-set values of the nodes inside the disk with the opposite sign
        and the local magnitude of ``psi``; it only resolves disks spanning
        several elements.

    Returns
    -------
    float
        Estimate of the (ordinary) topological derivative ``DJ(x0)``.
    """
    psi = np.asarray(psi, dtype=float)
    base = oracle.cost(psi)
    fractions = oracle.space.classify(psi)
    areas, inside = _check_disk(oracle, fractions, x0, eps)
    mesh = oracle.mesh
    if mode == "exact":
        change = areas / mesh.triangle_areas
        new = np.clip(fractions - change if inside else fractions + change, 0.0, 1.0)
        perturbed = oracle.cost_from_fractions(new)
    elif mode == "nodal":
        nodes = np.flatnonzero(np.hypot(*(mesh.nodes - np.asarray(x0, float)).T) < eps)
        if nodes.size == 0:
            raise ValueError("no mesh node inside the disk; use mode='exact'")
        h = np.abs(psi[mesh.triangles[areas > 0]]).max()
        psi_eps = psi.copy()
        psi_eps[nodes] = h if inside else -h
        perturbed = oracle.cost(psi_eps)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return (perturbed - base) / (np.pi * eps**2)


def generalized_fd_quotient(oracle: ProblemOracle, psi, x0, eps: float, mode: str = "exact"):
    """Quotient mapped to the generalized convention, with the formula value at ``x0``.

    Returns ``(quotient, formula)`` where ``quotient`` is ``-DJ`` inside the
    design and ``+DJ`` outside, and ``formula`` is the interpolated nodal
    derivative of the oracle at ``x0``.
    """
    q = td_fd_quotient(oracle, psi, x0, eps, mode)
    fractions = oracle.space.classify(psi)
    inside = fractions[locate_triangle(oracle.mesh, x0)[0]] == 1.0
    formula = evaluate_p1(oracle.mesh, oracle.derivative(psi), x0)
    return (-q if inside else q), formula
