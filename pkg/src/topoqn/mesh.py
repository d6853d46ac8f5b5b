"""Structured crossed-triangle meshes, quadrature rules and function spaces."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "Mesh",
    "FunctionSpace",
    "build_crossed_grid",
    "quadrature",
    "locate_node",
    "locate_triangle",
    "evaluate_p1",
]

SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation of an axis-aligned rectangle.

    Attributes
    ----------
    nodes : ndarray of shape (n_nodes, 2)
    triangles : ndarray of shape (n_triangles, 3)
        Node indices, counter-clockwise.
    rect : tuple
        ``(x0, x1, y0, y1)``.
    boundary : dict
        Side tag -> sorted node indices on that side. Corner nodes belong to
        both adjacent sides.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    rect: tuple
    nx: int
    ny: int
    boundary: dict = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.rect
        return (x1 - x0) * (y1 - y0)

    @property
    def h(self) -> float:
        """Edge length of a grid square (the larger of the two directions)."""
        x0, x1, y0, y1 = self.rect
        return max((x1 - x0) / self.nx, (y1 - y0) / self.ny)

    @cached_property
    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """Gradients of the three barycentric coordinates, shape (T, 3, 2)."""
        p = self.nodes[self.triangles]
        x, y = p[..., 0], p[..., 1]
        two_area = 2.0 * self.triangle_areas
        grads = np.empty((self.n_triangles, 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            grads[:, i, 0] = (y[:, j] - y[:, k]) / two_area
            grads[:, i, 1] = (x[:, k] - x[:, j]) / two_area
        return grads

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted node pairs, lexicographically ordered."""
        return self._edge_data[0]

    @cached_property
    def triangle_edges(self) -> np.ndarray:
        """Edge indices of local edges (0,1), (1,2), (2,0), shape (T, 3)."""
        return self._edge_data[1]

    @cached_property
    def _edge_data(self):
        t = self.triangles
        local = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        return edges, inverse.reshape(-1, 3)

    @cached_property
    def boundary_node_set(self) -> np.ndarray:
        return np.unique(np.concatenate([self.boundary[s] for s in SIDES]))

    def boundary_nodes(self, *sides: str) -> np.ndarray:
        """Union of the node indices on the given sides (all sides if none given)."""
        sides = sides or SIDES
        for s in sides:
            if s not in SIDES:
                raise ValueError(f"unknown boundary side {s!r}")
        return np.unique(np.concatenate([self.boundary[s] for s in sides]))

    def on_side(self, points: np.ndarray, side: str) -> np.ndarray:
        """Boolean mask of ``points`` lying on ``side`` of the rectangle."""
        x0, x1, y0, y1 = self.rect
        tol = 1e-12 * np.hypot(x1 - x0, y1 - y0)
        points = np.asarray(points, dtype=float)
        coord, value = {
            "left": (0, x0),
            "right": (0, x1),
            "bottom": (1, y0),
            "top": (1, y1),
        }[side]
        return np.abs(points[:, coord] - value) <= tol


def build_crossed_grid(nx: int, ny: int, rect=(0.0, 1.0, 0.0, 1.0)) -> Mesh:
    """Uniform grid of ``nx`` x ``ny`` squares, each split into four triangles.

    Every square receives an extra node at its centre and is fanned into four
    counter-clockwise triangles (bottom, right, top, left). Grid vertex
    ``(i, j)`` has index ``j * (nx + 1) + i``; the centre of square ``(i, j)``
    has index ``(nx + 1) * (ny + 1) + j * nx + i``.

    Parameters
    ----------
    nx, ny : int
        Number of squares in x and y, both >= 1.
    rect : tuple of float
        ``(x0, x1, y0, y1)`` with ``x0 < x1`` and ``y0 < y1``.

    Returns
    -------
    Mesh
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"nx and ny must be positive integers, got {nx!r}, {ny!r}")
    nx, ny = int(nx), int(ny)
    if len(rect) != 4:
        raise ValueError("rect must be (x0, x1, y0, y1)")
    x0, x1, y0, y1 = (float(v) for v in rect)
    if not (np.isfinite([x0, x1, y0, y1]).all() and x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate rectangle {rect!r}")

    xs = x0 + (x1 - x0) * np.arange(nx + 1) / nx
    ys = y0 + (y1 - y0) * np.arange(ny + 1) / ny
    xs[-1], ys[-1] = x1, y1
    gx, gy = np.meshgrid(xs, ys)
    corners = np.column_stack([gx.ravel(), gy.ravel()])
    cx, cy = np.meshgrid(0.5 * (xs[:-1] + xs[1:]), 0.5 * (ys[:-1] + ys[1:]))
    centres = np.column_stack([cx.ravel(), cy.ravel()])
    nodes = np.vstack([corners, centres])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    sw = j * (nx + 1) + i
    se = sw + 1
    nw = sw + nx + 1
    ne = nw + 1
    m = (nx + 1) * (ny + 1) + j * nx + i
    triangles = np.stack(
        [
            np.column_stack([sw, se, m]),
            np.column_stack([se, ne, m]),
            np.column_stack([ne, nw, m]),
            np.column_stack([nw, sw, m]),
        ],
        axis=1,
    ).reshape(-1, 3)

    jj, ii = np.divmod(np.arange((nx + 1) * (ny + 1)), nx + 1)
    boundary = {
        "left": np.flatnonzero(ii == 0),
        "right": np.flatnonzero(ii == nx),
        "bottom": np.flatnonzero(jj == 0),
        "top": np.flatnonzero(jj == ny),
    }
    return Mesh(nodes, triangles.astype(np.int64), (x0, x1, y0, y1), nx, ny, boundary)


# Symmetric rules on the reference triangle, barycentric points, weights sum to 1.
def _orbit3(a: float) -> list[tuple[float, float, float]]:
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)]


def _orbit6(a: float, b: float) -> list[tuple[float, float, float]]:
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


_RULES = {
    1: ([(1 / 3, 1 / 3, 1 / 3)], [1.0]),
    2: (_orbit3(1 / 6), [1 / 3] * 3),
    # Strang-Fix six point rule, positive weights
    3: (_orbit6(0.659027622374092, 0.231933368553031), [1 / 6] * 6),
    4: (
        _orbit3(0.445948490915965) + _orbit3(0.091576213509771),
        [0.223381589678011] * 3 + [0.109951743655322] * 3,
    ),
}


def quadrature(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature rule on a triangle exact for polynomials up to ``order``.

    Returns
    -------
    points : ndarray of shape (n_points, 3)
        Barycentric coordinates.
    weights : ndarray of shape (n_points,)
        Normalised to sum to one; multiply by the triangle area.
    """
    if order not in _RULES:
        raise ValueError(f"quadrature order must be one of 1..4, got {order!r}")
    pts, w = _RULES[order]
    return np.array(pts, dtype=float), np.array(w, dtype=float)


def locate_node(mesh: Mesh, point) -> int:
    """Index of the mesh node nearest to ``point``; ties go to the lowest index."""
    p = np.asarray(point, dtype=float)
    if p.shape != (2,) or not np.isfinite(p).all():
        raise ValueError(f"point must be a finite 2D coordinate, got {point!r}")
    x0, x1, y0, y1 = mesh.rect
    tol = 1e-12 * np.hypot(x1 - x0, y1 - y0)
    if not (x0 - tol <= p[0] <= x1 + tol and y0 - tol <= p[1] <= y1 + tol):
        raise ValueError(f"point {tuple(p)} lies outside the mesh rectangle")
    d2 = np.sum((mesh.nodes - p) ** 2, axis=1)
    return int(np.argmin(d2))


class FunctionSpace:
    """Lagrange space on a :class:`Mesh`.

    ``kind`` is one of ``"P1"``, ``"P1-vector2"``, ``"P2-vector2"`` or
    ``"taylor-hood"``. Vector dofs are interleaved (``2 * node + component``).
    P2 nodes are the mesh nodes followed by one node per edge, numbered by the
    sorted node-index pair of the edge. The Taylor-Hood layout is
    ``[velocity (P2-vector2), pressure (P1), mean-pressure multiplier]``.
    """

    KINDS = ("P1", "P1-vector2", "P2-vector2", "taylor-hood")

    def __init__(self, mesh: Mesh, kind: str = "P1"):
        if kind not in self.KINDS:
            raise ValueError(f"unknown function space kind {kind!r}")
        self.mesh = mesh
        self.kind = kind

    @cached_property
    def p2_node_count(self) -> int:
        return self.mesh.n_nodes + len(self.mesh.edges)

    @cached_property
    def p2_cells(self) -> np.ndarray:
        """P2 node indices per triangle: 3 vertices then edge midpoints (01, 12, 20)."""
        return np.hstack([self.mesh.triangles, self.mesh.n_nodes + self.mesh.triangle_edges])

    @cached_property
    def p2_coordinates(self) -> np.ndarray:
        e = self.mesh.edges
        mid = 0.5 * (self.mesh.nodes[e[:, 0]] + self.mesh.nodes[e[:, 1]])
        return np.vstack([self.mesh.nodes, mid])

    @property
    def n_velocity(self) -> int:
        return 2 * self.p2_node_count

    @property
    def dof_count(self) -> int:
        n, t = self.mesh.n_nodes, self.kind
        if t == "P1":
            return n
        if t == "P1-vector2":
            return 2 * n
        if t == "P2-vector2":
            return 2 * self.p2_node_count
        return 2 * self.p2_node_count + n + 1

    @cached_property
    def dof_map(self) -> np.ndarray:
        """Local-to-global dof indices per triangle."""
        tri = self.mesh.triangles
        if self.kind == "P1":
            return tri.copy()
        if self.kind == "P1-vector2":
            return _interleave(tri)
        vel = _interleave(self.p2_cells)
        if self.kind == "P2-vector2":
            return vel
        return np.hstack([vel, self.n_velocity + tri])


def _interleave(cells: np.ndarray) -> np.ndarray:
    out = np.empty((cells.shape[0], 2 * cells.shape[1]), dtype=np.int64)
    out[:, 0::2] = 2 * cells
    out[:, 1::2] = 2 * cells + 1
    return out


def locate_triangle(mesh: Mesh, point) -> tuple[int, np.ndarray]:
    """Triangle containing ``point`` and the barycentric coordinates there.

    Points on shared edges go to the lowest triangle index.
    """
    p = np.asarray(point, dtype=float)
    if p.shape != (2,) or not np.isfinite(p).all():
        raise ValueError(f"point must be a finite 2D coordinate, got {point!r}")
    G = mesh.barycentric_gradients
    v0 = mesh.nodes[mesh.triangles[:, 0]]
    lam = np.empty((mesh.n_triangles, 3))
    lam[:, 1:] = np.einsum("tkj,tj->tk", G[:, 1:], p - v0)
    lam[:, 0] = 1.0 - lam[:, 1] - lam[:, 2]
    worst = lam.min(axis=1)
    t = int(np.argmax(worst >= -1e-12)) if np.any(worst >= -1e-12) else -1
    if t < 0:
        raise ValueError(f"point {tuple(p)} lies outside the mesh")
    return t, lam[t]


def evaluate_p1(mesh: Mesh, values, point) -> float:
    """Value of the P1 interpolant of nodal ``values`` at ``point``."""
    t, lam = locate_triangle(mesh, point)
    return float(np.asarray(values, dtype=float)[mesh.triangles[t]] @ lam)
