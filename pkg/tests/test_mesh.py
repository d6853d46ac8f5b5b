import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from topoqn.mesh import (FunctionSpace, build_crossed_grid, evaluate_p1, locate_node,
                         locate_triangle, quadrature)


@pytest.mark.parametrize("nx, ny, rect, nodes, tris", [
    (32, 32, (-2, 2, -2, 2), 2113, 4096),
    (64, 32, (0, 2, 0, 1), 4193, 8192),
    (1, 1, (0, 1, 0, 1), 5, 4),
])
def test_counts(nx, ny, rect, nodes, tris):
    m = build_crossed_grid(nx, ny, rect)
    assert (m.n_nodes, m.n_triangles) == (nodes, tris)


@given(st.integers(1, 40), st.integers(1, 40))
def test_count_formula_and_area_partition(nx, ny):
    m = build_crossed_grid(nx, ny, (0.0, 3.0, -1.0, 1.0))
    assert m.n_nodes == (nx + 1) * (ny + 1) + nx * ny
    assert m.n_triangles == 4 * nx * ny
    assert np.all(m.triangle_areas > 0)
    assert abs(m.triangle_areas.sum() - 6.0) <= 1e-12 * 6.0


def test_count_formula_largest():
    m = build_crossed_grid(128, 128)
    assert m.n_nodes == 129 * 129 + 128 * 128


def test_edge_sharing():
    m = build_crossed_grid(5, 3, (0, 5, 0, 3))
    counts = np.bincount(m.triangle_edges.ravel(), minlength=len(m.edges))
    mid = m.nodes[m.edges].mean(axis=1)
    on_bnd = np.zeros(len(m.edges), dtype=bool)
    for side in ("left", "right", "bottom", "top"):
        on_bnd |= m.on_side(mid, side)
    assert np.all(counts[on_bnd] == 1)
    assert np.all(counts[~on_bnd] == 2)


def test_rejects_bad_sizes():
    with pytest.raises(ValueError):
        build_crossed_grid(0, 3)
    with pytest.raises(ValueError):
        build_crossed_grid(2, 2, (1, 0, 0, 1))


def test_quadrature_examples():
    p, w = quadrature(1)
    assert p.shape == (1, 3) and np.allclose(p, 1 / 3) and np.allclose(w, 1.0)
    # reference triangle (0,0),(1,0),(0,1), area 1/2; barycentric (1-x-y, x, y)
    p, w = quadrature(2)
    assert abs(0.5 * np.sum(w * p[:, 1] * p[:, 2]) - 1 / 24) < 1e-15
    p, w = quadrature(4)
    assert abs(0.5 * np.sum(w * p[:, 1] ** 4) - 1 / 30) < 1e-14
    with pytest.raises(ValueError):
        quadrature(5)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_quadrature_exactness(order):
    from math import factorial
    p, w = quadrature(order)
    assert abs(w.sum() - 1.0) < 1e-14
    for i in range(order + 1):
        for j in range(order + 1 - i):
            exact = factorial(i) * factorial(j) / factorial(i + j + 2)
            assert abs(0.5 * np.sum(w * p[:, 1] ** i * p[:, 2] ** j) - exact) < 1e-14


def test_quadrature_x4_over_unit_triangle():
    # int_T x^4 with T = reference triangle is 1/30; over the unit square's
    # triangle normalized by its area 1/2 the average is 1/15
    p, w = quadrature(4)
    assert abs(np.sum(w * p[:, 1] ** 4) - 1 / 15) < 1e-14


def test_locate_node():
    m = build_crossed_grid(64, 32, (0, 2, 0, 1))
    k = locate_node(m, (2.0, 0.5))
    assert np.allclose(m.nodes[k], (2.0, 0.5))
    assert locate_node(m, m.nodes[17]) == 17
    sq = build_crossed_grid(1, 1)
    c = locate_node(sq, (0.5, 0.5))
    assert np.allclose(sq.nodes[c], (0.5, 0.5))
    with pytest.raises(ValueError):
        locate_node(m, (2.5, 0.5))


def test_locate_triangle_and_evaluate():
    m = build_crossed_grid(4, 4, (0, 1, 0, 1))
    f = 2 * m.nodes[:, 0] - 3 * m.nodes[:, 1] + 1
    for pt in [(0.1, 0.2), (0.5, 0.5), (1.0, 1.0), (0.33, 0.9)]:
        t, lam = locate_triangle(m, pt)
        assert np.all(lam >= -1e-12) and abs(lam.sum() - 1) < 1e-12
        assert abs(evaluate_p1(m, f, pt) - (2 * pt[0] - 3 * pt[1] + 1)) < 1e-12
    with pytest.raises(ValueError):
        locate_triangle(m, (1.5, 0.5))


def test_boundary_tags_inclusive_corners():
    m = build_crossed_grid(3, 2, (0, 3, 0, 2))
    corner = locate_node(m, (0, 0))
    assert corner in m.boundary["left"] and corner in m.boundary["bottom"]
    assert len(m.boundary_node_set) == 2 * (3 + 2)


@pytest.mark.parametrize("kind, expected", [
    ("P1", lambda m: m.n_nodes),
    ("P1-vector2", lambda m: 2 * m.n_nodes),
    ("P2-vector2", lambda m: 2 * (m.n_nodes + len(m.edges))),
    ("taylor-hood", lambda m: 2 * (m.n_nodes + len(m.edges)) + m.n_nodes + 1),
])
def test_function_space(kind, expected):
    m = build_crossed_grid(3, 2)
    V = FunctionSpace(m, kind)
    assert V.dof_count == expected(m)
    dm = V.dof_map
    assert dm.shape[0] == m.n_triangles
    assert all(len(set(row)) == len(row) for row in dm)
    assert dm.min() == 0
    used = np.unique(dm)
    # every dof except the multiplier appears in some element
    assert used.size == V.dof_count - (1 if kind == "taylor-hood" else 0)
    with pytest.raises(ValueError):
        FunctionSpace(m, "P3")
