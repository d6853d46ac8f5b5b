import numpy as np
import pytest
import scipy.sparse as sp

from topoqn.fem import (NavierStokesAssembler, NewtonConvergenceError, NewtonSettings, SolverError,
                        apply_dirichlet, assemble_elasticity, assemble_navier_stokes,
                        assemble_scalar_diffusion_reaction, cubic_jacobian, cubic_residual,
                        mass_matrix, newton_solve, plane_stress_lame, solve_sparse,
                        stiffness_matrix)
from topoqn.mesh import build_crossed_grid, quadrature

PI = np.pi


def centroids(m):
    return m.nodes[m.triangles].mean(axis=1)


def l2_error_p1(m, uh, exact):
    pts, w = quadrature(4)
    xq = np.einsum("qk,tkj->tqj", pts, m.nodes[m.triangles])
    uq = uh[m.triangles] @ pts.T
    err = (uq - exact(xq[..., 0], xq[..., 1])) ** 2
    return np.sqrt(np.sum(err * w[None, :] * m.triangle_areas[:, None]))


def solve_poisson(m, alpha, f, g=0.0, dofs=None):
    A, b = assemble_scalar_diffusion_reaction(m, alpha, f)
    dofs = m.boundary_nodes() if dofs is None else dofs
    A, b = apply_dirichlet(A, b, dofs, g)
    return solve_sparse(A, b)


# -- scalar -----------------------------------------------------------------
def test_zero_coefficients_give_laplacian():
    m = build_crossed_grid(6, 6)
    A, b = assemble_scalar_diffusion_reaction(m, 0.0, 0.0)
    assert np.all(b == 0)
    assert abs(A - stiffness_matrix(m)).max() < 1e-14
    interior = np.setdiff1d(np.arange(m.n_nodes), m.boundary_nodes())
    assert np.abs(A @ np.ones(m.n_nodes))[interior].max() < 1e-12
    assert np.abs(stiffness_matrix(m) @ np.ones(m.n_nodes)).max() < 1e-10


def test_self_convergence_max_value():
    coarse = build_crossed_grid(32, 32)
    fine = build_crossed_grid(64, 64)
    uc = solve_poisson(coarse, 1.0, 1.0)
    uf = solve_poisson(fine, 1.0, 1.0)
    assert abs(uc.max() - uf.max()) <= 0.01 * uf.max()


def test_manufactured_order_two():
    exact = lambda x, y: np.sin(PI * x) * np.sin(PI * y)  # noqa: E731
    errs = []
    for n in (16, 32, 64):
        m = build_crossed_grid(n, n)
        c = centroids(m)
        f = (2 * PI**2 + 1) * exact(c[:, 0], c[:, 1])
        errs.append(l2_error_p1(m, solve_poisson(m, 1.0, f), exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) <= 0.2), orders


def test_mass_matrix_integrates():
    m = build_crossed_grid(8, 8, (-2, 2, -2, 2))
    one = np.ones(m.n_nodes)
    assert abs(one @ mass_matrix(m) @ one - 16.0) < 1e-12
    x = m.nodes[:, 0]
    # P1 mass matrix is exact for products of P1 functions
    assert abs(x @ mass_matrix(m) @ one) < 1e-12
    assert abs(x @ mass_matrix(m) @ x - 4 * 16 / 3) < 1e-12


def test_assembly_rejects_bad_input():
    m = build_crossed_grid(2, 2)
    with pytest.raises(ValueError):
        assemble_scalar_diffusion_reaction(m, np.ones(3), 1.0)
    with pytest.raises(ValueError):
        assemble_scalar_diffusion_reaction(m, -1.0, 1.0)


# -- Dirichlet and linear solvers ----------------------------------------------
def test_dirichlet_examples():
    A = sp.identity(5, format="csr")
    A2, b2 = apply_dirichlet(A, np.zeros(5), [2], 5.0)
    assert np.allclose(solve_sparse(A2, b2), [0, 0, 5, 0, 0])
    m = build_crossed_grid(6, 6)
    A, b = assemble_scalar_diffusion_reaction(m, 1.0, 1.0)
    A, b = apply_dirichlet(A, b, np.arange(m.n_nodes), 0.0)
    assert np.all(solve_sparse(A, b) == 0.0)
    u = solve_poisson(m, 0.0, 0.0, g=1.0)
    assert np.abs(u - 1.0).max() < 1e-12


def test_dirichlet_keeps_symmetry():
    m = build_crossed_grid(5, 5)
    A, b = assemble_scalar_diffusion_reaction(m, 2.0, 1.0)
    A2, _ = apply_dirichlet(A, b, m.boundary_nodes(), 0.3)
    assert abs(A2 - A2.T).max() < 1e-14
    with pytest.raises(IndexError):
        apply_dirichlet(A, b, [m.n_nodes], 0.0)


@pytest.mark.parametrize("method", ["direct", "symmetric", "cg"])
def test_solve_sparse_examples(method, rng):
    b = rng.standard_normal(7)
    assert np.allclose(solve_sparse(sp.identity(7), b, method=method), b)
    x = solve_sparse(sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]]), np.array([3.0, 3.0]), method=method)
    assert np.allclose(x, [1, 1], atol=1e-10)
    Q = rng.standard_normal((200, 200))
    S = Q @ Q.T + 200 * np.eye(200)
    rhs = rng.standard_normal(200)
    x = solve_sparse(sp.csr_matrix(S), rhs, method=method)
    ref = np.linalg.solve(S, rhs)
    assert np.linalg.norm(x - ref) <= 1e-9 * np.linalg.norm(ref)
    assert np.linalg.norm(S @ x - rhs) <= 1e-10 * (1 + np.linalg.norm(rhs))


def test_solve_sparse_singular():
    with pytest.raises(SolverError):
        solve_sparse(sp.csr_matrix(np.zeros((3, 3))), np.ones(3))
    with pytest.raises(ValueError):
        solve_sparse(sp.identity(2), np.ones(2), method="qr")


# -- Newton -------------------------------------------------------------------
def test_newton_linear_one_step(rng):
    A = sp.csr_matrix(np.diag([1.0, 2.0, 3.0]) + 0.1)
    b = rng.standard_normal(3)
    res = newton_solve(lambda x: A @ x - b, lambda x: A, np.zeros(3))
    assert res.iterations == 1
    assert np.allclose(A @ res.x, b)


def test_newton_scalar_surrogate():
    res = newton_solve(lambda x: x**3 + x - 2, lambda x: sp.csr_matrix([[3 * x[0] ** 2 + 1]]),
                       np.array([1.5]), NewtonSettings(abs_tol=1e-14, rel_tol=1e-14))
    assert abs(res.x[0] - 1.0) < 1e-12
    r = np.array(res.residual_norms)
    r = r[r > 1e-13]
    assert np.all(r[2:] / r[1:-1] ** 2 < 10.0)


def test_newton_nonconvergence():
    with pytest.raises(NewtonConvergenceError) as info:
        newton_solve(lambda x: x**2 + 1, lambda x: sp.csr_matrix([[2 * x[0] + 1e-3]]),
                     np.array([0.3]), NewtonSettings(max_iter=5))
    assert info.value.residual_norm > 0


def test_semilinear_quadratic_convergence():
    m = build_crossed_grid(16, 16, (-2, 2, -2, 2))
    K = stiffness_matrix(m)
    a = np.where(centroids(m)[:, 0] < 0, 10.0, 1.0)
    f = np.where(centroids(m)[:, 0] < 0, 10.0, 1.0)
    bnd = m.boundary_nodes()
    res = newton_solve(lambda u: cubic_residual(m, u, a, f, K), lambda u: cubic_jacobian(m, u, a, K),
                       np.zeros(m.n_nodes), NewtonSettings(abs_tol=1e-13, rel_tol=1e-14),
                       fixed_dofs=bnd)
    r = np.array(res.residual_norms)
    tail = [(r[i + 1] / r[i] ** 2) for i in range(len(r) - 1) if r[i + 1] > 1e-11]
    assert tail and max(tail[-2:]) < 10.0


def test_cubic_jacobian_matches_fd(rng):
    m = build_crossed_grid(4, 4)
    a = rng.uniform(1, 3, m.n_triangles)
    f = rng.uniform(-1, 1, m.n_triangles)
    u = rng.standard_normal(m.n_nodes)
    J = cubic_jacobian(m, u, a).toarray()
    h = 1e-6
    for j in range(0, m.n_nodes, 5):
        e = np.zeros(m.n_nodes)
        e[j] = h
        col = (cubic_residual(m, u + e, a, f) - cubic_residual(m, u - e, a, f)) / (2 * h)
        assert np.linalg.norm(col - J[:, j]) <= 1e-5 * max(np.linalg.norm(J[:, j]), 1e-12)


# -- elasticity -----------------------------------------------------------------
def test_plane_stress_lame():
    mu, lam = plane_stress_lame(1.0, 0.3)
    assert abs(mu - 1 / 2.6) < 1e-15
    lam_star = 0.3 / (1.3 * 0.4)
    assert abs(lam - 2 * mu * lam_star / (lam_star + 2 * mu)) < 1e-15
    assert abs(lam - 0.3 / (1 - 0.09)) < 1e-14  # E nu / (1 - nu^2)
    with pytest.raises(ValueError):
        plane_stress_lame(1.0, 0.5)
    with pytest.raises(ValueError):
        assemble_elasticity(build_crossed_grid(1, 1), 1.0, (-1.0, 0.0))


def test_rigid_body_nullspace():
    m = build_crossed_grid(5, 4, (0, 2, 0, 1))
    K = assemble_elasticity(m, 1.0, plane_stress_lame(1.0, 0.3))
    x, y = m.nodes[:, 0], m.nodes[:, 1]
    for u in (np.column_stack([np.ones_like(x), 0 * x]), np.column_stack([0 * x, np.ones_like(x)]),
              np.column_stack([-y, x])):
        assert np.abs(K @ u.ravel()).max() < 1e-10
    assert abs(K - K.T).max() < 1e-14
    assert np.linalg.eigvalsh(K.toarray()).min() > -1e-10


def test_patch_test():
    m = build_crossed_grid(5, 3, (0, 2, 0, 1))
    K = assemble_elasticity(m, 1.0, plane_stress_lame(1.0, 0.3))
    x, y = m.nodes[:, 0], m.nodes[:, 1]
    exact = np.column_stack([0.01 * x + 0.002 * y, -0.003 * x - 0.004 * y]).ravel()
    bnd = m.boundary_nodes()
    dofs = np.sort(np.concatenate([2 * bnd, 2 * bnd + 1]))
    A, b = apply_dirichlet(K, np.zeros(K.shape[0]), dofs, exact[dofs])
    u = solve_sparse(A, b)
    assert np.abs(u - exact).max() <= 1e-10


def test_elasticity_manufactured_order_two():
    lame = plane_stress_lame(1.0, 0.3)
    mu, lam = lame
    ux = lambda x, y: np.sin(PI * x) * np.sin(PI * y)  # noqa: E731

    # u = (s, s) with s = sin(pi x) sin(pi y); f = -div sigma(u)
    def force(x, y):
        sxx = -PI**2 * np.sin(PI * x) * np.sin(PI * y)
        sxy = PI**2 * np.cos(PI * x) * np.cos(PI * y)
        fx = -((2 * mu + lam) * sxx + (lam + mu) * sxy + mu * sxx)
        fy = -((2 * mu + lam) * sxx + (lam + mu) * sxy + mu * sxx)
        return fx, fy

    errs = []
    for n in (8, 16, 32):
        m = build_crossed_grid(n, n)
        K = assemble_elasticity(m, 1.0, lame)
        M = mass_matrix(m)
        fx, fy = force(m.nodes[:, 0], m.nodes[:, 1])
        F = np.column_stack([M @ fx, M @ fy]).ravel()
        bnd = m.boundary_nodes()
        dofs = np.sort(np.concatenate([2 * bnd, 2 * bnd + 1]))
        A, b = apply_dirichlet(K, F, dofs, 0.0)
        u = solve_sparse(A, b).reshape(-1, 2)
        errs.append(np.hypot(l2_error_p1(m, u[:, 0], ux), l2_error_p1(m, u[:, 1], ux)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) <= 0.2), orders


# -- Navier-Stokes ----------------------------------------------------------------
def test_ns_zero_residual():
    m = build_crossed_grid(3, 3)
    ns = NavierStokesAssembler(m, 1.0, 1.0)
    R, J = assemble_navier_stokes(m, 0.0, 1.0, 1.0, np.zeros(ns.n))
    assert np.all(R == 0.0)
    assert J.shape == (ns.n, ns.n)
    with pytest.raises(ValueError):
        ns.residual(np.zeros(ns.n + 1), 0.0)
    with pytest.raises(ValueError):
        NavierStokesAssembler(m, 0.0, 1.0)


def test_ns_jacobian_fd(rng):
    m = build_crossed_grid(3, 3)
    ns = NavierStokesAssembler(m, 0.1, 1.0)
    alpha = rng.uniform(0.5, 2.0, m.n_triangles)
    U = rng.standard_normal(ns.n)
    J = ns.jacobian(U, alpha).toarray()
    h = 1e-6
    for j in range(ns.n):
        e = np.zeros(ns.n)
        e[j] = h
        col = (ns.residual(U + e, alpha) - ns.residual(U - e, alpha)) / (2 * h)
        assert np.linalg.norm(col - J[:, j]) <= 1e-5 * max(np.linalg.norm(J[:, j]), 1.0)


def _lid(x, y):
    # non-leaky lid: the top corners stay at rest
    on_lid = (np.abs(y - 1.0) < 1e-12) & (x > 1e-12) & (x < 1.0 - 1e-12)
    return np.where(on_lid, 1.0, 0.0), np.zeros_like(x)


def _center_velocity(n):
    m = build_crossed_grid(n, n)
    ns = NavierStokesAssembler(m, 1.0, 0.0)
    U = ns.solve(0.0, _lid).x
    k = int(np.argmin(np.sum((ns.space.p2_coordinates - 0.5) ** 2, axis=1)))
    return U[2 * k], U


def test_stokes_cavity_self_convergence():
    c16, U = _center_velocity(16)
    c32, _ = _center_velocity(32)
    assert abs(c16 - c32) <= 0.02 * abs(c32)
    m = build_crossed_grid(16, 16)
    ns = NavierStokesAssembler(m, 1.0, 0.0)
    # mean-zero pressure
    assert abs(ns._pmean @ ns.pressure(U)[m.triangles].sum(axis=1)) < 1e-10


def _stokes_exact(x, y):
    u1 = PI * np.sin(PI * x) ** 2 * np.sin(2 * PI * y)
    u2 = -PI * np.sin(2 * PI * x) * np.sin(PI * y) ** 2
    return u1, u2


def _stokes_force(x, y):
    u1, u2 = _stokes_exact(x, y)
    lap1 = PI * np.sin(2 * PI * y) * (2 * PI**2 * np.cos(2 * PI * x) - 4 * PI**2 * np.sin(PI * x) ** 2)
    lap2 = -PI * np.sin(2 * PI * x) * (2 * PI**2 * np.cos(2 * PI * y) - 4 * PI**2 * np.sin(PI * y) ** 2)
    px = -PI * np.sin(PI * x) * np.cos(PI * y)
    py = -PI * np.cos(PI * x) * np.sin(PI * y)
    return -lap1 + px + u1, -lap2 + py + u2


def test_taylor_hood_velocity_convergence():
    errs = []
    for n in (4, 8, 16):
        m = build_crossed_grid(n, n)
        ns = NavierStokesAssembler(m, 1.0, 0.0)
        U = ns.solve(1.0, lambda x, y: (0 * x, 0 * x), forcing=_stokes_force).x
        _, uq, _, _ = ns._fields(U)
        xq = ns.quadrature_points()
        e1, e2 = _stokes_exact(xq[..., 0], xq[..., 1])
        err = (uq[..., 0] - e1) ** 2 + (uq[..., 1] - e2) ** 2
        errs.append(np.sqrt(np.sum(err * ns._W)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.diff(errs) < 0)
    assert abs(orders[-1] - 3.0) <= 0.3, orders


def test_ns_newton_converges_with_convection():
    m = build_crossed_grid(8, 8)
    ns = NavierStokesAssembler(m, 0.05, 1.0)
    res = ns.solve(1.0, _lid)
    R = ns.residual(res.x, 1.0)
    free = np.ones(ns.n, dtype=bool)
    free[ns.velocity_boundary_dofs()] = False
    assert np.linalg.norm(R[free]) < 1e-9
    assert res.iterations <= 8


def test_solve_linear_transpose(rng):
    m = build_crossed_grid(4, 4)
    ns = NavierStokesAssembler(m, 0.1, 1.0)
    U = ns.solve(1.0, _lid).x
    J = ns.jacobian(U, 1.0)
    fixed = ns.velocity_boundary_dofs()
    rhs = rng.standard_normal(ns.n)
    rhs[fixed] = 0.0
    for transpose in (False, True):
        x = ns.solve_linear(J, rhs, fixed, transpose=transpose)
        A = (J.T if transpose else J).toarray()
        free = np.setdiff1d(np.arange(ns.n), fixed)
        assert np.all(x[fixed] == 0.0)
        assert np.linalg.norm(A[np.ix_(free, free)] @ x[free] - rhs[free]) < 1e-8 * (1 + np.linalg.norm(rhs))
