"""Stationary Navier-Stokes-Brinkman flow with Taylor-Hood (P2/P1) elements.

Unknown vector layout follows :class:`~topoqn.mesh.FunctionSpace` of kind
``"taylor-hood"``: interleaved P2 velocity, P1 pressure, then one Lagrange
multiplier enforcing a zero pressure mean.
"""

from __future__ import annotations

import numpy as np

from ..mesh import FunctionSpace, Mesh, quadrature
import scipy.sparse as sp

from .linalg import NewtonSettings, SolverError, SparsityPattern, newton_solve, scatter_vector, solve_sparse

__all__ = ["NavierStokesAssembler", "assemble_navier_stokes", "p2_basis"]


def p2_basis(bary: np.ndarray):
    """P2 shape functions and their barycentric derivatives at points ``bary`` (Q, 3).

    Local node order: vertices 0, 1, 2, then midpoints of edges 01, 12, 20.
    Returns values (Q, 6) and derivatives (Q, 6, 3).
    """
    l0, l1, l2 = bary.T
    vals = np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])
    q = bary.shape[0]
    d = np.zeros((q, 6, 3))
    d[:, 0, 0] = 4 * l0 - 1
    d[:, 1, 1] = 4 * l1 - 1
    d[:, 2, 2] = 4 * l2 - 1
    d[:, 3, 0], d[:, 3, 1] = 4 * l1, 4 * l0
    d[:, 4, 1], d[:, 4, 2] = 4 * l2, 4 * l1
    d[:, 5, 2], d[:, 5, 0] = 4 * l0, 4 * l2
    return vals, d


class NavierStokesAssembler:
    """Residual, Jacobian and dissipation of the Brinkman-penalised flow problem.

    Weak form, for test functions ``(w, q, s)``::

        int mu grad(u):grad(w) + rho (u.grad)u . w + alpha u.w - p div(w) - f.w
        - int q div(u) + r int q
        s int p

    ``alpha`` is piecewise constant (one value per triangle).
    """

    def __init__(self, mesh: Mesh, mu: float, rho: float, order: int = 4):
        if not mu > 0:
            raise ValueError("viscosity must be positive")
        if rho < 0:
            raise ValueError("density must be non-negative")
        self.mesh = mesh
        self.mu = float(mu)
        self.rho = float(rho)
        self.space = FunctionSpace(mesh, "taylor-hood")
        self.n = self.space.dof_count
        self.nu_dofs = self.space.n_velocity
        self.np_dofs = mesh.n_nodes

        pts, w = quadrature(order)
        self._bary = pts
        self._N, dref = p2_basis(pts)
        G = mesh.barycentric_gradients
        self._dN = np.einsum("qak,tkj->tqaj", dref, G)  # (T, Q, 6, 2)
        self._W = mesh.triangle_areas[:, None] * w[None, :]  # (T, Q)
        self._P = pts  # P1 pressure basis values (Q, 3)

        self._lap = np.einsum("tq,tqaj,tqbj->tab", self._W, self._dN, self._dN)
        self._mass = np.einsum("tq,qa,qb->tab", self._W, self._N, self._N)
        self._div = -np.einsum("tq,qc,tqbk->tcbk", self._W, self._P, self._dN).reshape(-1, 3, 12)
        self._pmean = mesh.triangle_areas / 3.0

        self.dof_map = self.space.dof_map  # (T, 15)
        last = self.n - 1
        pdofs = self.dof_map[:, 12:].ravel()
        self._pattern = SparsityPattern.from_dof_map(
            self.dof_map, (self.n, self.n),
            extra_rows=np.concatenate([pdofs, np.full(pdofs.size, last)]),
            extra_cols=np.concatenate([np.full(pdofs.size, last), pdofs]),
        )
        self._vel_pattern = SparsityPattern.from_dof_map(
            self.dof_map[:, :12], (self.nu_dofs, self.nu_dofs))

    # -- helpers -----------------------------------------------------------
    def _alpha(self, alpha) -> np.ndarray:
        a = np.asarray(alpha, dtype=float)
        if a.ndim == 0:
            a = np.full(self.mesh.n_triangles, float(a))
        if a.shape != (self.mesh.n_triangles,):
            raise ValueError("alpha must have one value per triangle")
        return a

    def _check(self, U):
        U = np.asarray(U, dtype=float)
        if U.shape != (self.n,):
            raise ValueError(f"iterate must have {self.n} entries, got {U.shape}")
        return U

    def _fields(self, U):
        ue = U[self.dof_map[:, :12]].reshape(-1, 6, 2)
        uq = np.einsum("qa,tai->tqi", self._N, ue)
        Gq = np.einsum("tai,tqaj->tqij", ue, self._dN)
        pq = U[self.dof_map[:, 12:]] @ self._P.T
        return ue, uq, Gq, pq

    def quadrature_points(self) -> np.ndarray:
        """Physical coordinates of the quadrature points, shape (T, Q, 2)."""
        p = self.mesh.nodes[self.mesh.triangles]
        return np.einsum("qk,tkj->tqj", self._bary, p)

    def velocity_boundary_dofs(self) -> np.ndarray:
        coords = self.space.p2_coordinates
        on = np.zeros(coords.shape[0], dtype=bool)
        for side in ("left", "right", "bottom", "top"):
            on |= self.mesh.on_side(coords, side)
        nodes = np.flatnonzero(on)
        return np.sort(np.concatenate([2 * nodes, 2 * nodes + 1]))

    def lift(self, velocity_fn) -> np.ndarray:
        """Vector with ``velocity_fn(x, y) -> (ux, uy)`` at boundary velocity dofs, zero elsewhere."""
        U = np.zeros(self.n)
        dofs = self.velocity_boundary_dofs()
        nodes = dofs[0::2] // 2
        xy = self.space.p2_coordinates[nodes]
        ux, uy = velocity_fn(xy[:, 0], xy[:, 1])
        U[2 * nodes] = np.broadcast_to(ux, nodes.shape)
        U[2 * nodes + 1] = np.broadcast_to(uy, nodes.shape)
        return U

    # -- forms --------------------------------------------------------------
    def residual(self, U, alpha, forcing=None) -> np.ndarray:
        U = self._check(U)
        a = self._alpha(alpha)
        ue, uq, Gq, pq = self._fields(U)
        conv = self.rho * np.einsum("tqij,tqj->tqi", Gq, uq)
        if forcing is not None:
            xq = self.quadrature_points()
            fx, fy = forcing(xq[..., 0], xq[..., 1])
            conv = conv - np.stack(np.broadcast_arrays(fx, fy), axis=-1)
        Ru = self.mu * np.einsum("tqij,tqaj,tq->tai", Gq, self._dN, self._W)
        Ru += np.einsum("tq,tqi,qa->tai", self._W, conv, self._N)
        Ru += a[:, None, None] * np.einsum("tab,tbi->tai", self._mass, ue)
        Ru -= np.einsum("tq,tq,tqai->tai", self._W, pq, self._dN)
        Rp = np.einsum("tcm,tm->tc", self._div, ue.reshape(-1, 12)) + U[-1] * self._pmean[:, None]
        local = np.concatenate([Ru.reshape(-1, 12), Rp], axis=1)
        R = scatter_vector(self.dof_map, local, self.n)
        R[-1] = np.sum(self._pmean[:, None] * U[self.dof_map[:, 12:]])
        return R

    def jacobian(self, U, alpha):
        U = self._check(U)
        a = self._alpha(alpha)
        ue, uq, Gq, _ = self._fields(U)
        T = self.mesh.n_triangles
        A = np.zeros((T, 6, 2, 6, 2))
        diag = self.mu * self._lap + a[:, None, None] * self._mass
        if self.rho:
            adv = np.einsum("tq,qa,tqj,tqbj->tab", self._W, self._N, uq, self._dN)
            diag = diag + self.rho * adv
            A += self.rho * np.einsum("tq,qa,qb,tqik->taibk", self._W, self._N, self._N, Gq)
        A[:, :, 0, :, 0] += diag
        A[:, :, 1, :, 1] += diag
        local = np.zeros((T, 15, 15))
        local[:, :12, :12] = A.reshape(T, 12, 12)
        local[:, 12:, :12] = self._div
        local[:, :12, 12:] = self._div.transpose(0, 2, 1)
        extra = np.repeat(self._pmean, 3)
        return self._pattern.assemble(np.concatenate([local.ravel(), extra, extra]))

    def assemble(self, U, alpha, forcing=None):
        return self.residual(U, alpha, forcing), self.jacobian(U, alpha)

    def dissipation_matrix(self, alpha):
        """Velocity block of ``int mu grad(u):grad(w) + alpha u.w`` (size n_velocity)."""
        a = self._alpha(alpha)
        diag = self.mu * self._lap + a[:, None, None] * self._mass
        A = np.zeros((self.mesh.n_triangles, 6, 2, 6, 2))
        A[:, :, 0, :, 0] = diag
        A[:, :, 1, :, 1] = diag
        return self._vel_pattern.assemble(A)

    def dissipation(self, U, alpha) -> float:
        """``int mu grad(u):grad(u) + alpha u.u``."""
        u = np.asarray(U, dtype=float)[: self.nu_dofs]
        return float(u @ (self.dissipation_matrix(alpha) @ u))

    def velocity_at_vertices(self, U) -> np.ndarray:
        """Velocity at the mesh vertices, shape (n_nodes, 2)."""
        return np.asarray(U)[: 2 * self.mesh.n_nodes].reshape(-1, 2)

    def pressure(self, U) -> np.ndarray:
        return np.asarray(U)[self.nu_dofs: self.nu_dofs + self.np_dofs]

    def solve_linear(self, J, rhs, fixed=None, transpose=False, rtol=1e-10) -> np.ndarray:
        """Solve ``J x = rhs`` (or ``J^T x = rhs``) with ``x = 0`` on ``fixed`` velocity dofs.

        ``J`` must have the Taylor-Hood block structure of :meth:`jacobian`.
        The dense multiplier row and column are handled by bordering: the
        pressure constant is pinned at one dof, the multiplier follows from
        the compatibility condition and the pressure is shifted afterwards.
        This keeps the sparse factorization free of a dense row.
        """
        J = sp.csr_matrix(J.T if transpose else J)
        f = np.asarray(rhs, dtype=float)
        last = self.n - 1
        keep = np.ones(self.n, dtype=bool)
        if fixed is not None:
            keep[np.asarray(fixed, dtype=np.int64)] = False
        if np.any(~keep[self.nu_dofs:]):
            raise ValueError("only velocity dofs can be fixed")
        keep[last] = False
        S = np.flatnonzero(keep)
        c = J[S, last].toarray().ravel()
        cr = J[last, S].toarray().ravel()
        e = (S >= self.nu_dofs).astype(float)  # constant pressure
        r = (e @ f[S]) / (e @ c)
        pin = np.ones(S.size, dtype=bool)
        pin[np.searchsorted(S, self.nu_dofs)] = False
        R = S[pin]
        A = J[R][:, R]
        xS = np.zeros(S.size)
        xS[pin] = solve_sparse(A, (f[S] - c * r)[pin], method="symmetric", rtol=rtol)
        xS += (f[last] - cr @ xS) / (cr @ e) * e
        x = np.zeros(self.n)
        x[S] = xS
        x[last] = r
        res = J[S] @ x - f[S]
        bound = 1e2 * rtol * (1.0 + np.linalg.norm(f))
        if not np.linalg.norm(res) <= bound:
            raise SolverError(f"saddle-point solve residual {np.linalg.norm(res):.3e} "
                              f"exceeds bound {bound:.3e}")
        return x

    def solve(self, alpha, velocity_fn=None, initial=None, settings=None, forcing=None):
        """Newton solve with Dirichlet data ``velocity_fn`` on the whole boundary."""
        lifted = self.lift(velocity_fn) if velocity_fn is not None else np.zeros(self.n)
        bdofs = self.velocity_boundary_dofs()
        U0 = lifted.copy() if initial is None else np.array(initial, dtype=float, copy=True)
        U0[bdofs] = lifted[bdofs]
        return newton_solve(
            lambda U: self.residual(U, alpha, forcing),
            lambda U: self.jacobian(U, alpha),
            U0, settings or NewtonSettings(), fixed_dofs=bdofs,
            linear_solver=self.solve_linear,
        )


def assemble_navier_stokes(mesh: Mesh, alpha, mu: float, rho: float, U):
    """Residual vector and Jacobian at iterate ``U`` (see :class:`NavierStokesAssembler`)."""
    return NavierStokesAssembler(mesh, mu, rho).assemble(U, alpha)
