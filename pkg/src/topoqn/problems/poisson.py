"""Inverse problems for linear and semilinear diffusion-reaction equations.

State ``-lap(u) + alpha u = f`` (or ``alpha u^3``) with ``u = 0`` on the
boundary, cost ``1/2 |u - u_des|^2`` in L2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..fem.linalg import NewtonSettings, apply_dirichlet, newton_solve, solve_sparse
from ..fem.scalar import cubic_jacobian, cubic_residual, load_vector, mass_matrix, stiffness_matrix
from ..mesh import Mesh, quadrature
from .base import Evaluation, ProblemOracle, interpolate_material

__all__ = ["PoissonConfig", "PoissonProblem"]


@dataclass(frozen=True)
class PoissonConfig:
    """Material data of the inverse problems.

    Parameters
    ----------
    alpha_in, alpha_out : float
        Reaction coefficient inside and outside the design, both positive.
    f_in, f_out : float
        Source values.
    nonlinearity : {"linear", "cubic"}
    newton : NewtonSettings
        Used by the cubic state equation.
    """

    alpha_in: float = 10.0
    alpha_out: float = 1.0
    f_in: float = 10.0
    f_out: float = 1.0
    nonlinearity: str = "linear"
    newton: NewtonSettings = field(default_factory=NewtonSettings)

    def __post_init__(self):
        if not (self.alpha_in > 0 and self.alpha_out > 0):
            raise ValueError("alpha_in and alpha_out must be positive")
        if self.nonlinearity not in ("linear", "cubic"):
            raise ValueError(f"nonlinearity must be 'linear' or 'cubic', got {self.nonlinearity!r}")


class PoissonProblem(ProblemOracle):
    """Fit the state to a measurement ``u_des`` given on the whole domain.

    Parameters
    ----------
    mesh : Mesh
    config : PoissonConfig
    u_des : ndarray of shape (n_nodes,)
    """

    def __init__(self, mesh: Mesh, config: PoissonConfig, u_des):
        super().__init__(mesh)
        self.config = config
        self.name = f"poisson_{config.nonlinearity}"
        u_des = np.asarray(u_des, dtype=float)
        if u_des.shape != (mesh.n_nodes,):
            raise ValueError("u_des must be a nodal field on the mesh")
        self.u_des = u_des
        self._K = stiffness_matrix(mesh)
        self._M = mass_matrix(mesh)
        self._bnd = mesh.boundary_nodes()
        self._warm = None

    @classmethod
    def from_reference(cls, mesh: Mesh, psi_des, config: PoissonConfig | None = None):
        """Problem whose measurement is the state of the design ``{psi_des < 0}``."""
        config = config or PoissonConfig()
        prob = cls(mesh, config, np.zeros(mesh.n_nodes))
        prob.u_des = prob.solve_state_for(psi_des)
        prob.state_solves = 0
        prob.clear_cache()
        prob._warm = None
        return prob

    def solve_state_for(self, psi) -> np.ndarray:
        return self.state(psi)["u"].copy()

    # -- pieces -------------------------------------------------------------
    def _coefficients(self, fractions):
        c = self.config
        return (interpolate_material(fractions, c.alpha_in, c.alpha_out),
                interpolate_material(fractions, c.f_in, c.f_out))

    def _solve_state(self, fractions):
        alpha, f = self._coefficients(fractions)
        if self.config.nonlinearity == "linear":
            A = self._K + mass_matrix(self.mesh, alpha)
            A, b = apply_dirichlet(A, load_vector(self.mesh, f), self._bnd)
            u = solve_sparse(A, b)
            info = {}
        else:
            u0 = np.zeros(self.mesh.n_nodes) if self._warm is None else self._warm.copy()
            u0[self._bnd] = 0.0
            res = newton_solve(
                lambda u: cubic_residual(self.mesh, u, alpha, f, self._K),
                lambda u: cubic_jacobian(self.mesh, u, alpha, self._K),
                u0, self.config.newton, fixed_dofs=self._bnd,
            )
            u = res.x
            self._warm = u.copy()
            info = {"newton_iterations": res.iterations}
        r = u - self.u_des
        cost = 0.5 * float(r @ (self._M @ r))
        return cost, {"u": u, "alpha": alpha, **info}

    def _solve_adjoint(self, fractions, state):
        u, alpha = state["u"], state["alpha"]
        if self.config.nonlinearity == "linear":
            A = self._K + mass_matrix(self.mesh, alpha)
        else:
            A = cubic_jacobian(self.mesh, u, alpha, self._K)
        # the operator is symmetric, so no transpose is needed
        A, b = apply_dirichlet(A, -(self._M @ (u - self.u_des)), self._bnd)
        return {"p": solve_sparse(A, b)}

    def _nodal_derivative(self, psi, ev: Evaluation):
        c = self.config
        u, p = ev.state["u"], ev.adjoint["p"]
        un = u if c.nonlinearity == "linear" else u**3
        return (c.alpha_in - c.alpha_out) * un * p - (c.f_in - c.f_out) * p

    def _fraction_gradient(self, ev: Evaluation):
        c = self.config
        m = self.mesh
        u = ev.state["u"][m.triangles]
        p = ev.adjoint["p"][m.triangles]
        pts, w = quadrature(4)
        uq, pq = u @ pts.T, p @ pts.T
        power = 1 if c.nonlinearity == "linear" else 3
        reaction = (uq**power * pq) @ w * m.triangle_areas
        source = p.sum(axis=1) * m.triangle_areas / 3.0
        return (c.alpha_in - c.alpha_out) * reaction - (c.f_in - c.f_out) * source

    def fields(self, psi) -> dict:
        out = super().fields(psi)
        out.update(u=self.state(psi)["u"], p=self.adjoint(psi)["p"], u_des=self.u_des)
        return out
