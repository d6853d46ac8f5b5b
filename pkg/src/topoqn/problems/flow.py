"""Dissipation minimization in Navier-Stokes-Brinkman flow with a volume penalty."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..fem.linalg import NewtonSettings
from ..fem.navier_stokes import NavierStokesAssembler
from ..mesh import Mesh
from .base import Evaluation, ProblemOracle, element_to_nodes, interpolate_material

__all__ = ["FlowConfig", "FlowProblem", "pipe_bend_velocity", "rugby_velocity"]


def pipe_bend_velocity(x, y):
    """Parabolic inlet on the left side and outlet on the bottom side, no slip elsewhere."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tol = 1e-12
    ux = np.where((x <= tol) & (np.abs(y - 0.8) <= 0.1 + tol), 1.0 - 100.0 * (y - 0.8) ** 2, 0.0)
    uy = np.where((y <= tol) & (np.abs(x - 0.8) <= 0.1 + tol), -(1.0 - 100.0 * (x - 0.8) ** 2), 0.0)
    return np.maximum(ux, 0.0), np.minimum(uy, 0.0)


def rugby_velocity(x, y):
    """Uniform upward flow ``(0, 1)`` on the whole boundary."""
    x = np.asarray(x, dtype=float)
    return np.zeros_like(x), np.ones_like(x)


@dataclass(frozen=True)
class FlowConfig:
    """Fluid data of the dissipation problem.

    ``alpha_in`` and ``alpha_out`` default to ``2.5 mu / 100^2`` and
    ``2.5 mu / 0.01^2``.
    """

    vol_des: float
    boundary_velocity: Callable = field(default=rugby_velocity, repr=False)
    mu: float = 1e-2
    rho: float = 1.0
    alpha_in: float | None = None
    alpha_out: float | None = None
    l: float = 1e4
    newton: NewtonSettings = field(default_factory=NewtonSettings)

    def __post_init__(self):
        if self.alpha_in is None:
            object.__setattr__(self, "alpha_in", 2.5 * self.mu / 100.0**2)
        if self.alpha_out is None:
            object.__setattr__(self, "alpha_out", 2.5 * self.mu / 0.01**2)
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        if not 0 < self.alpha_in <= self.alpha_out:
            raise ValueError("need 0 < alpha_in <= alpha_out")
        if not self.vol_des > 0:
            raise ValueError("vol_des must be positive")


class FlowProblem(ProblemOracle):
    """Cost ``int mu grad u:grad u + alpha u.u + l/2 (|Omega| - vol_des)^2``; ``Omega`` is the fluid."""

    name = "flow"

    def __init__(self, mesh: Mesh, config: FlowConfig):
        super().__init__(mesh)
        if not config.vol_des < mesh.area:
            raise ValueError("vol_des must be smaller than the domain area")
        self.config = config
        self.ns = NavierStokesAssembler(mesh, config.mu, config.rho)
        self._bdofs = self.ns.velocity_boundary_dofs()
        self._warm = None

    def _solve_state(self, fractions):
        c = self.config
        alpha = interpolate_material(fractions, c.alpha_in, c.alpha_out)
        res = self.ns.solve(alpha, c.boundary_velocity, initial=self._warm, settings=c.newton)
        U = res.x
        self._warm = U.copy()
        volume = float(fractions @ self.mesh.triangle_areas)
        dissipation = self.ns.dissipation(U, alpha)
        cost = dissipation + 0.5 * c.l * (volume - c.vol_des) ** 2
        return cost, {"U": U, "alpha": alpha, "dissipation": dissipation,
                      "newton_iterations": res.iterations}

    def _solve_adjoint(self, fractions, state):
        U, alpha = state["U"], state["alpha"]
        rhs = np.zeros(self.ns.n)
        rhs[: self.ns.nu_dofs] = -2.0 * (self.ns.dissipation_matrix(alpha) @ U[: self.ns.nu_dofs])
        J = self.ns.jacobian(U, alpha)
        return {"V": self.ns.solve_linear(J, rhs, self._bdofs, transpose=True)}

    def _element_products(self, ev: Evaluation):
        """``int_T u.u`` and ``int_T u.v`` per triangle."""
        if "products" not in ev.extras:
            m = self.ns
            ue = ev.state["U"][m.dof_map[:, :12]].reshape(-1, 6, 2)
            ve = ev.adjoint["V"][m.dof_map[:, :12]].reshape(-1, 6, 2)
            uu = np.einsum("tai,tab,tbi->t", ue, m._mass, ue)
            uv = np.einsum("tai,tab,tbi->t", ue, m._mass, ve)
            ev.extras["products"] = (uu, uv)
        return ev.extras["products"]

    def _nodal_derivative(self, psi, ev: Evaluation):
        c = self.config
        uu, uv = self._element_products(ev)
        density = element_to_nodes(self.mesh, (uu + uv) / self.mesh.triangle_areas)
        return (c.alpha_in - c.alpha_out) * density + c.l * (ev.volume - c.vol_des)

    def _fraction_gradient(self, ev: Evaluation):
        c = self.config
        uu, uv = self._element_products(ev)
        return (c.alpha_in - c.alpha_out) * (uu + uv) + c.l * (ev.volume - c.vol_des) * self.mesh.triangle_areas

    def fields(self, psi) -> dict:
        out = super().fields(psi)
        U = self.state(psi)["U"]
        out["velocity"] = self.ns.velocity_at_vertices(U)
        out["pressure"] = self.ns.pressure(U)
        out["adjoint_velocity"] = self.ns.velocity_at_vertices(self.adjoint(psi)["V"])
        return out
