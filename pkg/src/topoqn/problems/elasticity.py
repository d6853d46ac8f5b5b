"""Compliance minimization in plane-stress linear elasticity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..fem.elasticity import assemble_elasticity, energy_densities, plane_stress_lame
from ..fem.linalg import apply_dirichlet, solve_sparse
from ..mesh import Mesh, locate_node
from .base import Evaluation, ProblemOracle, element_to_nodes, interpolate_material

__all__ = ["ElasticityConfig", "ElasticityProblem", "inclusion_factor"]


@dataclass(frozen=True)
class ElasticityConfig:
    """Material, supports and loads.

    Parameters
    ----------
    E, nu : float
        Young's modulus and Poisson ratio (plane stress).
    alpha_in, alpha_out : float
        Stiffness scaling of material and ersatz void.
    l : float
        Weight of the volume penalty ``l |Omega|``.
    clamped_sides : tuple of str
        Sides where both displacement components vanish.
    supports : tuple
        ``((x, y), (fix_x, fix_y))`` pairs fixing components at the nearest node.
    loads : tuple
        ``((x, y), (fx, fy))`` point forces applied at the nearest node.
        All loads act simultaneously.
    """

    E: float = 1.0
    nu: float = 0.3
    alpha_in: float = 1.0
    alpha_out: float = 1e-3
    l: float = 100.0
    clamped_sides: tuple = ()
    supports: tuple = ()
    loads: tuple = ()

    def __post_init__(self):
        plane_stress_lame(self.E, self.nu)  # validates E and nu
        if not (self.alpha_in > 0 and self.alpha_out > 0):
            raise ValueError("alpha_in and alpha_out must be positive")
        if not (self.clamped_sides or self.supports):
            raise ValueError("at least one Dirichlet condition is required")

    @property
    def lame(self) -> tuple[float, float]:
        return plane_stress_lame(self.E, self.nu)


def inclusion_factor(r: float, kappa: float):
    """Coefficients ``(a, b)`` of ``a (2 sigma:e + b tr(sigma) tr(e))`` for contrast ``r``."""
    a = (r - 1.0) / (kappa * r + 1.0) * (kappa + 1.0) / 2.0
    b = (r - 1.0) * (kappa - 2.0) / (kappa + 2.0 * r - 1.0)
    return a, b


class ElasticityProblem(ProblemOracle):
    """Cost ``int alpha sigma(u):e(u) + l |Omega|`` with ``Omega`` the material."""

    name = "elasticity"

    def __init__(self, mesh: Mesh, config: ElasticityConfig):
        super().__init__(mesh)
        self.config = config
        n = 2 * mesh.n_nodes
        fixed = [2 * mesh.boundary_nodes(s)[:, None] + np.array([0, 1]) for s in config.clamped_sides]
        for point, mask in config.supports:
            node = locate_node(mesh, point)
            fixed += [np.array([2 * node + k for k in (0, 1) if mask[k]])]
        self.fixed_dofs = np.unique(np.concatenate([np.ravel(f) for f in fixed]).astype(np.int64))
        self.force = np.zeros(n)
        for point, force in config.loads:
            node = locate_node(mesh, point)
            self.force[2 * node: 2 * node + 2] += np.asarray(force, dtype=float)

    def _solve_state(self, fractions):
        c = self.config
        alpha = interpolate_material(fractions, c.alpha_in, c.alpha_out)
        K = assemble_elasticity(self.mesh, alpha, c.lame)
        A, b = apply_dirichlet(K, self.force, self.fixed_dofs)
        u = solve_sparse(A, b, method="symmetric")
        volume = float(fractions @ self.mesh.triangle_areas)
        compliance = float(self.force @ u)
        return compliance + c.l * volume, {"u": u, "alpha": alpha, "compliance": compliance}

    def _solve_adjoint(self, fractions, state):
        # compliance is self-adjoint
        return {"p": -state["u"]}

    def _densities(self, ev: Evaluation):
        if "densities" not in ev.extras:
            ev.extras["densities"] = energy_densities(self.mesh, ev.state["u"], self.config.lame)
        return ev.extras["densities"]

    def _nodal_derivative(self, psi, ev: Evaluation):
        c = self.config
        mu, lam = c.lame
        kappa = (lam + 3.0 * mu) / (lam + mu)
        se, trtr = (element_to_nodes(self.mesh, d) for d in self._densities(ev))
        a_in, b_in = inclusion_factor(c.alpha_out / c.alpha_in, kappa)
        a_out, b_out = inclusion_factor(c.alpha_in / c.alpha_out, kappa)
        dj_in = -c.alpha_in * a_in * (2.0 * se + b_in * trtr) - c.l
        dj_out = -c.alpha_out * a_out * (2.0 * se + b_out * trtr) + c.l
        return np.where(psi <= 0.0, -dj_in, dj_out)

    def _fraction_gradient(self, ev: Evaluation):
        c = self.config
        se, _ = self._densities(ev)
        return ((c.alpha_out - c.alpha_in) * se + c.l) * self.mesh.triangle_areas

    def fields(self, psi) -> dict:
        out = super().fields(psi)
        out["displacement"] = self.state(psi)["u"].reshape(-1, 2)
        return out
