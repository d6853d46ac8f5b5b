"""Common machinery of the problem oracles: classification, caching, counters."""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from ..levelset import LevelSetSpace
from ..mesh import Mesh

__all__ = ["ProblemOracle", "Evaluation", "interpolate_material", "element_to_nodes"]


def interpolate_material(fractions: np.ndarray, inside: float, outside: float) -> np.ndarray:
    """Volume-fraction weighted coefficient per triangle."""
    return fractions * inside + (1.0 - fractions) * outside


def element_to_nodes(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Area-weighted average of per-triangle values at the mesh nodes."""
    w = mesh.triangle_areas
    num = np.bincount(mesh.triangles.ravel(), weights=np.repeat(w * values, 3), minlength=mesh.n_nodes)
    den = np.bincount(mesh.triangles.ravel(), weights=np.repeat(w, 3), minlength=mesh.n_nodes)
    return num / den


@dataclass
class Evaluation:
    """Everything computed for one design; the adjoint part is filled lazily."""

    fractions: np.ndarray
    volume: float
    cost: float
    state: dict
    adjoint: dict | None = None
    extras: dict = field(default_factory=dict)


class ProblemOracle(ABC):
    """Cost and generalized topological derivative of a design ``{psi < 0}``.

    Subclasses implement the state solve, the adjoint solve and the nodal
    derivative formula. Results are cached per design; the cache key is the
    element classification together with the nodal sign pattern, so positive
    rescalings of ``psi`` reuse previous solves.

    Attributes
    ----------
    state_solves : int
        Number of state solves performed so far (cache hits are free).
    """

    name = "problem"

    def __init__(self, mesh: Mesh, cache_size: int = 4):
        self.mesh = mesh
        self.space = LevelSetSpace(mesh)
        self.state_solves = 0
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = int(cache_size)

    # -- to implement -------------------------------------------------------
    @abstractmethod
    def _solve_state(self, fractions: np.ndarray) -> tuple[float, dict]:
        """Return ``(cost, state)`` for the given element fractions."""

    @abstractmethod
    def _solve_adjoint(self, fractions: np.ndarray, state: dict) -> dict:
        """Return the adjoint fields."""

    @abstractmethod
    def _nodal_derivative(self, psi, ev: Evaluation) -> np.ndarray:
        """Generalized topological derivative at the mesh nodes."""

    @abstractmethod
    def _fraction_gradient(self, ev: Evaluation) -> np.ndarray:
        """Adjoint-based ``dJ / d fraction_T`` for every triangle."""

    # -- public interface ---------------------------------------------------
    def _check_psi(self, psi) -> np.ndarray:
        psi = np.asarray(psi, dtype=float)
        if psi.shape != (self.mesh.n_nodes,):
            raise ValueError(f"psi must have {self.mesh.n_nodes} nodal values, got shape {psi.shape}")
        if not np.isfinite(psi).all():
            raise ValueError("psi contains non-finite values")
        return psi

    def _evaluate_fractions(self, fractions: np.ndarray, key) -> Evaluation:
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        cost, state = self._solve_state(fractions)
        self.state_solves += 1
        ev = Evaluation(fractions, float(fractions @ self.mesh.triangle_areas), float(cost), state)
        self._cache[key] = ev
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return ev

    def evaluate(self, psi) -> Evaluation:
        psi = self._check_psi(psi)
        fractions = self.space.classify(psi)
        key = (fractions.tobytes(), (psi <= 0.0).tobytes())
        return self._evaluate_fractions(fractions, key)

    def cost(self, psi) -> float:
        return self.evaluate(psi).cost

    def state(self, psi) -> dict:
        return self.evaluate(psi).state

    def adjoint(self, psi) -> dict:
        ev = self.evaluate(psi)
        if ev.adjoint is None:
            ev.adjoint = self._solve_adjoint(ev.fractions, ev.state)
        return ev.adjoint

    def derivative(self, psi) -> np.ndarray:
        """Generalized topological derivative as a P1 nodal field."""
        psi = self._check_psi(psi)
        ev = self.evaluate(psi)
        if "derivative" not in ev.extras:
            self.adjoint(psi)
            ev.extras["derivative"] = self._nodal_derivative(psi, ev)
        return ev.extras["derivative"].copy()

    def cost_from_fractions(self, fractions) -> float:
        """Cost of a design given directly by per-triangle volume fractions.

        Values slightly outside ``[0, 1]`` extrapolate the material law
        linearly, which allows central differences at pure elements.
        """
        fractions = np.asarray(fractions, dtype=float)
        if fractions.shape != (self.mesh.n_triangles,):
            raise ValueError("fractions must have one value per triangle")
        if not np.isfinite(fractions).all():
            raise ValueError("fractions must be finite")
        return self._evaluate_fractions(fractions, ("fractions", fractions.tobytes())).cost

    def fraction_gradient(self, psi) -> np.ndarray:
        """Derivative of the cost with respect to each element's volume fraction.

        The material coefficients depend linearly on the fractions, so this is
        the adjoint-based Gateaux derivative of the cost with respect to a
        per-element material perturbation.
        """
        ev = self.evaluate(psi)
        self.adjoint(psi)
        return self._fraction_gradient(ev)

    def fields(self, psi) -> dict:
        """Named nodal fields for visualization."""
        return {"psi": np.asarray(psi, dtype=float), "derivative": self.derivative(psi)}

    def clear_cache(self):
        self._cache.clear()
