"""The seven benchmark configurations, scalable by grid resolution."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..levelset import LevelSetSpace, reference_clover
from ..mesh import Mesh, build_crossed_grid
from .elasticity import ElasticityConfig, ElasticityProblem
from .flow import FlowConfig, FlowProblem, pipe_bend_velocity, rugby_velocity
from .poisson import PoissonConfig, PoissonProblem

__all__ = ["Benchmark", "BENCHMARKS", "benchmark_mesh", "make_problem", "initial_levelset"]


@dataclass(frozen=True)
class Benchmark:
    """Hold-all rectangle, default resolution and problem factory."""

    rect: tuple
    default_n: int
    factory: Callable[[Mesh], object]


def benchmark_mesh(rect, n: int) -> Mesh:
    """Crossed grid with ``n`` squares along the shorter side of ``rect``."""
    if int(n) != n or n < 1:
        raise ValueError(f"grid resolution must be a positive integer, got {n!r}")
    x0, x1, y0, y1 = rect
    lx, ly = x1 - x0, y1 - y0
    if lx >= ly:
        nx, ny = int(round(n * lx / ly)), int(n)
    else:
        nx, ny = int(n), int(round(n * ly / lx))
    return build_crossed_grid(nx, ny, rect)


def _clover(nonlinearity):
    def factory(mesh):
        return PoissonProblem.from_reference(
            mesh, reference_clover(mesh), PoissonConfig(nonlinearity=nonlinearity))
    return factory


def _cantilever(mesh):
    return ElasticityProblem(mesh, ElasticityConfig(
        l=100.0, clamped_sides=("left",), loads=(((2.0, 0.5), (0.0, -1.0)),)))


_BRIDGE_SUPPORTS = (((0.0, 0.0), (True, True)), ((2.0, 0.0), (False, True)))


def _bridge_single(mesh):
    return ElasticityProblem(mesh, ElasticityConfig(
        l=30.0, supports=_BRIDGE_SUPPORTS, loads=(((1.0, 0.0), (0.0, -1.0)),)))


def _bridge_multi(mesh):
    loads = tuple(((x, 0.0), (0.0, -1.0)) for x in (0.5, 1.0, 1.5))
    return ElasticityProblem(mesh, ElasticityConfig(l=120.0, supports=_BRIDGE_SUPPORTS, loads=loads))


def _pipe_bend(mesh):
    return FlowProblem(mesh, FlowConfig(vol_des=0.08 * np.pi, boundary_velocity=pipe_bend_velocity))


def _rugby(mesh):
    return FlowProblem(mesh, FlowConfig(vol_des=0.8, boundary_velocity=rugby_velocity))


BENCHMARKS = {
    "clover_linear": Benchmark((-2.0, 2.0, -2.0, 2.0), 96, _clover("linear")),
    "clover_semilinear": Benchmark((-2.0, 2.0, -2.0, 2.0), 96, _clover("cubic")),
    "cantilever": Benchmark((0.0, 2.0, 0.0, 1.0), 32, _cantilever),
    "bridge_single": Benchmark((0.0, 2.0, 0.0, 1.2), 48, _bridge_single),
    "bridge_multi": Benchmark((0.0, 2.0, 0.0, 1.2), 48, _bridge_multi),
    "pipe_bend": Benchmark((0.0, 1.0, 0.0, 1.0), 100, _pipe_bend),
    "rugby": Benchmark((0.0, 1.0, 0.0, 1.0), 100, _rugby),
}


def initial_levelset(mesh: Mesh) -> np.ndarray:
    """``psi = -1`` normalized: the design fills the whole hold-all."""
    return LevelSetSpace(mesh).normalize(-np.ones(mesh.n_nodes))


def make_problem(name: str, mesh_n: int | None = None):
    """Build the oracle of benchmark ``name`` and its initial level set.

    Returns
    -------
    oracle : ProblemOracle
    psi0 : ndarray
    """
    if name not in BENCHMARKS:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(BENCHMARKS)}")
    bench = BENCHMARKS[name]
    mesh = benchmark_mesh(bench.rect, bench.default_n if mesh_n is None else mesh_n)
    oracle = bench.factory(mesh)
    oracle.name = name
    return oracle, initial_levelset(mesh)
