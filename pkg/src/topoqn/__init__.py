"""Level-set topology optimisation with topological derivatives and quasi-Newton updates."""

from .levelset import LevelSetSpace, reference_clover
from .mesh import FunctionSpace, Mesh, build_crossed_grid
from .optimizer import ALGORITHMS, LevelSetOptimizer, OptConfig, run
from .problems import BENCHMARKS, make_problem
from .vtk import read_vtk, write_vtk

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "BENCHMARKS",
    "FunctionSpace",
    "LevelSetOptimizer",
    "LevelSetSpace",
    "Mesh",
    "OptConfig",
    "build_crossed_grid",
    "make_problem",
    "read_vtk",
    "reference_clover",
    "run",
    "write_vtk",
]
