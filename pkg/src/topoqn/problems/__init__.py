"""Problem oracles: cost and generalized topological derivative for each problem class."""

from .base import Evaluation, ProblemOracle, element_to_nodes, interpolate_material
from .benchmarks import BENCHMARKS, Benchmark, benchmark_mesh, initial_levelset, make_problem
from .elasticity import ElasticityConfig, ElasticityProblem, inclusion_factor
from .fdcheck import disk_triangle_areas, generalized_fd_quotient, td_fd_quotient
from .flow import FlowConfig, FlowProblem, pipe_bend_velocity, rugby_velocity
from .poisson import PoissonConfig, PoissonProblem

__all__ = [
    "Evaluation",
    "ProblemOracle",
    "element_to_nodes",
    "interpolate_material",
    "BENCHMARKS",
    "Benchmark",
    "benchmark_mesh",
    "initial_levelset",
    "make_problem",
    "ElasticityConfig",
    "ElasticityProblem",
    "inclusion_factor",
    "disk_triangle_areas",
    "generalized_fd_quotient",
    "td_fd_quotient",
    "FlowConfig",
    "FlowProblem",
    "pipe_bend_velocity",
    "rugby_velocity",
    "PoissonConfig",
    "PoissonProblem",
]
