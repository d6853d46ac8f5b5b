"""Command-line benchmark runner.

Example
-------
    topoqn --problem cantilever --algorithm bfgs --mesh-n 32 --output-dir out/

Writes ``history.csv``, ``summary.txt``, ``final.vtk`` and periodic
``snapshot_<k>.vtk`` files to the output directory.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .levelset import LevelSetSpace
from .optimizer import ALGORITHMS, OptConfig, OptimizationError, run
from .problems import BENCHMARKS, benchmark_mesh
from .vtk import write_vtk

__all__ = ["RunSpec", "HISTORY_HEADER", "build_parser", "parse_args", "run_benchmark", "main"]

HISTORY_HEADER = ("iter", "cost", "theta_deg", "proj_norm", "step", "state_solves", "wall_time_s")
EXIT_OK, EXIT_SOLVER, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunSpec:
    """One benchmark run. ``mesh_n=None`` selects the problem's default resolution."""

    problem: str
    algorithm: str = "bfgs"
    mesh_n: int | None = None
    tol_deg: float = 1.5
    max_iter: int = 500
    memory: int = 5
    snapshot_every: int = 50
    output_dir: Path = Path("topoqn_out")
    initial: str = "full"

    def __post_init__(self):
        if self.problem not in BENCHMARKS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.mesh_n is not None and (int(self.mesh_n) != self.mesh_n or self.mesh_n < 4):
            raise ValueError("mesh_n must be an integer >= 4")
        if not self.tol_deg > 0:
            raise ValueError("tol_deg must be positive")
        if self.max_iter < 0 or self.memory < 0 or self.snapshot_every < 0:
            raise ValueError("max_iter, memory and snapshot_every must be non-negative")
        if self.initial not in ("full", "empty"):
            raise ValueError("initial must be 'full' or 'empty'")

    @property
    def resolution(self) -> int:
        return BENCHMARKS[self.problem].default_n if self.mesh_n is None else int(self.mesh_n)


def _int_at_least(lo):
    def conv(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if value < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {value}")
        return value
    return conv


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="topoqn",
        description="Level-set topology optimization benchmarks with topological derivatives.")
    p.add_argument("--problem", required=True, choices=sorted(BENCHMARKS))
    p.add_argument("--algorithm", default="bfgs", choices=ALGORITHMS)
    p.add_argument("--mesh-n", type=_int_at_least(4), default=None,
                   help="squares along the shorter side (default: problem default)")
    p.add_argument("--tol-deg", type=_positive_float, default=1.5, help="stopping angle in degrees")
    p.add_argument("--max-iter", type=_int_at_least(0), default=500)
    p.add_argument("--memory", type=_int_at_least(0), default=5, help="L-BFGS memory size")
    p.add_argument("--snapshot-every", type=_int_at_least(0), default=50,
                   help="write snapshot_<k>.vtk every k iterations (0 disables)")
    p.add_argument("--output-dir", type=Path, default=Path("topoqn_out"))
    p.add_argument("--initial", choices=("full", "empty"), default="full",
                   help="initial design: whole hold-all (psi = -1) or empty (psi = +1)")
    p.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    return p


def _parse(argv):
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    if not argv:
        parser.print_usage(sys.stderr)
        parser.exit(EXIT_USAGE, f"{parser.prog}: error: no arguments given\n")
    ns = parser.parse_args(argv)
    spec = RunSpec(ns.problem, ns.algorithm, ns.mesh_n, ns.tol_deg, ns.max_iter, ns.memory,
                   ns.snapshot_every, ns.output_dir, ns.initial)
    return spec, ns.verbose


def parse_args(argv=None) -> RunSpec:
    """Parse command-line flags; usage errors exit with status 2."""
    return _parse(argv)[0]


def _history_row(rec):
    return [rec.k, repr(rec.cost), repr(rec.theta_deg), repr(rec.proj_norm), repr(rec.step),
            rec.state_solves, f"{rec.wall_time:.6f}"]


def _write_summary(path, spec, result, oracle, n_nodes, n_triangles):
    last = result.history[-1]
    info = result.info
    ev = oracle.evaluate(result.psi)
    lines = {
        "problem": spec.problem,
        "algorithm": spec.algorithm,
        "mesh_n": spec.resolution,
        "nodes": n_nodes,
        "triangles": n_triangles,
        "termination_reason": result.reason,
        "iterations": last.k,
        "final_cost": repr(last.cost),
        "final_theta_deg": repr(last.theta_deg),
        "final_proj_norm": repr(last.proj_norm),
        "optimality_constant_c": repr(info.c) if info is not None else "nan",
        "volume": repr(ev.volume),
        "state_solves": last.state_solves,
        "restarts": result.restarts,
        "wall_time_s": f"{last.wall_time:.3f}",
    }
    Path(path).write_text("".join(f"{k}: {v}\n" for k, v in lines.items()))


def run_benchmark(spec: RunSpec) -> int:
    """Run ``spec`` and write its artifacts; return the process exit code.

    0 for convergence by angle or reaching the iteration limit, 1 for a
    solver or line-search failure, 3 for output errors.
    """
    out = Path(spec.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc}", file=sys.stderr)
        return EXIT_IO

    bench = BENCHMARKS[spec.problem]
    mesh = benchmark_mesh(bench.rect, spec.resolution)
    oracle = bench.factory(mesh)
    oracle.name = spec.problem
    psi0 = LevelSetSpace(mesh).normalize(np.full(mesh.n_nodes, -1.0 if spec.initial == "full" else 1.0))
    config = OptConfig(spec.algorithm, tol_angle_deg=spec.tol_deg, k_max=spec.max_iter,
                       memory=spec.memory)

    try:
        with open(out / "history.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(HISTORY_HEADER)

            def callback(rec, psi, d):
                writer.writerow(_history_row(rec))
                fh.flush()
                if spec.snapshot_every and rec.k % spec.snapshot_every == 0:
                    write_vtk(out / f"snapshot_{rec.k}.vtk", mesh, oracle.fields(psi),
                              title=f"{spec.problem} {spec.algorithm} k={rec.k}")

            try:
                result = run(oracle, psi0, config, callback)
            except OptimizationError as exc:
                print(f"error: solver failure: {exc}", file=sys.stderr)
                return EXIT_SOLVER

        write_vtk(out / "final.vtk", mesh, oracle.fields(result.psi),
                  title=f"{spec.problem} {spec.algorithm} final")
        _write_summary(out / "summary.txt", spec, result, oracle, mesh.n_nodes, mesh.n_triangles)
    except OSError as exc:
        print(f"error: writing results failed: {exc}", file=sys.stderr)
        return EXIT_IO

    last = result.history[-1]
    print(f"{spec.problem}/{spec.algorithm}: {result.reason} after {last.k} iterations, "
          f"cost {last.cost:.6e}, theta {last.theta_deg:.3f} deg")
    if result.reason == "line_search":
        print("error: line search failed", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def main(argv=None) -> int:
    spec, verbose = _parse(argv)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run_benchmark(spec)


if __name__ == "__main__":
    sys.exit(main())
