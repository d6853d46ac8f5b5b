"""Level-set optimization drivers based on the generalized topological derivative.

Four algorithms share one loop: sphere combination, convex combination,
projected gradient descent and limited-memory BFGS. All of them use the same
backtracking line search and stop when the L2 angle between the level set and
the derivative drops below a tolerance.
"""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from sklearn.base import BaseEstimator

from .levelset import LevelSetSpace
from .problems.base import ProblemOracle

logger = logging.getLogger(__name__)

__all__ = [
    "ALGORITHMS",
    "OptConfig",
    "LbfgsMemory",
    "IterationRecord",
    "ConvergenceInfo",
    "LineSearchResult",
    "RunResult",
    "DegenerateAngleError",
    "OptimizationError",
    "sphere_step",
    "convex_step",
    "gradient_step",
    "two_loop",
    "bfgs_direction",
    "line_search",
    "convergence_check",
    "run",
    "LevelSetOptimizer",
]

ALGORITHMS = ("sphere", "convex", "gradient", "bfgs")
CURVATURE_FLOOR = 1e-14
SIN_FLOOR = 1e-14


class DegenerateAngleError(ArithmeticError):
    """The angle between level set and derivative is 0 or pi to working precision."""


class OptimizationError(RuntimeError):
    """A problem solve failed during an optimization run.

    Attributes
    ----------
    iteration : int
        Iteration index at which the failure occurred.
    """

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True)
class OptConfig:
    """Settings shared by the four algorithms.

    Parameters
    ----------
    algorithm : {"sphere", "convex", "gradient", "bfgs"}
    tol_angle_deg : float
        Stopping angle in degrees.
    k_max : int
        Maximum number of iterations.
    lambda0 : float
        Initial step size.
    memory : int
        Number of stored L-BFGS pairs.
    max_halvings : int
        Line-search trials beyond the first.
    lambda_cap : float
        Upper bound for the step growth of gradient descent.
    """

    algorithm: str = "bfgs"
    tol_angle_deg: float = 1.5
    k_max: int = 500
    lambda0: float = 1.0
    memory: int = 5
    max_halvings: int = 30
    lambda_cap: float = 1e3

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.tol_angle_deg > 0:
            raise ValueError("tol_angle_deg must be positive")
        for name, low in (("k_max", 0), ("memory", 0), ("max_halvings", 1)):
            v = getattr(self, name)
            if int(v) != v or v < low:
                raise ValueError(f"{name} must be an integer >= {low}, got {v!r}")
        if not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")
        if not self.lambda_cap >= self.lambda0:
            raise ValueError("lambda_cap must be at least lambda0")
        if self.algorithm in ("sphere", "convex") and self.lambda0 > 1:
            raise ValueError("sphere and convex steps need lambda0 <= 1")

    @property
    def tol_angle(self) -> float:
        """Stopping angle in radians."""
        return np.deg2rad(self.tol_angle_deg)


@dataclass(frozen=True)
class IterationRecord:
    k: int
    cost: float
    theta_deg: float
    proj_norm: float
    step: float
    state_solves: int
    wall_time: float


@dataclass(frozen=True)
class ConvergenceInfo:
    theta_deg: float
    proj_norm: float
    c: float
    converged: bool
    degenerate: bool = False


@dataclass(frozen=True)
class LineSearchResult:
    accepted: bool
    step: float
    psi: np.ndarray | None
    cost: float
    trials: int


@dataclass
class RunResult:
    psi: np.ndarray
    history: list
    reason: str
    derivative: np.ndarray | None = None
    info: ConvergenceInfo | None = None
    restarts: int = 0


class LbfgsMemory:
    """Ring buffer of curvature pairs ``(s, y, rho)`` with ``rho = 1 / (y, s)``.

    Pairs whose curvature ``(y, s)`` does not exceed ``1e-14 |y| |s|`` are
    skipped.

    Parameters
    ----------
    capacity : int
    inner : callable
        Inner product ``inner(a, b) -> float``.
    """

    def __init__(self, capacity: int, inner: Callable = np.dot):
        if int(capacity) != capacity or capacity < 0:
            raise ValueError("capacity must be a non-negative integer")
        self.capacity = int(capacity)
        self.inner = inner
        self.pairs: deque = deque(maxlen=max(self.capacity, 1))

    def __len__(self):
        return len(self.pairs) if self.capacity else 0

    def clear(self):
        self.pairs.clear()

    def store(self, s, y) -> bool:
        """Append a pair if it has positive curvature; return whether it was stored."""
        if self.capacity == 0:
            return False
        ys = self.inner(y, s)
        bound = CURVATURE_FLOOR * np.sqrt(max(self.inner(y, y), 0.0) * max(self.inner(s, s), 0.0))
        if not ys > bound:
            logger.debug("skipping L-BFGS pair with curvature %.3e", ys)
            return False
        self.pairs.append((np.array(s, dtype=float), np.array(y, dtype=float), 1.0 / ys))
        return True


def _angle_parts(space: LevelSetSpace, psi, d):
    npsi = space.norm(psi)
    nd = space.norm(d)
    if not (npsi > 0 and nd > 0):
        raise ValueError("level set and derivative must be nonzero")
    return space.angle(psi, d), npsi, nd


def sphere_step(space: LevelSetSpace, psi, d, lam: float) -> np.ndarray:
    """Great-circle interpolation from ``psi`` towards ``d / |d|``.

    ``[sin((1 - lam) theta) psi + sin(lam theta) d / |d|] / sin(theta)``.
    For unit ``psi`` the result has unit norm.
    """
    if not 0 < lam <= 1:
        raise ValueError("sphere step needs 0 < lam <= 1")
    theta, _, nd = _angle_parts(space, psi, d)
    s = np.sin(theta)
    if s < SIN_FLOOR:
        raise DegenerateAngleError(f"sin(theta) = {s:.3e}")
    return (np.sin((1.0 - lam) * theta) * np.asarray(psi) + np.sin(lam * theta) * np.asarray(d) / nd) / s


def convex_step(space: LevelSetSpace, psi, d, lam: float) -> np.ndarray:
    """``lam d / |d| + (1 - lam) psi``."""
    if not 0 <= lam <= 1:
        raise ValueError("convex step needs 0 <= lam <= 1")
    nd = space.norm(d)
    if not nd > 0:
        raise ValueError("derivative must be nonzero")
    return lam * np.asarray(d) / nd + (1.0 - lam) * np.asarray(psi)


def gradient_step(psi, g, lam: float) -> np.ndarray:
    """Explicit Euler step ``psi - lam g``."""
    if not lam > 0:
        raise ValueError("step size must be positive")
    return np.asarray(psi) - lam * np.asarray(g)


def two_loop(memory: LbfgsMemory, b) -> np.ndarray:
    """Apply the L-BFGS inverse Hessian approximation to ``b``.

    The initial approximation is ``gamma Id`` with ``gamma = (s, y) / (y, y)``
    of the newest pair, or the identity when the memory is empty.
    """
    q = np.array(b, dtype=float)
    if len(memory) == 0:
        return q
    inner = memory.inner
    pairs = list(memory.pairs)
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * inner(s, q)
        q -= a * y
        alphas.append(a)
    s, y, _ = pairs[-1]
    r = (inner(s, y) / inner(y, y)) * q
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        beta = rho * inner(y, r)
        r += (a - beta) * s
    return r


def bfgs_direction(memory: LbfgsMemory, g) -> np.ndarray:
    """Search direction ``-H g``."""
    return -two_loop(memory, g)


def line_search(cost_fn: Callable, cost_old: float, candidate_fn: Callable, lam_init: float,
                max_halvings: int) -> LineSearchResult:
    """Backtracking on ``lam_init * 2^-j``, ``j = 0..max_halvings``.

    Accepts the first candidate with ``cost_fn(candidate) <= cost_old``.
    """
    if not lam_init > 0:
        raise ValueError("initial step must be positive")
    lam = float(lam_init)
    for j in range(int(max_halvings) + 1):
        cand = candidate_fn(lam)
        c = cost_fn(cand)
        if c <= cost_old:
            return LineSearchResult(True, lam, cand, c, j + 1)
        lam *= 0.5
    return LineSearchResult(False, lam * 2.0, None, np.inf, int(max_halvings) + 1)


def convergence_check(space: LevelSetSpace, psi, d, tol_angle: float) -> ConvergenceInfo:
    """Angle criterion, norm of the projected derivative and optimality constant.

    ``tol_angle`` is in radians. A vanishing derivative counts as converged.
    """
    nrm2 = space.inner(psi, psi)
    if not nrm2 > 0:
        raise ValueError("level set must be nonzero")
    dp = space.inner(d, psi)
    c = dp / nrm2
    proj_norm = space.norm(space.project(d, psi))
    nd = space.norm(d)
    if nd == 0.0:
        return ConvergenceInfo(0.0, 0.0, 0.0, True, degenerate=True)
    theta = float(np.arctan2(proj_norm * np.sqrt(nrm2), dp))
    return ConvergenceInfo(float(np.rad2deg(theta)), proj_norm, c, theta < tol_angle)


def run(oracle: ProblemOracle, psi0, config: OptConfig, callback: Callable | None = None) -> RunResult:
    """Optimize the design ``{psi < 0}`` of ``oracle`` starting from ``psi0``.

    Parameters
    ----------
    oracle : ProblemOracle
    psi0 : ndarray
        Nonzero initial level set on the oracle's mesh.
    config : OptConfig
    callback : callable, optional
        Called as ``callback(record, psi, derivative)`` after every iteration.

    Returns
    -------
    RunResult
        Final level set, iteration records and the termination reason:
        ``"angle"``, ``"max_iter"`` or ``"line_search"``.
    """
    space = oracle.space
    psi = np.asarray(psi0, dtype=float)
    if psi.shape != (oracle.mesh.n_nodes,):
        raise ValueError("psi0 does not live on the oracle mesh")
    psi = space.normalize(psi)
    memory = LbfgsMemory(config.memory, space.inner)
    t0 = time.perf_counter()
    history: list[IterationRecord] = []
    lam_prev = None
    step = 0.0
    g_prev = psi_prev = None
    restarts = 0
    k = 0

    def guarded(fn, *args):
        try:
            return fn(*args)
        except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
            if isinstance(exc, DegenerateAngleError):
                raise
            raise OptimizationError(f"iteration {k}: {exc}", k) from exc

    cost = guarded(oracle.cost, psi)
    while True:
        d = guarded(oracle.derivative, psi)
        info = convergence_check(space, psi, d, config.tol_angle)
        rec = IterationRecord(k, cost, info.theta_deg, info.proj_norm, step,
                              oracle.state_solves, time.perf_counter() - t0)
        history.append(rec)
        logger.info("k=%d cost=%.6e theta=%.3f deg proj=%.3e step=%.3g",
                    k, cost, info.theta_deg, info.proj_norm, step)
        if callback is not None:
            callback(rec, psi, d)
        if info.converged:
            return RunResult(psi, history, "angle", d, info, restarts)
        if k >= config.k_max:
            return RunResult(psi, history, "max_iter", d, info, restarts)

        alg = config.algorithm
        if alg == "sphere":
            lam = config.lambda0 if lam_prev is None else min(1.0, 1.5 * lam_prev)
            try:
                sphere_step(space, psi, d, lam)
            except DegenerateAngleError:
                return RunResult(psi, history, "angle", d, info, restarts)
            candidate = lambda t: sphere_step(space, psi, d, t)  # noqa: E731
        elif alg == "convex":
            lam = config.lambda0 if lam_prev is None else min(1.0, 2.0 * lam_prev)
            candidate = lambda t: convex_step(space, psi, d, t)  # noqa: E731
        else:
            g = -space.project(d, psi)
            if alg == "gradient":
                lam = config.lambda0 if lam_prev is None else min(config.lambda_cap, 2.0 * lam_prev)
                direction = -g
            else:
                lam = config.lambda0
                if g_prev is not None:
                    memory.store(psi - psi_prev, g - g_prev)
                direction = bfgs_direction(memory, g)
            candidate = lambda t, p=direction: psi + t * p  # noqa: E731

        cost_fn = lambda cand: guarded(oracle.cost, space.normalize(cand))  # noqa: E731
        ls = line_search(cost_fn, cost, candidate, lam, config.max_halvings)
        if not ls.accepted and alg == "bfgs" and len(memory) > 0:
            logger.info("line search failed at k=%d, restarting L-BFGS with -g", k)
            restarts += 1
            memory.clear()
            direction = -g
            candidate = lambda t, p=direction: psi + t * p  # noqa: E731
            ls = line_search(cost_fn, cost, candidate, config.lambda0, config.max_halvings)
        if not ls.accepted:
            return RunResult(psi, history, "line_search", d, info, restarts)

        if alg == "bfgs":
            g_prev, psi_prev = g, psi
        psi = space.normalize(ls.psi)
        cost = ls.cost
        step = lam_prev = ls.step
        k += 1


class LevelSetOptimizer(BaseEstimator):
    """Estimator-style front end of :func:`run`.

    Parameters
    ----------
    algorithm : {"sphere", "convex", "gradient", "bfgs"}, default="bfgs"
    tol_angle_deg : float, default=1.5
    max_iter : int, default=500
    memory : int, default=5
    lambda0 : float, default=1.0
    max_halvings : int, default=30
    lambda_cap : float, default=1e3

    Attributes
    ----------
    psi_ : ndarray
        Final level set (unit L2 norm).
    derivative_ : ndarray
        Generalized topological derivative at ``psi_``.
    history_ : list of IterationRecord
    termination_reason_ : str
    n_iter_ : int
    cost_ : float
    """

    def __init__(self, algorithm="bfgs", tol_angle_deg=1.5, max_iter=500, memory=5,
                 lambda0=1.0, max_halvings=30, lambda_cap=1e3):
        self.algorithm = algorithm
        self.tol_angle_deg = tol_angle_deg
        self.max_iter = max_iter
        self.memory = memory
        self.lambda0 = lambda0
        self.max_halvings = max_halvings
        self.lambda_cap = lambda_cap

    def _config(self) -> OptConfig:
        return OptConfig(self.algorithm, self.tol_angle_deg, self.max_iter, self.lambda0,
                         self.memory, self.max_halvings, self.lambda_cap)

    def fit(self, problem: ProblemOracle, psi0=None, callback=None):
        """Run the optimizer on ``problem``; ``psi0`` defaults to the full design."""
        if not isinstance(problem, ProblemOracle):
            raise TypeError("problem must be a ProblemOracle")
        config = self._config()
        if psi0 is None:
            psi0 = -np.ones(problem.mesh.n_nodes)
        psi0 = _check_levelset(psi0, problem.mesh.n_nodes)
        result = run(problem, psi0, config, callback)
        self.psi_ = result.psi
        self.derivative_ = result.derivative
        self.history_ = result.history
        self.termination_reason_ = result.reason
        self.n_iter_ = result.history[-1].k
        self.cost_ = result.history[-1].cost
        self.restarts_ = result.restarts
        return self


def _check_levelset(psi, n_nodes: int) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.ndim != 1 or psi.shape[0] != n_nodes:
        raise ValueError(f"psi0 must be a vector of {n_nodes} nodal values, got shape {psi.shape}")
    if not np.isfinite(psi).all():
        raise ValueError("psi0 contains non-finite values")
    if not np.any(psi != 0.0):
        raise ValueError("psi0 must be nonzero")
    return psi
