"""Sparse assembly helpers, Dirichlet elimination and (non)linear solvers."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

__all__ = [
    "SolverError",
    "NewtonConvergenceError",
    "NewtonSettings",
    "NewtonResult",
    "SparsityPattern",
    "scatter_matrix",
    "scatter_vector",
    "apply_dirichlet",
    "solve_sparse",
    "newton_solve",
]


class SolverError(RuntimeError):
    """Raised when a linear solve fails or does not meet its residual bound."""


class NewtonConvergenceError(SolverError):
    """Newton iteration hit ``max_iter`` without meeting its tolerances."""

    def __init__(self, message: str, residual_norm: float, iterations: int):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations


@dataclass(frozen=True)
class NewtonSettings:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_iter: int = 25

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("Newton tolerances must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norms: list = field(default_factory=list)


def scatter_matrix(dof_map: np.ndarray, local: np.ndarray, shape) -> sp.csr_matrix:
    """Sum element matrices ``local[e]`` (shape (E, n, n)) into a CSR matrix.

    Duplicates are summed in a fixed order, so the result is deterministic.
    """
    n = dof_map.shape[1]
    rows = np.repeat(dof_map, n, axis=1).ravel()
    cols = np.tile(dof_map, (1, n)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


class SparsityPattern:
    """Fixed CSR structure for repeated assembly of the same COO layout.

    ``rows`` and ``cols`` may contain duplicates; :meth:`assemble` sums values
    sharing a position. Summation order is fixed, so results are bit-identical
    across calls.
    """

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        self.shape = shape
        keys = rows * shape[1] + cols
        uniq, self._inverse = np.unique(keys, return_inverse=True)
        self._indices = (uniq % shape[1]).astype(np.int32)
        counts = np.bincount(uniq // shape[1], minlength=shape[0])
        self._indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        self.nnz = uniq.size

    @classmethod
    def from_dof_map(cls, dof_map, shape, extra_rows=(), extra_cols=()):
        n = dof_map.shape[1]
        rows = np.concatenate([np.repeat(dof_map, n, axis=1).ravel(), np.asarray(extra_rows, np.int64)])
        cols = np.concatenate([np.tile(dof_map, (1, n)).ravel(), np.asarray(extra_cols, np.int64)])
        return cls(rows, cols, shape)

    def assemble(self, values) -> sp.csr_matrix:
        data = np.bincount(self._inverse, weights=np.asarray(values, float).ravel(),
                           minlength=self.nnz)
        return sp.csr_matrix((data, self._indices.copy(), self._indptr.copy()), shape=self.shape)


def scatter_vector(dof_map: np.ndarray, local: np.ndarray, size: int) -> np.ndarray:
    return np.bincount(dof_map.ravel(), weights=local.ravel(), minlength=size)


def apply_dirichlet(A, b, dofs, values=0.0):
    """Symmetric elimination of the constrained ``dofs``.

    Rows and columns of the constrained dofs are zeroed, their diagonal set to
    one and the right-hand side lifted so the solution attains ``values``
    exactly there. Returns new ``(A, b)``; the inputs are not modified.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    b = np.array(b, dtype=float, copy=True)
    dofs = np.asarray(dofs, dtype=np.int64).ravel()
    if dofs.size and (dofs.min() < 0 or dofs.max() >= n):
        raise IndexError("Dirichlet dof index out of range")
    g = np.zeros(n)
    g[dofs] = values
    b -= A @ g
    keep = np.ones(n)
    keep[dofs] = 0.0
    K = sp.diags(keep)
    A = (K @ A @ K + sp.diags(1.0 - keep)).tocsr()
    A.eliminate_zeros()
    b[dofs] = g[dofs]
    return A, b


def _factorize(A, symmetric: bool):
    if symmetric:
        # diagonal pivots keep the fill of saddle-point systems low
        try:
            return spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                             options=dict(SymmetricMode=True))
        except RuntimeError:
            logger.debug("symmetric-mode factorization failed, retrying with pivoting")
    try:
        return spla.splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc


def solve_sparse(A, b, method: str = "direct", rtol: float = 1e-10) -> np.ndarray:
    """Solve ``A x = b``; the residual must satisfy ``|Ax-b| <= rtol (1 + |b|)``.

    ``method`` is ``"direct"`` (sparse LU with partial pivoting),
    ``"symmetric"`` (sparse LU with a symmetric ordering and diagonal pivots,
    for structurally symmetric matrices such as saddle-point systems; falls
    back to ``"direct"`` on a zero pivot) or ``"cg"`` (Jacobi-preconditioned
    conjugate gradients, SPD matrices only).
    """
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    bound = rtol * (1.0 + np.linalg.norm(b))
    if method in ("direct", "symmetric"):
        lu = _factorize(A, method == "symmetric")
        x = lu.solve(b)
        r = b - A @ x
        if not np.linalg.norm(r) <= bound:
            x += lu.solve(r)  # one step of iterative refinement
            r = b - A @ x
    elif method == "cg":
        d = A.diagonal()
        if np.any(d <= 0):
            raise SolverError("cg path requires a positive diagonal")
        M = sp.diags(1.0 / d)
        x, info = spla.cg(A, b, rtol=0.1 * bound / max(np.linalg.norm(b), 1e-300), atol=0.0,
                          maxiter=10 * A.shape[0], M=M)
        if info != 0:
            raise SolverError(f"cg did not converge (info={info})")
        r = b - A @ x
    else:
        raise ValueError(f"unknown solve method {method!r}")
    res = np.linalg.norm(r)
    if not np.isfinite(x).all() or not res <= bound:
        raise SolverError(f"linear solve residual {res:.3e} exceeds bound {bound:.3e}")
    return x


def newton_solve(residual_fn, jacobian_fn, x0, settings: NewtonSettings | None = None,
                 fixed_dofs=None, linear_solver=None) -> NewtonResult:
    """Full-step Newton iteration for ``residual_fn(x) = 0``.

    ``x0`` must already carry any Dirichlet values on ``fixed_dofs``; the
    increments vanish there and those residual entries are ignored.
    Converges when the free residual norm drops below ``abs_tol`` or below
    ``rel_tol`` times the initial norm. ``linear_solver(J, rhs, fixed)``
    replaces the default Dirichlet elimination plus sparse LU; it must return
    an increment that vanishes on ``fixed``.
    """
    settings = settings or NewtonSettings()
    x = np.array(x0, dtype=float, copy=True)
    fixed = np.zeros(x.size, dtype=bool)
    if fixed_dofs is not None:
        fixed[np.asarray(fixed_dofs, dtype=np.int64)] = True
    fixed_idx = np.flatnonzero(fixed)

    r = np.asarray(residual_fn(x), dtype=float)
    r[fixed] = 0.0
    norms = [float(np.linalg.norm(r))]
    r0 = norms[0]
    for it in range(settings.max_iter + 1):
        if norms[-1] <= settings.abs_tol or norms[-1] <= settings.rel_tol * r0:
            return NewtonResult(x, it, norms)
        if it == settings.max_iter:
            break
        J = jacobian_fn(x)
        if linear_solver is not None:
            x += linear_solver(J, -r, fixed_idx)
        else:
            J, rhs = apply_dirichlet(J, -r, fixed_idx, 0.0)
            x += solve_sparse(J, rhs)
        r = np.asarray(residual_fn(x), dtype=float)
        r[fixed] = 0.0
        norms.append(float(np.linalg.norm(r)))
        logger.debug("newton iteration %d residual %.3e", it + 1, norms[-1])
        if not np.isfinite(norms[-1]):
            break
    raise NewtonConvergenceError(
        f"Newton did not converge in {settings.max_iter} iterations "
        f"(residual {norms[-1]:.3e})", norms[-1], len(norms) - 1)
