"""Backward Euler with a damped Newton solve for

    M (v^j - v^{j-1}) / dt + S v^j + h(v^j) - d^j = 0.

The residual is measured after multiplying by ``dt`` so one absolute
tolerance works across step sizes.
"""
from __future__ import annotations

from dataclasses import dataclass
import logging

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded

from .assembly import SystemMatrices, assemble_nonlinear, assemble_nonlinear_jacobian
from .dg_space import DgSolution
from .problems import ProblemSpec

__all__ = [
    "NewtonConfig",
    "StepReport",
    "NewtonError",
    "bandwidth",
    "solve_linear",
    "step_residual",
    "backward_euler_step",
]

log = logging.getLogger(__name__)


class NewtonError(RuntimeError):
    """Newton failed to converge or the line search stalled."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class NewtonConfig:
    tol_residual: float = 1e-10
    max_iter: int = 25
    damping: float = 0.5
    max_halvings: int = 8

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0 < self.damping < 1:
            raise ValueError("damping factor must lie in (0, 1)")


@dataclass(frozen=True)
class StepReport:
    newton_iterations: int
    final_residual: float
    converged: bool
    residual_history: tuple = ()


def _coo(A):
    if sparse.issparse(A):
        C = A.tocoo()
        return C.row, C.col, C.data
    A = np.asarray(A, dtype=float)
    rows, cols = np.nonzero(A)
    return rows, cols, A[rows, cols]


def bandwidth(A) -> tuple[int, int]:
    """(lower, upper) bandwidth from the nonzero pattern (dense or sparse)."""
    rows, cols, _ = _coo(A)
    if rows.size == 0:
        return 0, 0
    off = cols - rows
    return int(max(0, -off.min())), int(max(0, off.max()))


def solve_linear(A, b, bands: tuple[int, int] | None = None) -> np.ndarray:
    """Solve ``A x = b`` by banded LU with partial pivoting (LAPACK gbsv).

    ``A`` may be dense or scipy-sparse. ``bands`` = (lower, upper)
    bandwidth, detected from the sparsity pattern when omitted. Raises
    ``numpy.linalg.LinAlgError`` on a singular pivot.
    """
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    rows, cols, vals = _coo(A)
    if n == 1:
        a = float(vals.sum()) if vals.size else 0.0
        if a == 0.0:
            raise np.linalg.LinAlgError("singular 1x1 system")
        return b / a
    lo, up = bands if bands is not None else bandwidth(A)
    ab = np.zeros((lo + up + 1, n))
    # duplicates (uncompressed COO) are summed
    np.add.at(ab, (up + rows - cols, cols), vals)
    return solve_banded((lo, up), ab, b, check_finite=False)


def step_residual(v, v_prev, dt, matrices: SystemMatrices, mesh, problem, k):
    """``dt``-scaled backward Euler residual."""
    return matrices.mass @ (v - v_prev) + dt * (
        matrices.stiffness @ v + assemble_nonlinear(v, mesh, problem, k) - matrices.load
    )


def backward_euler_step(
    u_prev: DgSolution,
    problem: ProblemSpec,
    dt: float,
    matrices: SystemMatrices,
    cfg: NewtonConfig = NewtonConfig(),
    initial_guess: np.ndarray | None = None,
) -> tuple[DgSolution, StepReport]:
    """One implicit step on ``u_prev.mesh``.

    Every iteration solves ``(M + dt (S + J_h)) delta = -R`` and backtracks on
    ``max|R|``. At least one update is always made. Raises
    :class:`NewtonError` on non-convergence.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    mesh, k = u_prev.mesh, u_prev.degree
    v_prev = u_prev.vector
    v = np.array(v_prev if initial_guess is None else initial_guess, dtype=float)
    nl = k + 1
    bands = (2 * nl - 1, 2 * nl - 1)
    base = matrices.mass + dt * matrices.stiffness

    def residual(w):
        return step_residual(w, v_prev, dt, matrices, mesh, problem, k)

    R = residual(v)
    rnorm = float(np.max(np.abs(R)))
    history = [rnorm]
    for it in range(1, cfg.max_iter + 1):
        jac = base + dt * assemble_nonlinear_jacobian(v, mesh, problem, k)
        delta = solve_linear(jac, -R, bands)
        lam = 1.0
        for _ in range(cfg.max_halvings + 1):
            v_try = v + lam * delta
            try:
                R_try = residual(v_try)
                r_try = float(np.max(np.abs(R_try)))
            except FloatingPointError:
                r_try = np.inf
            if r_try < rnorm or r_try <= cfg.tol_residual:
                break
            lam *= cfg.damping
        else:
            report = StepReport(it, rnorm, False, tuple(history))
            raise NewtonError(
                f"line search stalled at iteration {it}, residual {rnorm:.3e}", report
            )
        v, R, rnorm = v_try, R_try, r_try
        history.append(rnorm)
        if rnorm <= cfg.tol_residual:
            report = StepReport(it, rnorm, True, tuple(history))
            return DgSolution(mesh, k, v), report
    report = StepReport(cfg.max_iter, rnorm, False, tuple(history))
    raise NewtonError(
        f"no convergence in {cfg.max_iter} iterations, residual {rnorm:.3e}", report
    )
