"""Moving mesh PDE ``x_t = (rho x_xi)_xi / (tau rho)`` on the computational
grid ``xi_n = n / N_I``, integrated by backward Euler with frozen density.
"""
from __future__ import annotations

from dataclasses import dataclass
import logging

import numpy as np
from scipy.linalg import solve_banded

from .mesh import MeshError, PhysicalMesh
from .monitor import NodalDensity, smooth_density

__all__ = [
    "MmpdeConfig",
    "MeshTanglingError",
    "mmpde_step",
    "advance_mesh",
    "equidistribution_residual",
]

log = logging.getLogger(__name__)


class MeshTanglingError(MeshError):
    """A mesh update crossed nodes or went below the element-size floor."""


@dataclass(frozen=True)
class MmpdeConfig:
    """``printed_formula`` switches the flux to the node *sums* that appear
    in one published form of the scheme; diagnostic only, it does not have
    the uniform mesh as a fixed point."""

    tau: float
    dt: float
    sub_steps: int = 1
    printed_formula: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.sub_steps < 1:
            raise ValueError("sub_steps must be at least 1")


def mmpde_step(mesh: PhysicalMesh, rho: NodalDensity, cfg: MmpdeConfig) -> PhysicalMesh:
    """Advance interior nodes over one time step of length ``cfg.dt``.

    Each of the ``cfg.sub_steps`` backward Euler sub-steps solves the
    tridiagonal system

        x_n - c_n [r_{n+1/2} (x_{n+1} - x_n) - r_{n-1/2} (x_n - x_{n-1})] = x_n^old

    with ``c_n = dts N_I^2 / (tau rho_n)`` and ``r_{n+1/2} = (rho_n + rho_{n+1})/2``.
    Raises :class:`MeshTanglingError` if the result is not a valid mesh.
    """
    r = np.asarray(rho.values, dtype=float)
    x = np.array(mesh.nodes, dtype=float)
    n_el = mesh.n_elements
    if r.shape != x.shape:
        raise ValueError("density and mesh sizes differ")
    if n_el < 2:
        return mesh
    dts = cfg.dt / cfg.sub_steps
    r_half = 0.5 * (r[1:] + r[:-1])  # r_{n+1/2}, n = 0..N_I-1
    c = dts * n_el**2 / (cfg.tau * r[1:-1])
    rp, rm = r_half[1:], r_half[:-1]  # right and left face of interior node
    sign = -1.0 if cfg.printed_formula else 1.0
    # interior unknowns x_1..x_{N_I-1}
    lower = -c * rm * sign
    upper = -c * rp
    diag = 1.0 + c * (rp + rm)
    if cfg.printed_formula:
        diag = 1.0 - c * (rp - rm)
    ab = np.zeros((3, n_el - 1))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    for _ in range(cfg.sub_steps):
        rhs = x[1:-1].copy()
        rhs[0] -= lower[0] * x[0]
        rhs[-1] -= upper[-1] * x[-1]
        x[1:-1] = solve_banded((1, 1), ab, rhs)
    try:
        return mesh.with_nodes(x)
    except MeshError as exc:
        raise MeshTanglingError(str(exc)) from None


def advance_mesh(
    mesh: PhysicalMesh, rho: NodalDensity, cfg: MmpdeConfig, extra_sweeps: int = 1
) -> PhysicalMesh:
    """:func:`mmpde_step`, retried once on a further-smoothed density."""
    try:
        return mmpde_step(mesh, rho, cfg)
    except MeshTanglingError as exc:
        log.warning("mesh update rejected (%s); retrying with smoother density", exc)
        return mmpde_step(mesh, smooth_density(rho, extra_sweeps), cfg)


def equidistribution_residual(mesh: PhysicalMesh, rho: NodalDensity) -> float:
    """``max |m_n - mean(m)| / mean(m)`` with ``m_n = (rho_{n-1}+rho_n) h_n / 2``."""
    r = np.asarray(rho.values, dtype=float)
    m = 0.5 * (r[1:] + r[:-1]) * mesh.sizes
    mean = m.mean()
    return float(np.max(np.abs(m - mean)) / mean)
