"""Time loop for fixed and moving meshes, plus run diagnostics.

In moving mode every step performs, in order:

1. a provisional implicit solve on the current mesh,
2. trace-averaged nodal values of that provisional solution,
3. a (smoothed) monitor density from those values,
4. one mesh-equation step giving the new mesh,
5. nodal interpolation of the *previous* solution onto the new mesh,
6. the implicit solve on the new mesh, started from the interpolant.

Fixed mode does step 6 on the unchanged mesh only.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
import logging
import time
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .assembly import DEFAULT_SIGMA_SCALE, assemble_system, project_initial
from .dg_space import FINE_QUADRATURE, DgSolution, eval_basis, nodal_values
from .mesh import MeshError, uniform_mesh
from .mmpde import MmpdeConfig, advance_mesh, equidistribution_residual
from .monitor import MonitorKind, density, smooth_density
from .problems import ProblemSpec, get_problem
from .time_integrator import NewtonConfig, NewtonError, backward_euler_step
from .transfer import integral, interpolate_solution

__all__ = [
    "RunConfig",
    "RunRecord",
    "RunError",
    "run",
    "run_many",
    "l2_error",
    "energy",
    "front_location",
    "overshoot",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class RunError(RuntimeError):
    """A run aborted; ``step`` is the failing time-step index."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class RunConfig:
    problem: str = "schlogl"
    monitor: str = "optimal"
    degree: int = 2
    n_elements: int = 40
    dt: float = 1e-3
    t0: Optional[float] = None
    tf: Optional[float] = None
    tau: float = 0.1
    sigma_scale: float = DEFAULT_SIGMA_SCALE
    smooth_sweeps: int = 2
    mesh_mode: str = "moving"
    mmpde_sub_steps: int = 1
    printed_mmpde: bool = False
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    snapshots: tuple = ()
    label: str = ""

    def __post_init__(self):
        if self.mesh_mode not in ("fixed", "moving"):
            raise ValueError(f"mesh mode must be 'fixed' or 'moving', got {self.mesh_mode!r}")
        object.__setattr__(self, "monitor", MonitorKind.parse(self.monitor).value)
        object.__setattr__(self, "snapshots", tuple(float(s) for s in self.snapshots))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if list(self.snapshots) != sorted(set(self.snapshots)):
            raise ValueError("snapshot times must be strictly increasing")

    def make_problem(self) -> ProblemSpec:
        return get_problem(self.problem)

    def time_grid(self, problem: ProblemSpec | None = None):
        """(t0, tf, J) with J = round((tf - t0) / dt), checked to 1e-9."""
        problem = problem or self.make_problem()
        t0 = problem.t0 if self.t0 is None else self.t0
        tf = problem.tf if self.tf is None else self.tf
        if not tf > t0:
            raise ValueError(f"need tf > t0, got {t0}, {tf}")
        ratio = (tf - t0) / self.dt
        J = int(round(ratio))
        if J < 1 or abs(ratio - J) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"dt={self.dt} does not divide [{t0}, {tf}]")
        return t0, tf, J

    def snapshot_steps(self, problem: ProblemSpec | None = None) -> list[int]:
        t0, tf, J = self.time_grid(problem)
        dt = (tf - t0) / J
        steps = []
        for s in self.snapshots:
            j = (s - t0) / dt
            jr = int(round(j))
            if abs(j - jr) > 1e-6 or not 0 <= jr <= J:
                raise ValueError(f"snapshot time {s} is not on the time grid")
            steps.append(jr)
        return steps

    def as_dict(self) -> dict:
        d = asdict(self)
        d["newton"] = asdict(self.newton)
        return d


@dataclass
class RunRecord:
    config: RunConfig
    times: np.ndarray
    trajectory: np.ndarray  # (J+1, N_I+1)
    snapshots: list  # [(t, DgSolution)]
    errors: list  # [(t, l2 error)]
    energies: Optional[np.ndarray]  # (J+1,)
    newton_iterations: np.ndarray  # (J,) total over the step's solves
    newton_max: np.ndarray  # (J,) largest count of any single solve
    solves: np.ndarray  # (J,) physical solves per step
    equidistribution: np.ndarray  # (J,) nan in fixed mode
    mass_drift: np.ndarray  # (J,) zero in fixed mode
    value_range: np.ndarray  # (J+1, 2) min/max coefficient per step
    final: DgSolution
    wall_time: float = 0.0  # seconds spent in run()

    @property
    def n_steps(self) -> int:
        return self.times.size - 1


def l2_error(u: DgSolution, exact, t: float) -> float:
    """``||u_h - exact(., t)||_L2`` with a composite Gauss rule per element."""
    quad = FINE_QUADRATURE
    phi, _ = eval_basis(u.degree, quad.points)
    h = u.mesh.sizes
    xq = u.mesh.nodes[:-1, None] + h[:, None] * quad.points
    diff = u.coefficients @ phi.T - exact(xq, t)
    return float(np.sqrt(np.sum((diff**2 @ quad.weights) * h)))


def energy(u: DgSolution, problem: ProblemSpec) -> float:
    """``sum_e int (eps/2 u_x^2 + F(u)) dx`` with the element-wise gradient."""
    if problem.potential is None:
        raise ValueError(f"{problem.name} has no energy potential")
    quad = FINE_QUADRATURE
    phi, dphi = eval_basis(u.degree, quad.points)
    h = u.mesh.sizes
    uq = u.coefficients @ phi.T
    uxq = (u.coefficients @ dphi.T) / h[:, None]
    dens = 0.5 * problem.epsilon * uxq**2 + problem.potential(uq)
    return float(np.sum((dens @ quad.weights) * h))


def front_location(u: DgSolution, level: float = 0.5, samples: int = 64) -> Optional[float]:
    """Leftmost x where ``u_h`` crosses ``level``, or None.

    Sign changes are bracketed on a per-element sample grid and refined by
    Brent's method to 1e-12; a crossing that happens across a discontinuity
    is located at the node.
    """
    s = np.linspace(0.0, 1.0, samples + 1)
    phi, _ = eval_basis(u.degree, s)
    vals = u.coefficients @ phi.T - level  # (n_el, samples+1)
    x = u.mesh.nodes
    prev_right = None
    for e in range(u.mesh.n_elements):
        v = vals[e]
        if prev_right is not None and prev_right * v[0] < 0:
            return float(x[e])
        if v[0] == 0.0:
            return float(x[e])
        idx = np.nonzero(v[:-1] * v[1:] <= 0)[0]
        if idx.size:
            i = int(idx[0])
            ce = u.coefficients[e]

            def g(t):
                return float(eval_basis(u.degree, t)[0] @ ce) - level

            if v[i + 1] == 0.0:
                t = s[i + 1]
            else:
                t = brentq(g, s[i], s[i + 1], xtol=1e-14)
            return float(x[e] + t * (x[e + 1] - x[e]))
        prev_right = v[-1]
    return None


def overshoot(record: RunRecord, lower: float, upper: float) -> float:
    """Largest excursion of nodal coefficients outside [lower, upper]."""
    lo = record.value_range[:, 0]
    hi = record.value_range[:, 1]
    return float(max(0.0, np.max(lower - lo), np.max(hi - upper)))


def run(config: RunConfig, problem: ProblemSpec | None = None) -> RunRecord:
    start = time.perf_counter()
    problem = problem or config.make_problem()
    t0, tf, J = config.time_grid(problem)
    dt = (tf - t0) / J
    snap_steps = config.snapshot_steps(problem)
    k = config.degree
    moving = config.mesh_mode == "moving"
    mcfg = MmpdeConfig(config.tau, dt, config.mmpde_sub_steps, config.printed_mmpde)

    mesh = uniform_mesh(problem.x_left, problem.x_right, config.n_elements)
    u = project_initial(problem, mesh, k)

    times = t0 + dt * np.arange(J + 1)
    times[-1] = tf
    # requested snapshot times are stored as given, not as t0 + j dt
    times[snap_steps] = config.snapshots
    trajectory = np.empty((J + 1, config.n_elements + 1))
    trajectory[0] = mesh.nodes
    has_energy = problem.potential is not None
    energies = np.empty(J + 1) if has_energy else None
    if has_energy:
        energies[0] = energy(u, problem)
    newton_its = np.zeros(J, dtype=int)
    newton_max = np.zeros(J, dtype=int)
    solves = np.zeros(J, dtype=int)
    equi = np.full(J, np.nan)
    drift = np.zeros(J)
    vrange = np.empty((J + 1, 2))
    vrange[0] = u.coefficients.min(), u.coefficients.max()
    snapshots, errors = [], []

    def record_snapshot(j, sol):
        snapshots.append((times[j], sol))
        if problem.exact is not None:
            errors.append((times[j], l2_error(sol, problem.exact, times[j])))

    if 0 in snap_steps:
        record_snapshot(0, u)

    for j in range(1, J + 1):
        tj = times[j]
        try:
            if moving:
                mats = assemble_system(mesh, k, problem, tj, config.sigma_scale)
                u_tmp, rep_tmp = backward_euler_step(u, problem, dt, mats, config.newton)
                rho = density(config.monitor, nodal_values(u_tmp), mesh)
                rho = smooth_density(rho, config.smooth_sweeps)
                new_mesh = advance_mesh(mesh, rho, mcfg)
                u_start = interpolate_solution(u, new_mesh)
                drift[j - 1] = integral(u_start) - integral(u)
                equi[j - 1] = equidistribution_residual(new_mesh, rho)
                mesh = new_mesh
                mats = assemble_system(mesh, k, problem, tj, config.sigma_scale)
                u, rep = backward_euler_step(u_start, problem, dt, mats, config.newton)
                newton_its[j - 1] = rep_tmp.newton_iterations + rep.newton_iterations
                newton_max[j - 1] = max(rep_tmp.newton_iterations, rep.newton_iterations)
                solves[j - 1] = 2
            else:
                mats = assemble_system(mesh, k, problem, tj, config.sigma_scale)
                u, rep = backward_euler_step(u, problem, dt, mats, config.newton)
                newton_its[j - 1] = newton_max[j - 1] = rep.newton_iterations
                solves[j - 1] = 1
        except (NewtonError, MeshError, FloatingPointError) as exc:
            raise RunError(f"step {j} (t={tj:.6g}) failed: {exc}", step=j) from exc
        log.debug(
            "step %d t=%.6g solves=%d newton=%d", j, tj, solves[j - 1], newton_its[j - 1]
        )
        trajectory[j] = mesh.nodes
        vrange[j] = u.coefficients.min(), u.coefficients.max()
        if has_energy:
            energies[j] = energy(u, problem)
        if j in snap_steps:
            record_snapshot(j, u)

    return RunRecord(
        config=config,
        times=times,
        trajectory=trajectory,
        snapshots=snapshots,
        errors=errors,
        energies=energies,
        newton_iterations=newton_its,
        newton_max=newton_max,
        solves=solves,
        equidistribution=equi,
        mass_drift=drift,
        value_range=vrange,
        final=u,
        wall_time=time.perf_counter() - start,
    )


def run_many(configs, jobs: int = 1) -> list[RunRecord]:
    """Run independent configurations, optionally in worker processes."""
    configs = list(configs)
    if jobs <= 1 or len(configs) <= 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run, configs))
