"""SIPG matrices, load vector and nonlinear term on a (nonuniform) mesh.

Global unknowns are ordered element by element, ``k+1`` per element, so the
mass matrix is block diagonal and the stiffness matrix block tridiagonal.

Face terms use the jump ``[v] = v^- - v^+`` and average ``{v}`` with the
one-sided conventions ``[v(x_0)] = -v(x_0^+)`` and ``[v(x_N)] = v(x_N^-)``.
The penalty at a node is ``sigma / h_loc``: ``h_loc`` is the mean of the two
adjacent element sizes, or the single adjacent size on the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
import warnings

import numpy as np
from scipy import sparse

from .dg_space import FINE_QUADRATURE, DgSolution, eval_basis, reference_element
from .mesh import PhysicalMesh
from .problems import ProblemSpec

__all__ = [
    "SystemMatrices",
    "penalty_parameter",
    "face_lengths",
    "assemble_mass",
    "assemble_stiffness_sipg",
    "assemble_load",
    "assemble_nonlinear",
    "assemble_nonlinear_jacobian",
    "assemble_system",
    "project_initial",
    "NonFiniteError",
]

DEFAULT_SIGMA_SCALE = 10.0


class NonFiniteError(FloatingPointError):
    """The nonlinearity produced NaN or inf at a quadrature point."""


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """Sparse (CSR) mass and stiffness matrices and the load vector."""

    mass: sparse.csr_matrix
    stiffness: sparse.csr_matrix
    load: np.ndarray


def penalty_parameter(epsilon: float, k: int, sigma_scale: float = DEFAULT_SIGMA_SCALE):
    """``sigma = C_sigma (k+1)^2 max(eps, 1)``.

    The penalty is not allowed to shrink with the diffusion coefficient: the
    convective term carries no face flux of its own, so for small ``eps`` the
    jump penalty is what keeps neighbouring elements coupled.
    """
    return sigma_scale * (k + 1) ** 2 * max(epsilon, 1.0)


def face_lengths(mesh: PhysicalMesh) -> np.ndarray:
    h = mesh.sizes
    hf = np.empty(h.size + 1)
    hf[0], hf[-1] = h[0], h[-1]
    hf[1:-1] = 0.5 * (h[:-1] + h[1:])
    return hf


def _block_diagonal(blocks: np.ndarray) -> sparse.csr_matrix:
    n_el, nl, _ = blocks.shape
    base = np.arange(n_el)[:, None, None] * nl
    rows = base + np.arange(nl)[None, :, None]
    cols = base + np.arange(nl)[None, None, :]
    rows, cols = np.broadcast_arrays(rows, cols)
    N = n_el * nl
    return sparse.csr_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(N, N))


def assemble_mass(mesh: PhysicalMesh, k: int) -> sparse.csr_matrix:
    ref = reference_element(k)
    return _block_diagonal(mesh.sizes[:, None, None] * ref.mass)


def _face_data(mesh: PhysicalMesh, k: int, epsilon: float):
    """Per node, over the ``2(k+1)`` dofs of the two adjacent elements:
    dof indices, jump weights and ``eps``-weighted derivative averages.

    Boundary nodes get zero weights on the missing side (index clipped).
    """
    ref = reference_element(k)
    h = mesh.sizes
    nl = ref.n_local
    n_el = h.size
    n = np.arange(n_el + 1)
    left = np.clip(n - 1, 0, n_el - 1)
    right = np.clip(n, 0, n_el - 1)
    has_left = (n > 0).astype(float)
    has_right = (n < n_el).astype(float)
    half = np.where((n > 0) & (n < n_el), 0.5, 1.0)
    local = np.arange(nl)
    dofs = np.concatenate([left[:, None] * nl + local, right[:, None] * nl + local], axis=1)
    jmp = np.concatenate(
        [has_left[:, None] * ref.phi_right, -has_right[:, None] * ref.phi_left], axis=1
    )
    avg = np.concatenate(
        [
            (has_left * half * epsilon / h[left])[:, None] * ref.dphi_right,
            (has_right * half * epsilon / h[right])[:, None] * ref.dphi_left,
        ],
        axis=1,
    )
    return dofs, jmp, avg


def assemble_stiffness_sipg(
    mesh: PhysicalMesh, k: int, epsilon: float, sigma: float, check: bool = False
) -> sparse.csr_matrix:
    """Matrix of the symmetric interior penalty form

    ``a(u, v) = sum_e int eps u' v' + sum_n (-{eps u'}[v] - {eps v'}[u]
    + sigma/h_loc [u][v])``, row index = test function.

    With ``check=True`` a few random quadratic forms are probed and a
    ``RuntimeWarning`` is issued if any is negative (sigma too small).
    """
    ref = reference_element(k)
    h = mesh.sizes
    N = h.size * ref.n_local
    volume = _block_diagonal((epsilon / h)[:, None, None] * ref.stiffness)
    dofs, jmp, avg = _face_data(mesh, k, epsilon)
    pen = (sigma / face_lengths(mesh))[:, None, None]
    blocks = (
        -jmp[:, :, None] * avg[:, None, :]
        - avg[:, :, None] * jmp[:, None, :]
        + pen * jmp[:, :, None] * jmp[:, None, :]
    )
    rows = np.broadcast_to(dofs[:, :, None], blocks.shape)
    cols = np.broadcast_to(dofs[:, None, :], blocks.shape)
    faces = sparse.csr_matrix(
        (blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(N, N)
    )
    S = (volume + faces).tocsr()
    if check:
        rng = np.random.default_rng(0)
        probes = rng.standard_normal((N, 8))
        q = np.einsum("ip,ip->p", probes, S @ probes)
        if np.min(q) < -1e-10 * abs(S).max() * N:
            warnings.warn(
                f"SIPG form not coercive (min probe {np.min(q):.3e}); increase sigma",
                RuntimeWarning,
                stacklevel=2,
            )
    return S


def assemble_load(
    mesh: PhysicalMesh, k: int, epsilon: float, sigma: float, u_left: float, u_right: float
) -> np.ndarray:
    """Boundary contribution of the Dirichlet data.

    ``l(v) = u_L (eps v'(x_0) + sigma/h v(x_0)) + u_R (sigma/h v(x_N) - eps v'(x_N))``,
    i.e. the boundary face terms of ``a`` with the exterior trace replaced by
    the data, so that constants compatible with the data are reproduced.
    """
    ref = reference_element(k)
    h = mesh.sizes
    nl = ref.n_local
    hf = face_lengths(mesh)
    d = np.zeros(h.size * nl)
    d[:nl] += u_left * (epsilon * ref.dphi_left / h[0] + (sigma / hf[0]) * ref.phi_left)
    d[-nl:] += u_right * (
        (sigma / hf[-1]) * ref.phi_right - epsilon * ref.dphi_right / h[-1]
    )
    return d


def _quadrature_state(coeffs, mesh: PhysicalMesh, k: int):
    ref = reference_element(k)
    h = mesh.sizes
    c = np.asarray(coeffs, dtype=float).reshape(h.size, ref.n_local)
    u = c @ ref.phi.T  # (n_el, n_q)
    ux = (c @ ref.dphi.T) / h[:, None]
    return ref, h, u, ux


def assemble_nonlinear(coeffs, mesh: PhysicalMesh, problem: ProblemSpec, k: int) -> np.ndarray:
    """``h_(e,i) = int_{I_e} f(u_h, u_h') phi_i dx`` by element quadrature."""
    ref, h, u, ux = _quadrature_state(coeffs, mesh, k)
    fq = problem.f(u, ux)
    if not np.all(np.isfinite(fq)):
        raise NonFiniteError(f"{problem.name}: non-finite nonlinearity")
    w = ref.quadrature.weights
    return ((fq * w) @ ref.phi * h[:, None]).reshape(-1)


def assemble_nonlinear_jacobian(
    coeffs, mesh: PhysicalMesh, problem: ProblemSpec, k: int
) -> sparse.csr_matrix:
    """Block-diagonal derivative of :func:`assemble_nonlinear`."""
    ref, h, u, ux = _quadrature_state(coeffs, mesh, k)
    fu = np.broadcast_to(problem.df_du(u, ux), u.shape)
    fp = np.broadcast_to(problem.df_dux(u, ux), u.shape)
    w = ref.quadrature.weights
    # blocks[e, i, j] = h_e sum_q w_q phi_i (fu phi_j + fp phi_j' / h_e)
    wphi = ref.phi * w[:, None]
    blocks = np.einsum("qi,eq,qj->eij", wphi, fu, ref.phi) * h[:, None, None]
    blocks += np.einsum("qi,eq,qj->eij", wphi, fp, ref.dphi)
    return _block_diagonal(blocks)


def assemble_system(
    mesh: PhysicalMesh,
    k: int,
    problem: ProblemSpec,
    t: float,
    sigma_scale: float = DEFAULT_SIGMA_SCALE,
) -> SystemMatrices:
    """Mass, stiffness and load at time ``t`` (boundary data evaluated at t)."""
    sigma = penalty_parameter(problem.epsilon, k, sigma_scale)
    return SystemMatrices(
        mass=assemble_mass(mesh, k),
        stiffness=assemble_stiffness_sipg(mesh, k, problem.epsilon, sigma),
        load=assemble_load(
            mesh, k, problem.epsilon, sigma,
            float(problem.u_left(t)), float(problem.u_right(t)),
        ),
    )


def project_initial(problem: ProblemSpec, mesh: PhysicalMesh, k: int, u0=None) -> DgSolution:
    """L2 projection of the initial data (``problem.u0`` unless ``u0`` given).

    The mass matrix is block diagonal, so each element is solved on its own.
    Moments use a composite rule so steep initial fronts are integrated
    accurately.
    """
    u0 = problem.u0 if u0 is None else u0
    ref = reference_element(k)
    quad = FINE_QUADRATURE
    phi, _ = eval_basis(k, quad.points)
    h = mesh.sizes
    xq = mesh.nodes[:-1, None] + h[:, None] * quad.points
    moments = (u0(xq) * quad.weights) @ phi
    # h cancels: (h M_ref) c = h moments
    coeffs = np.linalg.solve(ref.mass, moments.T).T
    return DgSolution(mesh, k, coeffs)
