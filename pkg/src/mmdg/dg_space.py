"""Discontinuous piecewise-polynomial space with a Lagrange nodal basis.

Each element carries ``k+1`` coefficients, the values of the local polynomial
at equally spaced points (endpoints included). So the first and last
coefficient of an element are its left and right traces.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from .mesh import PhysicalMesh, locate_element

__all__ = [
    "MAX_DEGREE",
    "QuadratureRule",
    "gauss_legendre",
    "composite_gauss",
    "FINE_QUADRATURE",
    "default_quadrature",
    "ReferenceElement",
    "reference_element",
    "lagrange_nodes",
    "eval_basis",
    "DgSolution",
    "interpolate_function",
    "trace_values",
    "jump",
    "average",
    "nodal_value",
    "nodal_values",
    "evaluate",
]

MAX_DEGREE = 4


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Points and weights on the reference interval [0, 1]; weights sum to 1."""

    points: np.ndarray
    weights: np.ndarray
    exactness: int  # highest polynomial degree integrated exactly


def gauss_legendre(n_points: int) -> QuadratureRule:
    t, w = np.polynomial.legendre.leggauss(n_points)
    return QuadratureRule(0.5 * (t + 1.0), 0.5 * w, 2 * n_points - 1)


def composite_gauss(n_sub: int, n_points: int) -> QuadratureRule:
    """Gauss-Legendre on ``n_sub`` equal pieces of [0, 1]; for integrands
    with sharp layers inside an element (error norms, projections)."""
    base = gauss_legendre(n_points)
    left = np.arange(n_sub)[:, None] / n_sub
    pts = (left + base.points / n_sub).ravel()
    wts = np.tile(base.weights / n_sub, n_sub)
    return QuadratureRule(pts, wts, base.exactness)


# accurate reference rule for norms and projections of steep data
FINE_QUADRATURE = composite_gauss(16, 6)


def default_quadrature(k: int) -> QuadratureRule:
    # ceil((3k+2)/2) points: exact up to degree 3k+1
    return gauss_legendre(math.ceil((3 * k + 2) / 2))


def _check_degree(k):
    if int(k) != k or k < 1 or k > MAX_DEGREE:
        raise ValueError(f"degree must be an integer in 1..{MAX_DEGREE}, got {k}")
    return int(k)


@lru_cache(maxsize=None)
def _cardinal_coefficients(k: int) -> np.ndarray:
    # column d holds monomial coefficients of the d-th cardinal polynomial
    t = np.linspace(0.0, 1.0, k + 1)
    return np.linalg.inv(np.vander(t, k + 1, increasing=True))


def eval_basis(k: int, t):
    """Cardinal Lagrange polynomials on ``k+1`` equispaced nodes of [0, 1].

    Returns ``(values, derivatives)``, derivatives taken with respect to the
    reference coordinate. For scalar ``t`` both are 1-D of length ``k+1``;
    for an array of points the shape is ``(len(t), k+1)``.
    """
    k = _check_degree(k)
    ts = np.asarray(t, dtype=float)
    coeffs = _cardinal_coefficients(k)
    powers = np.arange(k + 1)
    tt = ts[..., None]
    mono = tt ** powers
    dmono = np.zeros_like(mono)
    dmono[..., 1:] = powers[1:] * tt ** (powers[1:] - 1)
    return mono @ coeffs, dmono @ coeffs


def lagrange_nodes(k: int, a: float, b: float) -> np.ndarray:
    """Equispaced nodal points ``a + d (b - a) / k``, d = 0..k."""
    k = _check_degree(k)
    if not a < b:
        raise ValueError(f"empty element [{a}, {b}]")
    nodes = a + np.arange(k + 1) * ((b - a) / k)
    nodes[-1] = b
    return nodes


class ReferenceElement:
    """Basis tables on [0, 1] shared by every element of degree ``k``."""

    def __init__(self, k: int, quadrature: QuadratureRule | None = None):
        self.k = _check_degree(k)
        self.n_local = self.k + 1
        self.quadrature = quadrature or default_quadrature(self.k)
        q = self.quadrature
        self.phi, self.dphi = eval_basis(self.k, q.points)  # (n_q, n_local)
        self.phi_left, self.dphi_left = eval_basis(self.k, 0.0)
        self.phi_right, self.dphi_right = eval_basis(self.k, 1.0)
        # reference mass and stiffness: int phi_i phi_j, int phi_i' phi_j'
        self.mass = (self.phi * q.weights[:, None]).T @ self.phi
        self.stiffness = (self.dphi * q.weights[:, None]).T @ self.dphi


@lru_cache(maxsize=None)
def reference_element(k: int) -> ReferenceElement:
    return ReferenceElement(k)


@dataclass(frozen=True, eq=False)
class DgSolution:
    """Coefficients ``(N_I, k+1)`` of a broken polynomial on ``mesh``."""

    mesh: PhysicalMesh
    degree: int
    coefficients: np.ndarray

    def __post_init__(self):
        k = _check_degree(self.degree)
        c = np.array(self.coefficients, dtype=float)
        n_el = self.mesh.n_elements
        if c.size != n_el * (k + 1):
            raise ValueError(
                f"expected {n_el * (k + 1)} coefficients, got {c.size}"
            )
        c = c.reshape(n_el, k + 1)
        c.setflags(write=False)
        object.__setattr__(self, "degree", k)
        object.__setattr__(self, "coefficients", c)

    @property
    def vector(self) -> np.ndarray:
        """Flat coefficient vector, element blocks in order."""
        return self.coefficients.reshape(-1)

    @property
    def n_dofs(self) -> int:
        return self.coefficients.size

    def nodal_points(self) -> np.ndarray:
        """Physical location of every coefficient, shape ``(N_I, k+1)``."""
        x = self.mesh.nodes
        s = np.arange(self.degree + 1) / self.degree
        pts = x[:-1, None] + (x[1:] - x[:-1])[:, None] * s
        pts[:, -1] = x[1:]
        return pts


def interpolate_function(g, mesh: PhysicalMesh, k: int) -> DgSolution:
    """Nodal interpolant of a vectorised callable ``g(x)``."""
    sol = DgSolution(mesh, k, np.zeros(mesh.n_elements * (k + 1)))
    return DgSolution(mesh, k, np.asarray(g(sol.nodal_points()), dtype=float))


def trace_values(u: DgSolution, n: int) -> tuple[float, float]:
    """One-sided limits ``(u(x_n^-), u(x_n^+))`` at an interior node."""
    if not 1 <= n <= u.mesh.n_elements - 1:
        raise ValueError(f"node {n} is not an interior node")
    c = u.coefficients
    return float(c[n - 1, -1]), float(c[n, 0])


def _traces(u: DgSolution, n: int):
    n_el = u.mesh.n_elements
    if not 0 <= n <= n_el:
        raise ValueError(f"node index {n} out of range 0..{n_el}")
    c = u.coefficients
    minus = c[n - 1, -1] if n > 0 else None
    plus = c[n, 0] if n < n_el else None
    return minus, plus


def jump(u: DgSolution, n: int) -> float:
    """``u(x_n^-) - u(x_n^+)``; the missing trace counts as zero at the
    boundary, giving ``-u(x_0^+)`` and ``u(x_N^-)``."""
    minus, plus = _traces(u, n)
    return float((minus or 0.0) - (plus or 0.0))


def average(u: DgSolution, n: int) -> float:
    minus, plus = _traces(u, n)
    if minus is None:
        return float(plus)
    if plus is None:
        return float(minus)
    return 0.5 * float(minus + plus)


# The value of u_h at a mesh node is the trace average; the boundary has only
# one trace.
nodal_value = average


def nodal_values(u: DgSolution) -> np.ndarray:
    """Trace-averaged values at all mesh nodes ``x_0..x_{N_I}``."""
    c = u.coefficients
    vals = np.empty(u.mesh.n_elements + 1)
    vals[0] = c[0, 0]
    vals[-1] = c[-1, -1]
    vals[1:-1] = 0.5 * (c[:-1, -1] + c[1:, 0])
    return vals


def evaluate(u: DgSolution, x):
    """Point values of ``u``; interior mesh nodes get the trace average."""
    mesh = u.mesh
    xs = np.asarray(x, dtype=float)
    flat = np.atleast_1d(xs).ravel()
    elem = np.atleast_1d(locate_element(mesh, flat))
    nodes = mesh.nodes
    t = (flat - nodes[elem]) / (nodes[elem + 1] - nodes[elem])
    phi, _ = eval_basis(u.degree, t)
    out = np.einsum("pi,pi->p", phi, u.coefficients[elem])
    # points exactly on an interior node take the trace average
    on_node = (flat == nodes[elem + 1]) & (elem + 1 < mesh.n_elements)
    if np.any(on_node):
        e = elem[on_node]
        out[on_node] = 0.5 * (u.coefficients[e, -1] + u.coefficients[e + 1, 0])
    if xs.ndim == 0:
        return float(out[0])
    return out.reshape(xs.shape)
