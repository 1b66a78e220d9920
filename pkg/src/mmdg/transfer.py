"""Move a dG solution between meshes by nodal interpolation."""
from __future__ import annotations

import numpy as np

from .dg_space import FINE_QUADRATURE, DgSolution, eval_basis, evaluate
from .mesh import PhysicalMesh, locate_element

__all__ = ["locate_element", "interpolate_solution", "integral"]


def interpolate_solution(u_old: DgSolution, mesh_new: PhysicalMesh) -> DgSolution:
    """Sample ``u_old`` at the equispaced Lagrange points of every new element.

    A point lying strictly inside an old element takes that element's
    polynomial value; a point that hits an old interior node takes the trace
    average there.
    """
    old = u_old.mesh
    if mesh_new.x_left != old.x_left or mesh_new.x_right != old.x_right:
        raise ValueError("meshes cover different domains")
    target = DgSolution(mesh_new, u_old.degree, np.zeros(u_old.n_dofs))
    values = evaluate(u_old, target.nodal_points())
    return DgSolution(mesh_new, u_old.degree, values)


def integral(u: DgSolution) -> float:
    """``int u_h dx`` over the domain."""
    phi, _ = eval_basis(u.degree, FINE_QUADRATURE.points)
    per_element = (u.coefficients @ phi.T) @ FINE_QUADRATURE.weights
    return float(per_element @ u.mesh.sizes)
