"""Mesh density (monitor) functions evaluated at mesh nodes."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .mesh import PhysicalMesh

__all__ = [
    "MonitorKind",
    "NodalDensity",
    "nodal_derivatives",
    "intensity_alpha",
    "density",
    "smooth_density",
]


class MonitorKind(str, Enum):
    OPTIMAL = "optimal"
    ARC_LENGTH = "arc-length"
    CURVATURE = "curvature"

    @classmethod
    def parse(cls, value) -> "MonitorKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        if key == "arclength":
            key = "arc-length"
        try:
            return cls(key)
        except ValueError:
            raise ValueError(
                f"unknown monitor {value!r}; choose from {[m.value for m in cls]}"
            ) from None


@dataclass(frozen=True, eq=False)
class NodalDensity:
    values: np.ndarray
    mesh: PhysicalMesh

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.mesh.nodes.shape:
            raise ValueError("one density value per mesh node expected")
        if not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def nodal_derivatives(values, mesh: PhysicalMesh):
    """Three-point first and second derivatives on a nonuniform mesh.

    Both stencils are exact for quadratics. The two boundary nodes copy the
    value from their interior neighbour.
    """
    u = np.asarray(values, dtype=float)
    x = mesh.nodes
    if u.shape != x.shape:
        raise ValueError("one value per mesh node expected")
    hl = x[1:-1] - x[:-2]  # h_n
    hr = x[2:] - x[1:-1]  # h_{n+1}
    ux = np.empty_like(u)
    uxx = np.empty_like(u)
    ux[1:-1] = (u[2:] - u[:-2]) / (hl + hr)
    uxx[1:-1] = 2.0 * (hl * u[2:] - (hl + hr) * u[1:-1] + hr * u[:-2]) / (hl * hr * (hl + hr))
    for d in (ux, uxx):
        d[0], d[-1] = d[1], d[-2]
    return ux, uxx


def intensity_alpha(uxx, mesh: PhysicalMesh) -> float:
    """``max(1, (mean of |u_xx|^(2/3))^3)``, mean by the trapezoidal rule."""
    g = np.abs(np.asarray(uxx, dtype=float)) ** (2.0 / 3.0)
    integral = np.sum(0.5 * (g[1:] + g[:-1]) * mesh.sizes)
    mean = integral / (mesh.x_right - mesh.x_left)
    return float(max(1.0, mean**3))


def density(kind, u_nodes, mesh: PhysicalMesh) -> NodalDensity:
    """Monitor values at the nodes from nodal solution values.

    optimal:    (1 + |u_xx|^2 / alpha)^(1/3)
    arc-length: (1 + |u_x|^2)^(1/2)
    curvature:  (1 + |u_xx|^2)^(1/4)
    """
    kind = MonitorKind.parse(kind)
    ux, uxx = nodal_derivatives(u_nodes, mesh)
    if kind is MonitorKind.OPTIMAL:
        alpha = intensity_alpha(uxx, mesh)
        rho = (1.0 + uxx**2 / alpha) ** (1.0 / 3.0)
    elif kind is MonitorKind.ARC_LENGTH:
        rho = np.sqrt(1.0 + ux**2)
    else:
        rho = (1.0 + uxx**2) ** 0.25
    return NodalDensity(rho, mesh)


def smooth_density(rho: NodalDensity, sweeps: int = 2, center_weight: float = 2.0) -> NodalDensity:
    """Weighted-average smoothing, ``(r[n-1] + w r[n] + r[n+1]) / (w + 2)``.

    At the ends the missing neighbour is replaced by the node itself, giving
    ``((w+1) r[0] + r[1]) / (w + 2)``. Each sweep is a convex combination,
    so bounds and constants are preserved.
    """
    if sweeps < 0:
        raise ValueError("sweeps must be non-negative")
    w = float(center_weight)
    r = np.array(rho.values, dtype=float)
    for _ in range(int(sweeps)):
        padded = np.concatenate(([r[0]], r, [r[-1]]))
        r = (padded[:-2] + w * padded[1:-1] + padded[2:]) / (w + 2.0)
    return NodalDensity(r, rho.mesh)
