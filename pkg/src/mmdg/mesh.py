"""One-dimensional physical and computational meshes.

A :class:`PhysicalMesh` is an immutable, strictly increasing set of node
coordinates with pinned endpoints. Every operation that moves nodes returns a
new mesh, and construction validates monotonicity and the element-size floor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MeshError",
    "PhysicalMesh",
    "uniform_mesh",
    "element_sizes",
    "computational_nodes",
    "size_floor",
    "locate_element",
]

# relative element-size floor: h_min = MIN_SIZE_FRACTION * (x_R - x_L) / N_I
MIN_SIZE_FRACTION = 1e-3


class MeshError(ValueError):
    """Raised for invalid (non-monotone, tangled or degenerate) meshes."""


def size_floor(x_left: float, x_right: float, n_elements: int) -> float:
    return MIN_SIZE_FRACTION * (x_right - x_left) / n_elements


@dataclass(frozen=True, eq=False)
class PhysicalMesh:
    """Node coordinates ``x_0 < x_1 < ... < x_{N_I}``.

    The endpoints define the domain ``[x_L, x_R]``; they are never moved by
    the mesh equation.
    """

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise MeshError("a mesh needs at least two elements")
        if not np.all(np.isfinite(nodes)):
            raise MeshError("mesh nodes must be finite")
        h = np.diff(nodes)
        if np.any(h <= 0.0):
            bad = int(np.argmin(h))
            raise MeshError(f"mesh nodes not strictly increasing at element {bad}")
        floor = size_floor(nodes[0], nodes[-1], nodes.size - 1)
        if h.min() < floor:
            raise MeshError(
                f"element size {h.min():.3e} below floor {floor:.3e}"
            )
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def x_left(self) -> float:
        return float(self.nodes[0])

    @property
    def x_right(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def h_min(self) -> float:
        return size_floor(self.x_left, self.x_right, self.n_elements)

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.nodes)

    def with_nodes(self, nodes) -> "PhysicalMesh":
        """New mesh over the same domain; raises :class:`MeshError` if the
        endpoints moved or the result is invalid."""
        nodes = np.asarray(nodes, dtype=float)
        if nodes.shape != self.nodes.shape:
            raise MeshError("node count cannot change")
        if nodes[0] != self.nodes[0] or nodes[-1] != self.nodes[-1]:
            raise MeshError("boundary nodes must stay fixed")
        return PhysicalMesh(nodes)

    def __repr__(self):
        return (
            f"PhysicalMesh(N_I={self.n_elements}, "
            f"[{self.x_left:g}, {self.x_right:g}])"
        )


def uniform_mesh(x_left: float, x_right: float, n_elements: int) -> PhysicalMesh:
    if not x_left < x_right:
        raise MeshError(f"need x_left < x_right, got {x_left}, {x_right}")
    if int(n_elements) != n_elements or n_elements < 2:
        raise MeshError(f"need at least 2 elements, got {n_elements}")
    n_elements = int(n_elements)
    nodes = x_left + np.arange(n_elements + 1) * ((x_right - x_left) / n_elements)
    # pin the right end exactly; the product above can miss it by an ulp
    nodes[-1] = x_right
    return PhysicalMesh(nodes)


def element_sizes(mesh: PhysicalMesh) -> np.ndarray:
    """Element lengths ``h_n = x_n - x_{n-1}``, n = 1..N_I."""
    return np.diff(mesh.nodes)


def computational_nodes(n_elements: int) -> np.ndarray:
    """Uniform computational coordinates ``xi_n = n / N_I`` on [0, 1]."""
    return np.arange(n_elements + 1) / n_elements


def locate_element(mesh: PhysicalMesh, x):
    """0-based index ``e`` of the element ``[x_e, x_{e+1}]`` containing x.

    A point sitting exactly on an interior node belongs to the element on its
    left; ``x_L`` maps to the first element. Accepts scalars or arrays.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs < mesh.x_left) or np.any(xs > mesh.x_right) or np.any(np.isnan(xs)):
        raise ValueError(f"point(s) outside [{mesh.x_left}, {mesh.x_right}]")
    idx = np.searchsorted(mesh.nodes, xs, side="left") - 1
    idx = np.clip(idx, 0, mesh.n_elements - 1)
    if idx.ndim == 0:
        return int(idx)
    return idx
