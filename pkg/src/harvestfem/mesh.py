"""Structured triangulations of axis-aligned rectangles."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform triangulation of ``[x0, x1] x [y0, y1]``.

    Every grid cell is cut along its lower-left to upper-right diagonal.
    Vertices are numbered lexicographically (``i + j*(nx+1)``), triangles
    cell by cell with the lower triangle first.
    """

    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int
    vertices: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def h(self) -> float:
        """Largest triangle diameter."""
        p = self.vertices[self.triangles]
        lengths = [np.linalg.norm(p[:, a] - p[:, b], axis=1) for a, b in ((0, 1), (1, 2), (2, 0))]
        return float(np.max(lengths))

    @cached_property
    def _edge_data(self):
        local = self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 3, 2)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
        return edges, inverse.reshape(-1, 3), counts

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs, in lexicographic order."""
        return self._edge_data[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        """Per-triangle edge indices for local edges (0,1), (1,2), (2,0)."""
        return self._edge_data[1]

    @property
    def edge_triangle_count(self) -> np.ndarray:
        return self._edge_data[2]

    @property
    def boundary_edges(self) -> np.ndarray:
        """Boolean flag per edge: True when the edge lies on the boundary."""
        return self.edge_triangle_count == 1

    def on_boundary(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        scale = max(abs(self.x1 - self.x0), abs(self.y1 - self.y0))
        tol = tol * scale
        return (
            (np.abs(x - self.x0) <= tol)
            | (np.abs(x - self.x1) <= tol)
            | (np.abs(y - self.y0) <= tol)
            | (np.abs(y - self.y1) <= tol)
        )


def build_mesh(x0: float, x1: float, y0: float, y1: float, nx: int, ny: int) -> Mesh:
    """Triangulate a rectangle with ``nx * ny`` cells, two triangles each."""
    if not (np.isfinite([x0, x1, y0, y1]).all() and x1 > x0 and y1 > y0):
        raise ConfigurationError(f"invalid rectangle [{x0}, {x1}] x [{y0}, {y1}]")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ConfigurationError(f"cell counts must be positive integers, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    v00 = i + j * (nx + 1)
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    return Mesh(float(x0), float(x1), float(y0), float(y1), nx, ny, vertices, triangles)


def unit_square(n: int) -> Mesh:
    return build_mesh(0.0, 1.0, 0.0, 1.0, n, n)
