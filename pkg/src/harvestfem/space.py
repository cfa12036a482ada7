"""Lagrange P1/P2 spaces on a :class:`~harvestfem.mesh.Mesh` and nodal fields."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .mesh import Mesh
from .quadrature import QuadratureRule

# Local P2 ordering: vertices 0, 1, 2 then midpoints of edges (0,1), (1,2), (2,0).
_P2_EDGES = ((0, 1), (1, 2), (2, 0))


def reference_basis(degree: int, bary: np.ndarray):
    """Tabulate basis functions at barycentric points.

    Returns ``(values, dlam)`` with shapes ``(nq, nloc)`` and ``(nq, nloc, 3)``,
    where ``dlam`` holds derivatives with respect to the three barycentric
    coordinates.
    """
    lam = np.atleast_2d(np.asarray(bary, dtype=float))
    nq = lam.shape[0]
    if degree == 1:
        return lam.copy(), np.broadcast_to(np.eye(3), (nq, 3, 3)).copy()
    if degree != 2:
        raise ConfigurationError(f"unsupported degree {degree}")
    values = np.empty((nq, 6))
    dlam = np.zeros((nq, 6, 3))
    for k in range(3):
        values[:, k] = lam[:, k] * (2 * lam[:, k] - 1)
        dlam[:, k, k] = 4 * lam[:, k] - 1
    for m, (a, b) in enumerate(_P2_EDGES, start=3):
        values[:, m] = 4 * lam[:, a] * lam[:, b]
        dlam[:, m, a] = 4 * lam[:, b]
        dlam[:, m, b] = 4 * lam[:, a]
    return values, dlam


@dataclass(eq=False)
class FESpace:
    """Continuous Lagrange space of degree 1 or 2.

    DOFs are the mesh vertices followed (for P2) by edge midpoints in the
    mesh's edge order.
    """

    mesh: Mesh
    degree: int
    dof_coords: np.ndarray = field(repr=False)
    cell_dofs: np.ndarray = field(repr=False)
    boundary_dofs: np.ndarray = field(repr=False)

    @property
    def n_dofs(self) -> int:
        return len(self.dof_coords)

    @property
    def n_local(self) -> int:
        return self.cell_dofs.shape[1]

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """Physical gradients of the three barycentric coordinates, ``(nt, 3, 2)``."""
        p = self.mesh.vertices[self.mesh.triangles]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns are edge vectors
        Jinv = np.linalg.inv(J)
        # lam1 = row 0 of J^-1 (x - p0), lam2 = row 1, lam0 = 1 - lam1 - lam2
        g1, g2 = Jinv[:, 0, :], Jinv[:, 1, :]
        return np.stack([-g1 - g2, g1, g2], axis=1)

    def interior_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.flatnonzero(mask)


def build_space(mesh: Mesh, degree: int) -> FESpace:
    if degree not in (1, 2):
        raise ConfigurationError(f"unsupported polynomial degree {degree}; use 1 or 2")
    if degree == 1:
        coords = mesh.vertices.copy()
        cell_dofs = mesh.triangles.copy()
    else:
        edges = mesh.edges
        mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
        coords = np.vstack([mesh.vertices, mids])
        cell_dofs = np.hstack([mesh.triangles, mesh.n_vertices + mesh.triangle_edges])
    boundary = np.flatnonzero(mesh.on_boundary(coords))
    return FESpace(mesh, degree, coords, cell_dofs, boundary)


def evaluate_basis(space: FESpace, triangle: int, point):
    """Basis values and physical gradients of one triangle's local functions."""
    lam = np.asarray(point, dtype=float).reshape(1, 3)
    values, dlam = reference_basis(space.degree, lam)
    grads = dlam[0] @ space.barycentric_gradients[triangle]
    return values[0], grads


def quadrature_points(space: FESpace, rule: QuadratureRule) -> np.ndarray:
    """Physical coordinates of every quadrature point, ``(nt, nq, 2)``."""
    p = space.mesh.vertices[space.mesh.triangles]
    return np.einsum("qk,tkd->tqd", rule.points, p)


@dataclass(eq=False)
class Field:
    """Coefficient vector of one species over an FE space."""

    space: FESpace
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.n_dofs,):
            raise ConfigurationError(
                f"field has {self.coefficients.shape} coefficients, space has {self.space.n_dofs} DOFs"
            )
        if not np.all(np.isfinite(self.coefficients)):
            raise ConfigurationError("field coefficients must be finite")

    @classmethod
    def interpolate(cls, space: FESpace, fn: Callable | float, t: float = 0.0) -> "Field":
        """Nodal interpolant of ``fn(t, x, y)`` (or of a constant)."""
        if callable(fn):
            x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
            vals = np.broadcast_to(np.asarray(fn(t, x, y), dtype=float), x.shape).copy()
        else:
            vals = np.full(space.n_dofs, float(fn))
        return cls(space, vals)
