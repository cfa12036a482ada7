"""Sparse assembly of the bilinear and linear forms of the discrete schemes.

Row index ``a`` is the test function, column index ``b`` the trial function.
All matrices come back as ``scipy.sparse.csr_matrix`` with sorted, unique
column indices and a sparsity pattern shared by every form on a space.
"""
from __future__ import annotations

import weakref

import numpy as np
import scipy.sparse as sp

from .functions import as_function
from .quadrature import quadrature
from .space import Field, FESpace, quadrature_points, reference_basis

DEFAULT_ORDER = 6


class Assembler:
    """Precomputed geometry, basis tabulations and CSR pattern for one space."""

    def __init__(self, space: FESpace, order: int = DEFAULT_ORDER):
        self.space = space
        self.rule = quadrature(order)
        self.phi, dlam = reference_basis(space.degree, self.rule.points)  # (nq, nloc)
        self.grads = np.einsum("qlk,tkd->tqld", dlam, space.barycentric_gradients)
        area = space.mesh.signed_areas
        self.wdet = area[:, None] * self.rule.weights[None, :]  # (nt, nq)
        self.points = quadrature_points(space, self.rule)
        nq, nloc = self.phi.shape
        self._phiphi = np.einsum("qa,qb->qab", self.phi, self.phi).reshape(nq, nloc * nloc)
        self._build_pattern()

    def _build_pattern(self):
        dofs = self.space.cell_dofs
        nt, nloc = dofs.shape
        n = self.space.n_dofs
        rows = np.broadcast_to(dofs[:, :, None], (nt, nloc, nloc)).ravel()
        cols = np.broadcast_to(dofs[:, None, :], (nt, nloc, nloc)).ravel()
        keys, self._scatter = np.unique(rows.astype(np.int64) * n + cols, return_inverse=True)
        self._scatter = self._scatter.ravel()
        r = keys // n
        self._indices = (keys % n).astype(np.int32)
        self._indptr = np.concatenate([[0], np.cumsum(np.bincount(r, minlength=n))]).astype(np.int32)
        self.nnz = len(keys)

    # -- helpers ---------------------------------------------------------------

    def _to_csr(self, local: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self._scatter, weights=local.ravel(), minlength=self.nnz)
        n = self.space.n_dofs
        return sp.csr_matrix((data, self._indices.copy(), self._indptr.copy()), shape=(n, n))

    def _to_vector(self, local: np.ndarray) -> np.ndarray:
        return np.bincount(self.space.cell_dofs.ravel(), weights=local.ravel(), minlength=self.space.n_dofs)

    def eval_function(self, fn, t) -> np.ndarray:
        fn = as_function(fn)
        return fn(t, self.points[..., 0], self.points[..., 1])

    def eval_field(self, coefficients) -> np.ndarray:
        """Values of an FE coefficient vector at quadrature points, ``(nt, nq)``."""
        coefficients = getattr(coefficients, "coefficients", coefficients)
        return np.asarray(coefficients)[self.space.cell_dofs] @ self.phi.T

    def eval_field_gradient(self, coefficients) -> np.ndarray:
        coefficients = getattr(coefficients, "coefficients", coefficients)
        local = np.asarray(coefficients)[self.space.cell_dofs]
        return np.einsum("ta,tqad->tqd", local, self.grads)

    def weights_at_quadrature(self, w, t) -> np.ndarray:
        if isinstance(w, Field):
            return self.eval_field(w)
        if isinstance(w, np.ndarray) and w.shape == self.wdet.shape:
            return w
        return np.broadcast_to(self.eval_function(w, t), self.wdet.shape)

    # -- forms -----------------------------------------------------------------

    def weighted_mass(self, w=1.0, t: float = 0.0) -> sp.csr_matrix:
        wq = self.wdet * self.weights_at_quadrature(w, t)
        return self._to_csr(wq @ self._phiphi)

    def mass(self) -> sp.csr_matrix:
        return self._to_csr(self.wdet @ self._phiphi)

    def stiffness(self) -> sp.csr_matrix:
        local = np.einsum("tq,tqad,tqbd->tab", self.wdet, self.grads, self.grads, optimize=True)
        return self._to_csr(local)

    def advection(self, K, t: float) -> sp.csr_matrix:
        K = as_function(K)
        gx, gy = K.gradient(t, self.points[..., 0], self.points[..., 1])
        proj = self.grads[..., 0] * np.asarray(gx)[..., None] + self.grads[..., 1] * np.asarray(gy)[..., None]
        local = np.matmul((self.wdet[..., None] * proj).transpose(0, 2, 1), self.phi)
        return self._to_csr(local)

    def load(self, f, t: float) -> np.ndarray:
        fq = self.weights_at_quadrature(f, t)
        return self._to_vector((self.wdet * fq) @ self.phi)


_CACHE: "weakref.WeakKeyDictionary[FESpace, Assembler]" = weakref.WeakKeyDictionary()


def get_assembler(space: FESpace) -> Assembler:
    asm = _CACHE.get(space)
    if asm is None:
        asm = _CACHE[space] = Assembler(space)
    return asm


def assemble_mass(space: FESpace) -> sp.csr_matrix:
    return get_assembler(space).mass()


def assemble_stiffness(space: FESpace) -> sp.csr_matrix:
    return get_assembler(space).stiffness()


def assemble_advection(space: FESpace, K, t: float) -> sp.csr_matrix:
    """``A[a, b] = (phi_b grad K(t), grad phi_a)``, not scaled by the advection rate."""
    return get_assembler(space).advection(K, t)


def assemble_weighted_mass(space: FESpace, w, t: float = 0.0) -> sp.csr_matrix:
    """``W[a, b] = (w phi_b, phi_a)`` for a function, Field or quadrature-point array ``w``."""
    return get_assembler(space).weighted_mass(w, t)


def assemble_load(space: FESpace, f, t: float) -> np.ndarray:
    return get_assembler(space).load(f, t)


def apply_dirichlet(matrix, rhs, space: FESpace, g, t: float):
    """Impose ``u = g(t)`` at boundary DOFs by row replacement.

    Interior couplings to boundary DOFs are moved to the right-hand side, so
    the returned matrix is block diagonal in (interior, boundary).
    """
    bd = space.boundary_dofs
    n = space.n_dofs
    g = as_function(g)
    xy = space.dof_coords[bd]
    gb = np.asarray(g(t, xy[:, 0], xy[:, 1]), dtype=float)

    full = np.zeros(n)
    full[bd] = gb
    A = sp.csr_matrix(matrix, copy=True)
    b = np.asarray(rhs, dtype=float) - A @ full

    keep = np.ones(n)
    keep[bd] = 0.0
    D = sp.diags(keep)
    A = (D @ A @ D + sp.diags(1.0 - keep)).tocsr()
    A.sort_indices()
    b[bd] = gb
    return A, b
