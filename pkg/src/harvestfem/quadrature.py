"""Quadrature rules on the reference triangle in barycentric form.

Weights are normalised to sum to one, so an integral over a physical
triangle is ``area * sum(w * f(points))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np
from scipy.special import roots_jacobi

from .errors import ConfigurationError

MAX_ORDER = 20


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray  # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,)
    degree: int

    def __len__(self):
        return len(self.weights)


def _orbit(*coords):
    return sorted(set(permutations(coords)))


def _symmetric_rule(groups, degree):
    pts, wts = [], []
    for coords, w in groups:
        for p in _orbit(*coords):
            pts.append(p)
            wts.append(w)
    return QuadratureRule(np.array(pts, dtype=float), np.array(wts, dtype=float), degree)


def _dunavant6():
    a = 0.063089014491502228340331602870819
    b = 0.24928674517091042129163855310702
    c1 = 0.053145049844816947353249671631398
    c2 = 0.31035245103378440541660773395655
    return _symmetric_rule(
        [
            ((1 - 2 * a, a, a), 0.050844906370206816920936809106869),
            ((1 - 2 * b, b, b), 0.11678627572637936602528961138558),
            ((1 - c1 - c2, c1, c2), 0.082851075618373575193553456420442),
        ],
        6,
    )


def _collapsed_gauss(degree):
    # Duffy map of the square: x = u, y = v(1 - u); Jacobi weight absorbs (1 - u).
    n = degree // 2 + 1
    xi, wxi = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (1.0 + xi)
    wu = wxi / 4.0
    eta, weta = np.polynomial.legendre.leggauss(n)
    v = 0.5 * (1.0 + eta)
    wv = weta / 2.0
    U, V = np.meshgrid(u, v, indexing="ij")
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    w = np.outer(wu, wv).ravel() * 2.0
    pts = np.column_stack([1.0 - x - y, x, y])
    return QuadratureRule(pts, w / w.sum(), degree)


@lru_cache(maxsize=None)
def quadrature(order: int = 6) -> QuadratureRule:
    """Return a rule integrating all polynomials of total degree ``order`` exactly."""
    if int(order) != order or order < 1 or order > MAX_ORDER:
        raise ConfigurationError(f"unsupported quadrature order {order} (1..{MAX_ORDER})")
    order = int(order)
    if order == 1:
        return QuadratureRule(np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0]), 1)
    if order == 2:
        return _symmetric_rule([((2 / 3, 1 / 6, 1 / 6), 1 / 3)], 2)
    if order == 6:
        return _dunavant6()
    return _collapsed_gauss(order)
