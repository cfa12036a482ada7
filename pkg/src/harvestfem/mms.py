"""Three-species manufactured solution on the unit square.

Exact solutions, carrying capacity and growth rate are fixed trigonometric
products.  The forcing that makes them solve the model is derived by hand in
:meth:`ManufacturedCase.forcing`; :meth:`ManufacturedCase.forcing_oracle`
recomputes it from point values only, with central differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .functions import SpaceTimeFunction, as_function
from .timesteppers import Dirichlet, Problem, SpeciesParams

SPATIAL_GAMMAS = (0.001, 0.0006, 0.0)
TEMPORAL_GAMMAS = (0.001, 0.0006, 0.01)


class ManufacturedFunction(SpaceTimeFunction):
    """A function with analytic time derivative, gradient and Laplacian."""

    def __init__(self, value, grad, dt, laplacian, name):
        super().__init__(value, grad, name)
        self._dt = dt
        self._lap = laplacian

    def time_derivative(self, t, x, y):
        return np.broadcast_to(self._dt(t, x, y), np.broadcast(x, y).shape)

    def laplacian(self, t, x, y):
        return np.broadcast_to(self._lap(t, x, y), np.broadcast(x, y).shape)


def _u1():
    a = lambda t: 1.1 + np.sin(t)
    return ManufacturedFunction(
        lambda t, x, y: a(t) * (2.0 + np.sin(y)),
        lambda t, x, y: (0.0 * x, a(t) * np.cos(y)),
        lambda t, x, y: np.cos(t) * (2.0 + np.sin(y)),
        lambda t, x, y: -a(t) * np.sin(y),
        "u1",
    )


def _u2():
    a = lambda t: 2.0 + np.cos(t)
    return ManufacturedFunction(
        lambda t, x, y: a(t) * (1.1 + np.cos(x)),
        lambda t, x, y: (-a(t) * np.sin(x), 0.0 * y),
        lambda t, x, y: -np.sin(t) * (1.1 + np.cos(x)),
        lambda t, x, y: -a(t) * np.cos(x),
        "u2",
    )


def _u3():
    a = lambda t: 1.1 + np.sin(t)
    return ManufacturedFunction(
        lambda t, x, y: a(t) * (1.1 + np.cos(y)),
        lambda t, x, y: (0.0 * x, -a(t) * np.sin(y)),
        lambda t, x, y: np.cos(t) * (1.1 + np.cos(y)),
        lambda t, x, y: -a(t) * np.cos(y),
        "u3",
    )


def carrying_capacity():
    c = lambda t: 1.1 + np.cos(t)
    return ManufacturedFunction(
        lambda t, x, y: (2.1 + np.cos(x) * np.cos(y)) * c(t),
        lambda t, x, y: (-c(t) * np.sin(x) * np.cos(y), -c(t) * np.cos(x) * np.sin(y)),
        lambda t, x, y: -np.sin(t) * (2.1 + np.cos(x) * np.cos(y)),
        lambda t, x, y: -2.0 * c(t) * np.cos(x) * np.cos(y),
        "K_mms",
    )


def growth_rate() -> SpaceTimeFunction:
    return SpaceTimeFunction(
        lambda t, x, y: (1.5 + np.sin(x) * np.sin(y)) * (1.2 + np.sin(t)),
        lambda t, x, y: (
            np.cos(x) * np.sin(y) * (1.2 + np.sin(t)),
            np.sin(x) * np.cos(y) * (1.2 + np.sin(t)),
        ),
        "r_mms",
    )


def exact_solutions() -> list[ManufacturedFunction]:
    return [_u1(), _u2(), _u3()]




@dataclass
class ManufacturedCase:
    exact: list[ManufacturedFunction]
    K: ManufacturedFunction
    r: SpaceTimeFunction
    params: list[SpeciesParams]

    @property
    def n_species(self) -> int:
        return len(self.exact)

    def forcing(self, i: int, t, x, y):
        """Closed-form source term for species ``i``.

        ``f = du/dt - d lap(u) + beta (grad u . grad K + u lap K) - r u (1 - gamma - sum_j u_j / K)``
        """
        u = self.exact[i]
        p = self.params[i]
        ux, uy = u.gradient(t, x, y)
        Kx, Ky = self.K.gradient(t, x, y)
        uval = u(t, x, y)
        K = self.K(t, x, y)
        total = sum(v(t, x, y) for v in self.exact)
        div_flux = ux * Kx + uy * Ky + uval * self.K.laplacian(t, x, y)
        reaction = p.r(t, x, y) * uval * (1.0 - p.gamma - total / K)
        return u.time_derivative(t, x, y) - p.d * u.laplacian(t, x, y) + p.beta * div_flux - reaction

    def forcing_oracle(self, i: int, t, x, y, step: float = 2.0**-13):
        """Same source term from point values and second-order central differences.

        The advective flux divergence is differenced without expansion: the
        flux ``u dK/dx`` is itself formed with a central difference at
        ``x +- step`` and then differenced again.
        """
        u = self.exact[i]
        K = self.K
        p = self.params[i]
        s = step
        dudt = (u(t + s, x, y) - u(t - s, x, y)) / (2 * s)
        lap = (u(t, x + s, y) + u(t, x - s, y) + u(t, x, y + s) + u(t, x, y - s) - 4 * u(t, x, y)) / s**2

        def flux_x(xx, yy):
            return u(t, xx, yy) * (K(t, xx + s, yy) - K(t, xx - s, yy)) / (2 * s)

        def flux_y(xx, yy):
            return u(t, xx, yy) * (K(t, xx, yy + s) - K(t, xx, yy - s)) / (2 * s)

        div = (flux_x(x + s, y) - flux_x(x - s, y)) / (2 * s) + (flux_y(x, y + s) - flux_y(x, y - s)) / (2 * s)
        total = sum(v(t, x, y) for v in self.exact)
        reaction = p.r(t, x, y) * u(t, x, y) * (1.0 - p.gamma - total / K(t, x, y))
        return dudt - p.d * lap + p.beta * div - reaction

    def forcing_function(self, i: int) -> SpaceTimeFunction:
        return SpaceTimeFunction(lambda t, x, y: self.forcing(i, t, x, y), name=f"f{i + 1}_mms")

    def exact_boundary(self, i: int) -> SpaceTimeFunction:
        return self.exact[i]

    def problem(self, space, T: float, dt: float, exact_second_level: bool = True) -> Problem:
        """Dirichlet problem whose solution is the manufactured one.

        The initial level is the nodal interpolant of the exact solution;
        with ``exact_second_level`` the DBDF-2 start level is too.
        """
        return Problem(
            space=space,
            species=self.params,
            K=self.K,
            T=T,
            dt=dt,
            initial=self.exact,
            forcings=[self.forcing_function(i) for i in range(self.n_species)],
            boundary=Dirichlet([self.exact_boundary(i) for i in range(self.n_species)]),
            second_initial=self.exact if exact_second_level else None,
        )


def manufactured_case(
    gammas: Sequence[float] = SPATIAL_GAMMAS,
    d: float = 1.0,
    beta: float = 1.0,
    r: Callable | float | None = None,
) -> ManufacturedCase:
    r = growth_rate() if r is None else as_function(r)
    params = [SpeciesParams(d=d, beta=beta, gamma=g, r=r) for g in gammas]
    return ManufacturedCase(exact_solutions(), carrying_capacity(), r, params)
