"""Decoupled linearised backward-Euler and BDF2 time stepping.

Each step solves one linear system per species.  The competition term
``r u_i sum_j u_j / K`` is linearised by lagging the sum to the previous
level (DBE) or extrapolating it as ``sum_j (2 u_j^n - u_j^{n-1})`` (DBDF-2),
so the species systems within a step are independent of each other.
"""
from __future__ import annotations

import enum
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, DivergenceError, SolverError
from .functions import ZERO, SpaceTimeFunction, as_function
from .operators import apply_dirichlet, get_assembler
from .space import Field, FESpace

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
NEGATIVE_WARN = -1e-6
SAMPLE_GRID = (64, 64, 33)  # x, y, t


class Scheme(str, enum.Enum):
    DBE = "dbe"
    DBDF2 = "dbdf2"


@dataclass
class SpeciesParams:
    """Coefficients of one species: diffusion, advection, harvesting, growth."""

    d: float
    beta: float = 0.0
    gamma: float = 0.0
    r: Any = 1.0

    def __post_init__(self):
        if not np.isfinite(self.d) or self.d <= 0:
            raise ConfigurationError(f"diffusion rate d must be > 0, got {self.d}")
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ConfigurationError(f"advection rate beta must be >= 0, got {self.beta}")
        if not np.isfinite(self.gamma) or self.gamma >= 1:
            raise ConfigurationError(f"gamma must be < 1, got {self.gamma}")
        self.r = as_function(self.r)


class NoFlux:
    """Natural boundary condition ``d du/dn - beta u dK/dn = 0``."""

    def __repr__(self):
        return "NoFlux()"


@dataclass
class Dirichlet:
    """Prescribed boundary values, one function ``g_i(t, x, y)`` per species."""

    values: Sequence[Any]

    def __post_init__(self):
        self.values = [as_function(g) for g in self.values]


def _sample_grid(domain, T):
    x0, x1, y0, y1 = domain
    nx, ny, nt = SAMPLE_GRID
    X, Y = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny), indexing="ij")
    return X, Y, np.linspace(0.0, T, nt)


def _domain(space: FESpace):
    m = space.mesh
    return m.x0, m.x1, m.y0, m.y1


def _to_coefficients(space: FESpace, value, t: float) -> np.ndarray:
    if isinstance(value, Field):
        return value.coefficients.copy()
    if isinstance(value, np.ndarray) and value.shape == (space.n_dofs,):
        return value.astype(float).copy()
    return Field.interpolate(space, value if callable(value) else float(value), t).coefficients


@dataclass
class Problem:
    """Everything needed to advance the N-species system from 0 to T."""

    space: FESpace
    species: list[SpeciesParams]
    K: Any
    T: float
    dt: float
    initial: Sequence[Any]
    forcings: Sequence[Any] | None = None
    boundary: NoFlux | Dirichlet = field(default_factory=NoFlux)
    second_initial: Sequence[Any] | None = None  # u^1 for DBDF-2; otherwise one DBE step

    def __post_init__(self):
        n = len(self.species)
        if n < 1:
            raise ConfigurationError("at least one species is required")
        self.K = as_function(self.K)
        if self.forcings is None:
            self.forcings = [ZERO] * n
        self.forcings = [as_function(f) for f in self.forcings]
        if len(self.forcings) != n or len(self.initial) != n:
            raise ConfigurationError("forcings and initial conditions must match the species count")
        if self.second_initial is not None and len(self.second_initial) != n:
            raise ConfigurationError("second_initial must match the species count")
        if isinstance(self.boundary, Dirichlet) and len(self.boundary.values) != n:
            raise ConfigurationError("one Dirichlet function per species is required")
        if not (self.dt > 0 and self.T > 0):
            raise ConfigurationError(f"dt and T must be positive (dt={self.dt}, T={self.T})")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps) or round(steps) < 1:
            raise ConfigurationError(f"dt={self.dt} does not divide T={self.T} evenly")
        self.n_steps = int(round(steps))
        X, Y, ts = _sample_grid(_domain(self.space), self.T)
        kmin = min(float(np.min(self.K(t, X, Y))) for t in ts)
        if not kmin > 0:
            raise ConfigurationError(f"carrying capacity must stay positive (sampled K_min={kmin})")
        self.K_min = kmin

    @property
    def n_species(self) -> int:
        return len(self.species)

    def time(self, n: int) -> float:
        return n * self.dt

    def initial_state(self) -> list[np.ndarray]:
        return [_to_coefficients(self.space, u, 0.0) for u in self.initial]

    def second_state(self) -> list[np.ndarray] | None:
        if self.second_initial is None:
            return None
        return [_to_coefficients(self.space, u, self.dt) for u in self.second_initial]


class Stepper:
    """Reusable workspace for advancing a :class:`Problem`.

    Mass and stiffness matrices are assembled once; advection and weighted
    mass matrices are rebuilt every step.  All forms share one CSR pattern,
    so system matrices are combined through their ``data`` arrays.
    """

    def __init__(self, problem: Problem, parallel: bool = False, species_order: Sequence[int] | None = None):
        self.problem = problem
        self.asm = get_assembler(problem.space)
        self.M = self.asm.mass()
        self.S = self.asm.stiffness()
        self.parallel = parallel
        n = problem.n_species
        self.species_order = list(range(n)) if species_order is None else list(species_order)
        if sorted(self.species_order) != list(range(n)):
            raise ConfigurationError(f"species_order must be a permutation of 0..{n - 1}")

    def _matrix(self, data):
        M = self.M
        return sp.csr_matrix((data, M.indices, M.indptr), shape=M.shape)

    def _step(self, t_new, lead, rhs_mass, coupling):
        """Solve ``[lead M + d S - beta A - (1-gamma) W(r) + W(r c / K)] u = M rhs_mass + F``."""
        p = self.problem
        Kq = self.asm.eval_function(p.K, t_new)
        cq = self.asm.eval_field(coupling) / Kq
        A = None
        if any(s.beta != 0 for s in p.species):
            A = self.asm.advection(p.K, t_new)

        def solve(i):
            s = p.species[i]
            rq = self.asm.eval_function(s.r, t_new)
            W = self.asm.weighted_mass(rq * (cq - (1.0 - s.gamma)), t_new)
            data = lead * self.M.data + s.d * self.S.data + W.data
            if A is not None and s.beta != 0:
                data = data - s.beta * A.data
            mat = self._matrix(data)
            rhs = self.M @ rhs_mass[i] + self.asm.load(p.forcings[i], t_new)
            if isinstance(p.boundary, Dirichlet):
                mat, rhs = apply_dirichlet(mat, rhs, p.space, p.boundary.values[i], t_new)
            return _solve(mat, rhs, i, t_new)

        out = [None] * p.n_species
        if self.parallel and p.n_species > 1:
            with ThreadPoolExecutor(max_workers=p.n_species) as pool:
                for i, u in zip(self.species_order, pool.map(solve, self.species_order)):
                    out[i] = u
        else:
            for i in self.species_order:
                out[i] = solve(i)
        return out

    def dbe_step(self, states: Sequence[np.ndarray], t_new: float) -> list[np.ndarray]:
        dt = self.problem.dt
        states = [np.asarray(u, dtype=float) for u in states]
        rhs_mass = [u / dt for u in states]
        return self._step(t_new, 1.0 / dt, rhs_mass, np.sum(states, axis=0))

    def dbdf2_step(self, states, previous, t_new: float) -> list[np.ndarray]:
        dt = self.problem.dt
        states = [np.asarray(u, dtype=float) for u in states]
        previous = [np.asarray(u, dtype=float) for u in previous]
        rhs_mass = [(4.0 * u - v) / (2.0 * dt) for u, v in zip(states, previous)]
        coupling = np.sum([2.0 * u - v for u, v in zip(states, previous)], axis=0)
        return self._step(t_new, 1.5 / dt, rhs_mass, coupling)


def _solve(mat, rhs, species, t):
    try:
        # FE patterns are structurally symmetric; A+A^T minimum degree halves the fill of COLAMD.
        u = spla.splu(mat.tocsc(), permc_spec="MMD_AT_PLUS_A").solve(rhs)
    except RuntimeError as exc:
        raise SolverError(f"linear solve failed: {exc}", species=species, time=t) from exc
    if not np.all(np.isfinite(u)):
        raise DivergenceError("non-finite density", species=species, time=t)
    scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    res = np.linalg.norm(mat @ u - rhs)
    if res > RESIDUAL_TOL * scale and res > 1e-300:
        raise SolverError(f"linear residual {res / scale:.3e} exceeds tolerance", species=species, time=t)
    return u


def dbe_step(problem: Problem, states, t_new: float, **kw) -> list[np.ndarray]:
    return Stepper(problem, **kw).dbe_step(states, t_new)


def dbdf2_step(problem: Problem, states, previous, t_new: float, **kw) -> list[np.ndarray]:
    return Stepper(problem, **kw).dbdf2_step(states, previous, t_new)


@dataclass
class RunResult:
    scheme: Scheme
    n_steps: int
    final_time: float
    states: list[np.ndarray]
    min_density: float


def run(
    problem: Problem,
    scheme: Scheme | str = Scheme.DBE,
    observers: Sequence[Callable] = (),
    parallel: bool = False,
    species_order: Sequence[int] | None = None,
) -> RunResult:
    """Advance ``problem`` from 0 to T.

    Each observer is called as ``observer(n, t, states)`` after every step
    ``n = 1..M``; an observer exposing ``start(t, states)`` also receives the
    initial level.  DBDF-2 takes its second level from
    ``problem.second_initial`` when given, else from one DBE step.
    """
    scheme = Scheme(scheme)
    stepper = Stepper(problem, parallel=parallel, species_order=species_order)
    u0 = problem.initial_state()
    for obs in observers:
        start = getattr(obs, "start", None)
        if start is not None:
            start(0.0, u0)

    min_density = float(min(u.min() for u in u0))
    prev, cur = None, u0
    for n in range(1, problem.n_steps + 1):
        t = problem.time(n)
        try:
            if scheme is Scheme.DBE or n == 1:
                seeded = problem.second_state() if scheme is Scheme.DBDF2 else None
                new = seeded if seeded is not None else stepper.dbe_step(cur, t)
            else:
                new = stepper.dbdf2_step(cur, prev, t)
        except SolverError:
            log.error("step %d (t=%g) failed", n, t)
            raise
        prev, cur = cur, new
        min_density = min(min_density, float(min(u.min() for u in cur)))
        for obs in observers:
            obs(n, t, cur)

    if min_density < NEGATIVE_WARN:
        warnings.warn(f"densities went negative (min {min_density:.3e})", RuntimeWarning, stacklevel=2)
    return RunResult(scheme, problem.n_steps, problem.time(problem.n_steps), cur, min_density)


def compute_alpha(params: SpeciesParams, K, C: float = 1.0, T: float = 1.0, domain=(0.0, 1.0, 0.0, 1.0)) -> float:
    """Heuristic stability coefficient ``d - C beta ||K|| - C ||r|| (|1-gamma| + 1/K_min)``.

    Norms are sampled on a uniform (x, y, t) grid: ``||K||`` is the largest
    spatial L2 norm over time, ``||r||`` the largest absolute value.  Only a
    warning is raised for non-positive values.
    """
    K = as_function(K)
    X, Y, ts = _sample_grid(domain, T)
    area = (domain[1] - domain[0]) * (domain[3] - domain[2])
    Kvals = [np.broadcast_to(K(t, X, Y), X.shape) for t in ts]
    K_l2 = max(float(np.sqrt(np.mean(k**2) * area)) for k in Kvals)
    K_min = min(float(np.min(k)) for k in Kvals)
    if K_min <= 0:
        raise ConfigurationError(f"carrying capacity must stay positive (sampled K_min={K_min})")
    r_max = max(float(np.max(np.abs(params.r(t, X, Y)))) for t in ts)
    alpha = params.d - C * params.beta * K_l2 - C * r_max * (abs(1.0 - params.gamma) + 1.0 / K_min)
    if alpha <= 0:
        warnings.warn(f"heuristic stability coefficient alpha={alpha:.4g} is not positive", RuntimeWarning, stacklevel=2)
    return alpha
