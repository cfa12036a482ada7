"""Error norms, convergence studies and average-density observers."""
from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .functions import as_function
from .mesh import unit_square
from .mms import SPATIAL_GAMMAS, TEMPORAL_GAMMAS, manufactured_case
from .operators import get_assembler
from .space import FESpace, build_space
from .timesteppers import Scheme, run

log = logging.getLogger(__name__)


def _coeffs(u):
    return np.asarray(getattr(u, "coefficients", u), dtype=float)


def l2_norm(space: FESpace, u) -> float:
    x = _coeffs(u)
    return math.sqrt(max(float(x @ (get_assembler(space).mass() @ x)), 0.0))


def h1_seminorm(space: FESpace, u) -> float:
    x = _coeffs(u)
    return math.sqrt(max(float(x @ (get_assembler(space).stiffness() @ x)), 0.0))


def error_components(space: FESpace, u, exact, t: float) -> tuple[float, float]:
    """Squared L2 error and squared H1-seminorm error against an exact function.

    Both are integrated by quadrature of the pointwise differences, without
    interpolating the exact solution.
    """
    asm = get_assembler(space)
    exact = as_function(exact)
    X, Y = asm.points[..., 0], asm.points[..., 1]
    diff = asm.eval_field(_coeffs(u)) - exact(t, X, Y)
    grad = asm.eval_field_gradient(_coeffs(u))
    gx, gy = exact.gradient(t, X, Y)
    gdiff2 = (grad[..., 0] - gx) ** 2 + (grad[..., 1] - gy) ** 2
    return float(np.sum(asm.wdet * diff**2)), float(np.sum(asm.wdet * gdiff2))


def h1_error(space: FESpace, u, exact, t: float) -> float:
    l2, semi = error_components(space, u, exact, t)
    return math.sqrt(l2 + semi)


class SpaceTimeErrorAccumulator:
    """Observer accumulating ``sum_n dt ||e_i^n||_{H1}^2`` over steps ``n >= 1``."""

    def __init__(self, space: FESpace, exact: Sequence, dt: float):
        self.space = space
        self.exact = [as_function(e) for e in exact]
        self.dt = dt
        self.sums = np.zeros(len(self.exact))
        self.calls = 0

    def __call__(self, n, t, states):
        for i, (u, ex) in enumerate(zip(states, self.exact)):
            l2, semi = error_components(self.space, u, ex, t)
            self.sums[i] += self.dt * (l2 + semi)
        self.calls += 1

    def value(self) -> np.ndarray:
        return np.sqrt(self.sums)


def space_time_error(space: FESpace, trajectory, exact: Sequence, dt: float) -> np.ndarray:
    """Discrete L2(0,T; H1) error of ``trajectory``: an iterable of ``(t, states)`` for n = 1..M."""
    acc = SpaceTimeErrorAccumulator(space, exact, dt)
    for n, (t, states) in enumerate(trajectory, start=1):
        acc(n, t, states)
    return acc.value()


def observed_rates(params: Sequence[float], errors) -> np.ndarray:
    """Rates ``log(e_prev / e_curr) / log(p_prev / p_curr)``; first entry is NaN."""
    p = np.asarray(params, dtype=float)
    e = np.asarray(errors, dtype=float)
    rates = np.full(e.shape, np.nan)
    rates[1:] = np.log(e[:-1] / e[1:]) / np.log(p[:-1] / p[1:]).reshape((-1,) + (1,) * (e.ndim - 1))
    return rates


@dataclass
class ConvergenceReport:
    study: str
    scheme: str
    params: list[float]
    labels: list[str]
    errors: np.ndarray  # (levels, species)
    config: dict = field(default_factory=dict)

    @property
    def rates(self) -> np.ndarray:
        return observed_rates(self.params, self.errors)

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.errors, axis=0) < 0))

    @property
    def n_species(self) -> int:
        return self.errors.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["level_param"]
        for i in range(1, self.n_species + 1):
            header += [f"err_{i}", f"rate_{i}"]
        w.writerow(header)
        rates = self.rates
        for k, p in enumerate(self.params):
            row = [repr(float(p))]
            for i in range(self.n_species):
                row.append(repr(float(self.errors[k, i])))
                row.append("" if np.isnan(rates[k, i]) else repr(float(rates[k, i])))
            w.writerow(row)
        return buf.getvalue()

    def to_text(self) -> str:
        name = "h" if self.study == "spatial" else "dt"
        head = [name] + [c for i in range(1, self.n_species + 1) for c in (f"||e{i}||_2,1", "rate")]
        rows = [head]
        rates = self.rates
        for k, label in enumerate(self.labels):
            row = [label]
            for i in range(self.n_species):
                row.append(f"{self.errors[k, i]:.4e}")
                row.append("" if np.isnan(rates[k, i]) else f"{rates[k, i]:.2f}")
            rows.append(row)
        widths = [max(len(r[c]) for r in rows) for c in range(len(head))]
        lines = [f"{self.scheme.upper()} {self.study} convergence  " + ", ".join(f"{k}={v}" for k, v in self.config.items())]
        for r in rows:
            lines.append("  ".join(cell.rjust(wd) for cell, wd in zip(r, widths)))
        return "\n".join(lines)


SPATIAL_MESHES = (4, 8, 16, 32, 64)
SPATIAL_T = 0.001
TEMPORAL_T = 1.0
TEMPORAL_MESH = {Scheme.DBE: 64, Scheme.DBDF2: 128}


def mms_error(n: int, T: float, dt: float, scheme, gammas, degree: int = 2) -> np.ndarray:
    """Run the manufactured problem on an ``n x n`` mesh and return ``||e_i||_{2,1}``."""
    scheme = Scheme(scheme)
    case = manufactured_case(gammas)
    space = build_space(unit_square(n), degree)
    problem = case.problem(space, T, dt, exact_second_level=True)
    acc = SpaceTimeErrorAccumulator(space, case.exact, dt)
    run(problem, scheme, [acc])
    return acc.value()


def convergence_study(
    study: str,
    scheme,
    levels: int | None = None,
    mesh: int | None = None,
    T: float | None = None,
    degree: int = 2,
    progress: Callable[[str], None] | None = None,
) -> ConvergenceReport:
    """Refinement study on the manufactured three-species problem.

    ``spatial``: meshes 1/4, 1/8, ... at ``T = 0.001`` with ``dt = T/8`` (DBE)
    or ``T/16`` (DBDF-2).  ``temporal``: ``dt = T/4, T/8, ...`` on a fixed
    1/64 (DBE) or 1/128 (DBDF-2) mesh with ``T = 1``.
    """
    scheme = Scheme(scheme)
    if study == "spatial":
        levels = levels or len(SPATIAL_MESHES)
        T = SPATIAL_T if T is None else T
        dt = T / (8 if scheme is Scheme.DBE else 16)
        ns = [4 * 2**k for k in range(levels)]
        runs = [(n, dt) for n in ns]
        params = [1.0 / n for n in ns]
        labels = [f"1/{n}" for n in ns]
        gammas = SPATIAL_GAMMAS
        config = {"T": T, "dt": f"T/{round(T / dt)}", "degree": degree}
    elif study == "temporal":
        levels = levels or 6
        T = TEMPORAL_T if T is None else T
        n = mesh or TEMPORAL_MESH[scheme]
        divs = [4 * 2**k for k in range(levels)]
        runs = [(n, T / m) for m in divs]
        params = [T / m for m in divs]
        labels = [f"T/{m}" for m in divs]
        gammas = TEMPORAL_GAMMAS
        config = {"T": T, "h": f"1/{n}", "degree": degree}
    else:
        raise ValueError(f"unknown study {study!r}; use 'spatial' or 'temporal'")
    if levels < 3:
        raise ValueError("a convergence study needs at least 3 levels")

    errors = []
    for (n, dt), label in zip(runs, labels):
        e = mms_error(n, T, dt, scheme, gammas, degree)
        errors.append(e)
        msg = f"{scheme.value} {study} {label}: " + " ".join(f"{v:.4e}" for v in e)
        log.info(msg)
        if progress:
            progress(msg)
    report = ConvergenceReport(study, scheme.value, params, labels, np.array(errors), config)
    if not report.monotone:
        warnings.warn("errors are not monotonically decreasing under refinement", RuntimeWarning, stacklevel=2)
    return report


def mean_density(space: FESpace, u) -> float:
    """Average ``(1/|Omega|) int u dx``."""
    x = _coeffs(u)
    M = get_assembler(space).mass()
    return float(np.ones(len(x)) @ (M @ x)) / space.mesh.area


@dataclass
class DensitySeries:
    times: list[float] = field(default_factory=list)
    means: list[list[float]] = field(default_factory=list)

    @property
    def n_species(self) -> int:
        return len(self.means[0]) if self.means else 0

    def as_array(self) -> np.ndarray:
        return np.asarray(self.means, dtype=float)


class DensityRecorder:
    """Observer recording per-species mean densities at times ``t >= record_from``."""

    def __init__(self, space: FESpace, record_from: float = 0.0):
        self.space = space
        self.record_from = record_from
        self.series = DensitySeries()
        self._weights = np.ones(space.n_dofs) @ get_assembler(space).mass() / space.mesh.area

    def _record(self, t, states):
        if t >= self.record_from - 1e-9:
            self.series.times.append(float(t))
            self.series.means.append([float(self._weights @ np.asarray(u)) for u in states])

    def start(self, t, states):
        self._record(t, states)

    def __call__(self, n, t, states):
        self._record(t, states)
