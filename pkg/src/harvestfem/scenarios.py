"""Run configuration, ecological scenario presets and CSV output."""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import DensityRecorder, DensitySeries, SpaceTimeErrorAccumulator
from .errors import ConfigurationError
from .functions import SpaceTimeFunction, parse_expression
from .mesh import build_mesh
from .mms import ManufacturedCase, carrying_capacity, exact_solutions, growth_rate
from .space import build_space
from .timesteppers import NoFlux, Problem, Scheme, SpeciesParams, run

INITIAL_DENSITY = 1.6
DEGREE = 2

_GAUSS_AMPLITUDE = 2.5 * math.pi**2


def _gaussian(x, y):
    return np.exp(-((x - 0.5) ** 2) - (y - 0.5) ** 2)


def stationary_gaussian() -> SpaceTimeFunction:
    """``K = 1.2 + 2.5 pi^2 exp(-(x-1/2)^2 - (y-1/2)^2)``."""

    def grad(t, x, y):
        g = _GAUSS_AMPLITUDE * _gaussian(x, y)
        return -2.0 * (x - 0.5) * g, -2.0 * (y - 0.5) * g

    return SpaceTimeFunction(lambda t, x, y: 1.2 + _GAUSS_AMPLITUDE * _gaussian(x, y), grad, "stationary-gaussian")


def nonstationary_gaussian() -> SpaceTimeFunction:
    """The stationary Gaussian capacity modulated by ``1 + 0.3 cos t``."""
    base = stationary_gaussian()

    def grad(t, x, y):
        gx, gy = base.gradient(t, x, y)
        c = 1.0 + 0.3 * np.cos(t)
        return c * gx, c * gy

    return SpaceTimeFunction(
        lambda t, x, y: base(t, x, y) * (1.0 + 0.3 * np.cos(t)), grad, "nonstationary-gaussian"
    )


ENVIRONMENTS = {
    "nonstationary-gaussian": nonstationary_gaussian,
    "stationary-gaussian": stationary_gaussian,
}


# -- configuration ---------------------------------------------------------------


@dataclass
class SpeciesSpec:
    d: float
    beta: float = 0.0
    gamma: float = 0.0
    r: str = "1"


@dataclass
class RunConfig:
    species: list[SpeciesSpec]
    mode: str = "simulate"
    scheme: str = "dbdf2"
    nx: int = 16
    ny: int = 16
    dt: float = 0.1
    T: float = 80.0
    boundary: str = "noflux"
    K: str = "nonstationary-gaussian"
    output_dir: str = "out"
    stride: int = 100
    record_from: float = 0.0

    def __post_init__(self):
        validate(self)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


_SCALAR_KEYS = {
    "mode": ("mode", str),
    "scheme": ("scheme", str),
    "mesh.nx": ("nx", int),
    "mesh.ny": ("ny", int),
    "dt": ("dt", float),
    "T": ("T", float),
    "boundary": ("boundary", str),
    "environment.K": ("K", str),
    "output.dir": ("output_dir", str),
    "output.stride": ("stride", int),
    "output.record_from": ("record_from", float),
}
_SPECIES_KEY = re.compile(r"^species\[(\d+)\]\.(d|beta|gamma|r)$")


def validate(cfg: RunConfig) -> None:
    def bad(name, msg):
        raise ConfigurationError(f"{name}: {msg}")

    if cfg.mode not in ("simulate", "convergence"):
        bad("mode", f"must be 'simulate' or 'convergence', got {cfg.mode!r}")
    if cfg.scheme not in ("dbe", "dbdf2"):
        bad("scheme", f"must be 'dbe' or 'dbdf2', got {cfg.scheme!r}")
    if cfg.nx < 1 or cfg.ny < 1:
        bad("mesh", "nx and ny must be >= 1")
    if not (math.isfinite(cfg.dt) and cfg.dt > 0):
        bad("dt", "must be > 0")
    if not (math.isfinite(cfg.T) and cfg.T > 0):
        bad("T", "must be > 0")
    steps = cfg.T / cfg.dt
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps) or round(steps) < 1:
        bad("dt", f"must divide T evenly (T/dt = {steps})")
    if cfg.boundary not in ("noflux", "dirichlet-mms"):
        bad("boundary", f"must be 'noflux' or 'dirichlet-mms', got {cfg.boundary!r}")
    if cfg.stride < 1:
        bad("output.stride", "must be >= 1")
    if not cfg.species:
        bad("species", "at least one species block is required")
    for k, s in enumerate(cfg.species, start=1):
        if not s.d > 0:
            bad(f"species[{k}].d", "must be > 0")
        if not s.beta >= 0:
            bad(f"species[{k}].beta", "must be >= 0")
        if not s.gamma < 1:
            bad(f"species[{k}].gamma", "gamma must be < 1")
        if s.r != "mms":
            try:
                parse_expression(s.r)
            except ConfigurationError as exc:
                bad(f"species[{k}].r", str(exc))
    if cfg.K not in ENVIRONMENTS and cfg.K != "mms":
        try:
            parse_expression(cfg.K)
        except ConfigurationError as exc:
            bad("environment.K", str(exc))
    uses_mms = cfg.boundary == "dirichlet-mms" or cfg.K == "mms" or cfg.mode == "convergence"
    if not uses_mms and any(s.r == "mms" for s in cfg.species):
        bad("species.r", "'mms' growth rate is only available for the manufactured problem")
    if uses_mms and not (cfg.boundary == "dirichlet-mms" and cfg.K == "mms" and len(cfg.species) == 3):
        bad("boundary", "the manufactured problem needs boundary=dirichlet-mms, environment.K=mms and 3 species")


def _convert(name, conv, raw, lineno):
    try:
        if conv is int:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        return conv(raw)
    except ValueError:
        raise ConfigurationError(f"line {lineno}: {name}: cannot parse {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Species are numbered from 1."""
    scalars: dict = {}
    species: dict[int, dict] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if not raw:
            raise ConfigurationError(f"line {lineno}: {key}: missing value")
        m = _SPECIES_KEY.match(key)
        if key in _SCALAR_KEYS:
            attr, conv = _SCALAR_KEYS[key]
            if attr in scalars:
                raise ConfigurationError(f"line {lineno}: duplicate key {key}")
            scalars[attr] = _convert(key, conv, raw, lineno)
        elif m:
            idx, attr = int(m.group(1)), m.group(2)
            block = species.setdefault(idx, {})
            if attr in block:
                raise ConfigurationError(f"line {lineno}: duplicate key {key}")
            block[attr] = raw if attr == "r" else _convert(key, float, raw, lineno)
        else:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")

    if sorted(species) != list(range(1, len(species) + 1)):
        raise ConfigurationError(f"species: blocks must be numbered 1..N, got {sorted(species)}")
    specs = []
    for idx in sorted(species):
        block = species[idx]
        if "d" not in block:
            raise ConfigurationError(f"species[{idx}].d: missing")
        specs.append(SpeciesSpec(**block))
    return RunConfig(species=specs, **scalars)


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for key, (attr, conv) in _SCALAR_KEYS.items():
        v = getattr(cfg, attr)
        lines.append(f"{key} = {repr(v) if conv is float else v}")
    for k, s in enumerate(cfg.species, start=1):
        lines += [
            f"species[{k}].d = {s.d!r}",
            f"species[{k}].beta = {s.beta!r}",
            f"species[{k}].gamma = {s.gamma!r}",
            f"species[{k}].r = {s.r}",
        ]
    return "\n".join(lines) + "\n"


# -- presets -------------------------------------------------------------------------

_VARIABLE_GROWTH = "1.1 + 0.75*cos(x)*cos(y)"


def _species(d, beta, gamma, r="1"):
    n = max(len(v) for v in (d, beta, gamma) if isinstance(v, tuple))
    pick = lambda v, i: v[i] if isinstance(v, tuple) else v
    return [SpeciesSpec(float(pick(d, i)), float(pick(beta, i)), float(pick(gamma, i)), r) for i in range(n)]


# Two-species presets share d = 0.1.
PRESETS: dict[str, dict] = {
    "fig1-advection": dict(K="nonstationary-gaussian", species=_species(0.1, (0.001, 0.01), (0.0, 0.0))),
    "fig2-advection": dict(K="stationary-gaussian", species=_species(0.1, (0.001, 0.01), (0.0, 0.0))),
    "fig3-harvest": dict(K="nonstationary-gaussian", species=_species(0.1, 0.0, (0.001, 0.01))),
    "fig4-harvest": dict(K="nonstationary-gaussian", species=_species(0.1, 0.0, (0.001, 0.0))),
    "fig4-harvest-stationary": dict(K="stationary-gaussian", species=_species(0.1, 0.0, (0.001, 0.0))),
    "fig5-stocking": dict(K="stationary-gaussian", species=_species(0.1, 0.0, (0.001, -0.001))),
    "fig6-advection3": dict(K="nonstationary-gaussian", species=_species(1.0, (0.2, 0.08, 0.001), 0.001)),
    "fig7-harvest3": dict(K="nonstationary-gaussian", species=_species(1.0, 0.001, (0.0009, 0.0036, 0.0072))),
    "fig8-growth": dict(
        K="nonstationary-gaussian", species=_species(0.001, 0.001, (0.0009, 0.0025, 0.005), _VARIABLE_GROWTH)
    ),
    "fig9-diffusion": dict(K="nonstationary-gaussian", species=_species((0.1, 0.02, 0.01), 0.001, (0.0009, 0.0036, 0.0072))),
    "fig10-diffusion-growth": dict(
        K="nonstationary-gaussian",
        species=_species((0.1, 0.02, 0.01), 0.001, (0.0009, 0.0036, 0.0072), _VARIABLE_GROWTH),
    ),
}
LONG_RANGE = dict(T=1080.0, record_from=1000.0)


def preset_names() -> list[str]:
    return list(PRESETS) + [f"{name}-long" for name in PRESETS]


def preset(name: str) -> RunConfig:
    """Scenario configuration by name; a ``-long`` suffix records ``t`` in [1000, 1080]."""
    base, long_range = name, False
    if name.endswith("-long"):
        base, long_range = name[: -len("-long")], True
    if base not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    spec = PRESETS[base]
    cfg = RunConfig(
        species=[replace(s) for s in spec["species"]],
        K=spec["K"],
        output_dir=f"out/{name}",
    )
    if long_range:
        cfg = replace(cfg, **LONG_RANGE)
    return cfg


# -- running ---------------------------------------------------------------------------


@dataclass
class SnapshotSet:
    coords: np.ndarray
    times: list[float] = field(default_factory=list)
    values: list[np.ndarray] = field(default_factory=list)  # each (N, n_dofs)


class SnapshotRecorder:
    """Observer keeping DOF values every ``stride`` steps and at the final step."""

    def __init__(self, coords, stride: int, n_steps: int, record_from: float = 0.0):
        self.set = SnapshotSet(np.asarray(coords))
        self.stride = stride
        self.n_steps = n_steps
        self.record_from = record_from

    def _keep(self, t, states):
        if t >= self.record_from - 1e-9:
            self.set.times.append(float(t))
            self.set.values.append(np.array(states, dtype=float))

    def start(self, t, states):
        self._keep(t, states)

    def __call__(self, n, t, states):
        if n % self.stride == 0 or n == self.n_steps:
            self._keep(t, states)


@dataclass
class SimulationResult:
    config: RunConfig
    densities: DensitySeries
    snapshots: SnapshotSet
    errors: np.ndarray | None = None


def build_problem(cfg: RunConfig):
    mesh = build_mesh(0.0, 1.0, 0.0, 1.0, cfg.nx, cfg.ny)
    space = build_space(mesh, DEGREE)
    if cfg.boundary == "dirichlet-mms":
        species = [
            SpeciesParams(d=s.d, beta=s.beta, gamma=s.gamma, r=growth_rate() if s.r == "mms" else parse_expression(s.r))
            for s in cfg.species
        ]
        case = ManufacturedCase(exact_solutions(), carrying_capacity(), species[0].r, species)
        return case.problem(space, cfg.T, cfg.dt), case
    K = ENVIRONMENTS[cfg.K]() if cfg.K in ENVIRONMENTS else parse_expression(cfg.K)
    species = [SpeciesParams(d=s.d, beta=s.beta, gamma=s.gamma, r=parse_expression(s.r)) for s in cfg.species]
    problem = Problem(
        space=space,
        species=species,
        K=K,
        T=cfg.T,
        dt=cfg.dt,
        initial=[INITIAL_DENSITY] * len(species),
        boundary=NoFlux(),
    )
    return problem, None


def simulate(cfg: RunConfig) -> SimulationResult:
    """Run a configuration and collect mean densities and snapshots.

    For the manufactured problem the space-time errors are collected too.
    """
    problem, case = build_problem(cfg)
    space = problem.space
    densities = DensityRecorder(space, record_from=cfg.record_from)
    snaps = SnapshotRecorder(space.dof_coords, cfg.stride, problem.n_steps, cfg.record_from)
    observers = [densities, snaps]
    acc = None
    if case is not None:
        acc = SpaceTimeErrorAccumulator(space, case.exact, cfg.dt)
        observers.append(acc)
    run(problem, Scheme(cfg.scheme), observers)
    return SimulationResult(cfg, densities.series, snaps.set, None if acc is None else acc.value())


# -- output ----------------------------------------------------------------------------


def format_time(t: float) -> str:
    return repr(round(float(t), 10))


def _open_for_write(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_density_csv(series: DensitySeries, path) -> Path:
    """``time,mean_u1,...,mean_uN`` with one row per recorded time."""
    n = series.n_species
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time"] + [f"mean_u{i}" for i in range(1, n + 1)])
        for t, means in zip(series.times, series.means):
            w.writerow([format_time(t)] + [repr(float(v)) for v in means])
    return Path(path)


def write_snapshots(snapshots: SnapshotSet, directory) -> list[Path]:
    """One ``snap_t<time>.csv`` per snapshot with columns ``x,y,u1,...,uN``."""
    paths = []
    for t, values in zip(snapshots.times, snapshots.values):
        path = Path(directory) / f"snap_t{format_time(t)}.csv"
        with _open_for_write(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y"] + [f"u{i}" for i in range(1, len(values) + 1)])
            for k, (x, y) in enumerate(snapshots.coords):
                w.writerow([repr(float(x)), repr(float(y))] + [repr(float(v)) for v in values[:, k]])
        paths.append(path)
    return paths
