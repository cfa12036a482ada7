import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harvestfem import ConfigurationError
from harvestfem.analysis import DensitySeries
from harvestfem.cli import main
from harvestfem.scenarios import (
    ENVIRONMENTS,
    RunConfig,
    SpeciesSpec,
    format_time,
    parse_config,
    preset,
    preset_names,
    serialize_config,
    simulate,
    write_density_csv,
    write_snapshots,
)

SMALL = """
# two competing species on a coarse mesh
mesh.nx = 4
mesh.ny = 4
dt = 0.1
T = 0.5
output.stride = 2
species[1].d = 0.1
species[1].beta = 0.001
species[2].d = 0.1
species[2].gamma = 0.01   # harvested
"""


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_minimal_config_defaults():
    cfg = parse_config("species[1].d = 0.5\n")
    assert cfg.mode == "simulate" and cfg.scheme == "dbdf2"
    assert (cfg.nx, cfg.ny, cfg.dt, cfg.T) == (16, 16, 0.1, 80.0)
    assert cfg.boundary == "noflux" and cfg.K == "nonstationary-gaussian"
    assert cfg.species == [SpeciesSpec(d=0.5)]


def test_parse_small_config():
    cfg = parse_config(SMALL)
    assert cfg.n_steps == 5
    assert cfg.species[1].gamma == 0.01
    assert cfg.stride == 2


@pytest.mark.parametrize(
    "text,match",
    [
        ("species[1].d = 1\nspecies[1].gamma = 1.5\n", r"species\[1\]\.gamma: gamma must be < 1"),
        ("species[1].d = 1\ndt = 0.3\nT = 1\n", r"dt: must divide T"),
        ("species[1].d = 1\ndt = 0\n", r"dt: must be > 0"),
        ("species[1].d = 1\ndt = -0.1\n", r"dt: must be > 0"),
        ("species[1].d = 0\n", r"species\[1\]\.d"),
        ("species[1].d = 1\nbogus = 3\n", r"line 2: unknown key"),
        ("species[1].d = 1\nspecies[1].d = 2\n", r"line 2: duplicate"),
        ("species[1].d = 1\nmesh.nx = four\n", r"line 2: mesh.nx"),
        ("species[1].d = 1\nthis line has no equals\n", r"line 2"),
        ("species[2].d = 1\n", r"numbered 1..N"),
        ("species[1].beta = 1\n", r"species\[1\]\.d: missing"),
        ("species[1].d = 1\nspecies[1].r = import os\n", r"species\[1\]\.r"),
        ("species[1].d = 1\nenvironment.K = __import__('os')\n", r"environment.K"),
        ("species[1].d = 1\nscheme = rk4\n", r"scheme"),
        ("species[1].d = 1\nspecies[1].r = mms\n", r"species.r"),
        ("species[1].d = 1\nboundary = dirichlet-mms\n", r"boundary"),
    ],
)
def test_rejections(text, match):
    with pytest.raises(ConfigurationError, match=match):
        parse_config(text)


def test_no_species():
    with pytest.raises(ConfigurationError, match="species"):
        parse_config("dt = 0.1\n")


_finite = dict(allow_nan=False, allow_infinity=False)
species_st = st.builds(
    SpeciesSpec,
    d=st.floats(1e-4, 10, **_finite),
    beta=st.floats(0, 1, **_finite),
    gamma=st.floats(-2, 0.999, **_finite),
    r=st.sampled_from(["1", "1.1 + 0.75*cos(x)*cos(y)", "2*exp(-t)"]),
)


@given(
    species=st.lists(species_st, min_size=1, max_size=4),
    steps=st.integers(1, 2000),
    dt=st.sampled_from([0.1, 0.05, 0.25, 0.001]),
    scheme=st.sampled_from(["dbe", "dbdf2"]),
    K=st.sampled_from(sorted(ENVIRONMENTS) + ["2 + sin(x*y)"]),
    nx=st.integers(1, 64),
    stride=st.integers(1, 500),
)
@settings(max_examples=60, deadline=None)
def test_serialize_round_trip(species, steps, dt, scheme, K, nx, stride):
    cfg = RunConfig(species=species, scheme=scheme, nx=nx, ny=nx + 1, dt=dt, T=steps * dt, K=K, stride=stride)
    assert parse_config(serialize_config(cfg)) == cfg


PRESET_TABLE = {
    "fig1-advection": ("nonstationary-gaussian", [0.1, 0.1], [0.001, 0.01], [0.0, 0.0], "1"),
    "fig2-advection": ("stationary-gaussian", [0.1, 0.1], [0.001, 0.01], [0.0, 0.0], "1"),
    "fig3-harvest": ("nonstationary-gaussian", [0.1, 0.1], [0.0, 0.0], [0.001, 0.01], "1"),
    "fig4-harvest": ("nonstationary-gaussian", [0.1, 0.1], [0.0, 0.0], [0.001, 0.0], "1"),
    "fig4-harvest-stationary": ("stationary-gaussian", [0.1, 0.1], [0.0, 0.0], [0.001, 0.0], "1"),
    "fig5-stocking": ("stationary-gaussian", [0.1, 0.1], [0.0, 0.0], [0.001, -0.001], "1"),
    "fig6-advection3": ("nonstationary-gaussian", [1.0] * 3, [0.2, 0.08, 0.001], [0.001] * 3, "1"),
    "fig7-harvest3": ("nonstationary-gaussian", [1.0] * 3, [0.001] * 3, [0.0009, 0.0036, 0.0072], "1"),
    "fig8-growth": ("nonstationary-gaussian", [0.001] * 3, [0.001] * 3, [0.0009, 0.0025, 0.005], "1.1 + 0.75*cos(x)*cos(y)"),
    "fig9-diffusion": ("nonstationary-gaussian", [0.1, 0.02, 0.01], [0.001] * 3, [0.0009, 0.0036, 0.0072], "1"),
    "fig10-diffusion-growth": (
        "nonstationary-gaussian",
        [0.1, 0.02, 0.01],
        [0.001] * 3,
        [0.0009, 0.0036, 0.0072],
        "1.1 + 0.75*cos(x)*cos(y)",
    ),
}


@pytest.mark.parametrize("name", sorted(PRESET_TABLE))
def test_preset_table(name):
    K, d, beta, gamma, r = PRESET_TABLE[name]
    cfg = preset(name)
    assert cfg.K == K
    assert [s.d for s in cfg.species] == d
    assert [s.beta for s in cfg.species] == beta
    assert [s.gamma for s in cfg.species] == gamma
    assert all(s.r == r for s in cfg.species)
    assert (cfg.T, cfg.dt, cfg.scheme, cfg.boundary) == (80.0, 0.1, "dbdf2", "noflux")
    assert cfg.output_dir == f"out/{name}"


def test_long_presets_and_registry():
    assert set(preset_names()) == set(PRESET_TABLE) | {f"{n}-long" for n in PRESET_TABLE}
    cfg = preset("fig9-diffusion-long")
    assert (cfg.T, cfg.record_from) == (1080.0, 1000.0)
    with pytest.raises(ConfigurationError, match="unknown preset"):
        preset("fig99")


def test_growth_expression_evaluates():
    from harvestfem.functions import parse_expression

    r = parse_expression(preset("fig8-growth").species[0].r)
    assert r(0.0, 0.0, 0.0) == pytest.approx(1.85)
    assert r(0.0, math.pi / 2, 0.3) == pytest.approx(1.1)


def test_simulate_outputs(tmp_path):
    cfg = parse_config(SMALL)
    res = simulate(cfg)
    assert len(res.densities.times) == cfg.n_steps + 1
    np.testing.assert_allclose(res.densities.means[0], 1.6, rtol=1e-13)
    path = write_density_csv(res.densities, tmp_path / "density.csv")
    rows = _read_csv(path)
    assert rows[0] == ["time", "mean_u1", "mean_u2"]
    assert len(rows) == cfg.n_steps + 2
    assert rows[1][0] == "0.0" and rows[-1][0] == "0.5"
    assert [float(v) for v in rows[1][1:]] == pytest.approx([1.6, 1.6], rel=1e-13)
    # snapshots at n = 0, 2, 4 and the final step
    snaps = write_snapshots(res.snapshots, tmp_path)
    assert [p.name for p in snaps] == ["snap_t0.0.csv", "snap_t0.2.csv", "snap_t0.4.csv", "snap_t0.5.csv"]
    srows = _read_csv(snaps[-1])
    assert srows[0] == ["x", "y", "u1", "u2"]
    assert len(srows) == 1 + 81
    assert np.all(np.isfinite(np.array(srows[1:], dtype=float)))


def test_zero_trajectory_csv(tmp_path):
    series = DensitySeries([0.0, 0.1, 0.2], [[0.0, 0.0]] * 3)
    rows = _read_csv(write_density_csv(series, tmp_path / "zeros.csv"))
    assert all(float(v) == 0.0 for row in rows[1:] for v in row[1:])
    assert len(rows) == 4


def test_format_time_is_stable():
    assert format_time(0.1 * 3) == "0.3"
    assert format_time(80) == "80.0"


def test_write_failure_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        write_density_csv(DensitySeries([0.0], [[1.0]]), blocker / "sub" / "density.csv")


def test_record_from_window():
    cfg = parse_config(SMALL + "output.record_from = 0.3\n")
    res = simulate(cfg)
    assert res.densities.times == pytest.approx([0.3, 0.4, 0.5])
    assert res.snapshots.times == pytest.approx([0.4, 0.5])


def test_manufactured_mode_reports_errors():
    text = (
        "mode = convergence\nboundary = dirichlet-mms\nenvironment.K = mms\nmesh.nx = 4\nmesh.ny = 4\n"
        "dt = 0.000125\nT = 0.001\nscheme = dbe\n"
    )
    for i, g in enumerate((0.001, 0.0006, 0.0), start=1):
        text += f"species[{i}].d = 1\nspecies[{i}].beta = 1\nspecies[{i}].gamma = {g}\nspecies[{i}].r = mms\n"
    res = simulate(parse_config(text))
    np.testing.assert_allclose(res.errors, [6.9228e-5, 1.1490e-4, 4.2153e-5], rtol=2e-4)


# -- command line ------------------------------------------------------------------------


def test_cli_presets(capsys):
    assert main(["presets"]) == 0
    assert "fig9-diffusion" in capsys.readouterr().out.split()


def test_cli_usage_errors(capsys, tmp_path):
    assert main(["frobnicate"]) == 2
    assert main(["simulate"]) == 2
    assert main(["simulate", "--preset", "nope"]) == 2
    assert main(["convergence", "--scheme", "dbe", "--study", "spatial", "--levels", "2"]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.txt")]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("species[1].d = 1\nspecies[1].gamma = 2\n")
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "gamma must be < 1" in capsys.readouterr().err


def test_cli_io_error(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text(SMALL)
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["simulate", "--config", str(cfg), "--out", str(blocker)]) == 1


def test_cli_simulate_writes_files_and_is_deterministic(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text(SMALL)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert "density.csv" in names and "config.txt" in names
    assert names == sorted(p.name for p in outs[1].iterdir())
    for name in (n for n in names if n.endswith(".csv")):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    # the echoed config reproduces the run configuration
    echoed = parse_config((outs[0] / "config.txt").read_text())
    assert echoed.species == parse_config(SMALL).species


def test_cli_convergence_table(tmp_path, capsys):
    out = tmp_path / "conv.csv"
    assert main(["convergence", "--scheme", "dbe", "--study", "spatial", "--levels", "3", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "DBE spatial convergence" in text
    rows = _read_csv(out)
    assert rows[0][:3] == ["level_param", "err_1", "rate_1"]
    assert len(rows) == 4
    assert float(rows[3][2]) == pytest.approx(2.0, abs=0.05)


@pytest.mark.slow
def test_long_range_window():
    res = simulate(preset("fig2-advection-long"))
    assert res.densities.times[0] == pytest.approx(1000.0)
    assert res.densities.times[-1] == pytest.approx(1080.0)
    assert len(res.densities.times) == 801
    assert np.all(np.isfinite(res.densities.as_array()))
