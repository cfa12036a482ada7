"""Command-line entry point.

Exit codes: 0 success, 1 runtime or solver failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .analysis import convergence_study
from .errors import ConfigurationError, SolverError
from .scenarios import (
    parse_config,
    preset,
    preset_names,
    serialize_config,
    simulate,
    write_density_csv,
    write_snapshots,
)

log = logging.getLogger("harvestfem")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="harvestfem", description="Decoupled FE solver for competing species.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convergence", help="manufactured-solution refinement study")
    c.add_argument("--scheme", choices=["dbe", "dbdf2"], required=True)
    c.add_argument("--study", choices=["spatial", "temporal"], required=True)
    c.add_argument("--levels", type=int, default=None, help="number of refinement levels (>= 3)")
    c.add_argument("--mesh", type=int, default=None, help="cells per side for temporal studies")
    c.add_argument("--T", type=float, default=None, dest="T", help="end time override")
    c.add_argument("--out", type=Path, default=None, help="CSV output path")

    s = sub.add_parser("simulate", help="run a scenario preset or config file")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=preset_names(), metavar="NAME")
    src.add_argument("--config", type=Path)
    s.add_argument("--out", type=Path, default=None, help="output directory")

    sub.add_parser("presets", help="list scenario presets")
    return p


def _convergence(args) -> int:
    if args.levels is not None and args.levels < 3:
        raise ConfigurationError("--levels must be at least 3")
    report = convergence_study(
        args.study, args.scheme, levels=args.levels, mesh=args.mesh, T=args.T, progress=log.info
    )
    print(report.to_text())
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(report.to_csv())
        print(f"wrote {args.out}")
    return 0


def _simulate(args) -> int:
    if args.preset:
        cfg = preset(args.preset)
    else:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read {args.config}: {exc.strerror}") from None
        cfg = parse_config(text)
    if args.out is not None:
        cfg = replace(cfg, output_dir=str(args.out))
    out = Path(cfg.output_dir)
    result = simulate(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(serialize_config(cfg))
    write_density_csv(result.densities, out / "density.csv")
    write_snapshots(result.snapshots, out)
    final = result.densities.means[-1]
    print(f"t={result.densities.times[-1]:g} " + " ".join(f"mean_u{i}={v:.6g}" for i, v in enumerate(final, 1)))
    if result.errors is not None:
        print(" ".join(f"||e{i}||_2,1={v:.4e}" for i, v in enumerate(result.errors, 1)))
        (out / "errors.csv").write_text(
            ",".join(f"err_{i}" for i in range(1, len(result.errors) + 1))
            + "\n"
            + ",".join(repr(float(v)) for v in result.errors)
            + "\n"
        )
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "convergence":
            return _convergence(args)
        if args.command == "simulate":
            return _simulate(args)
        print("\n".join(preset_names()))
        return 0
    except (ConfigurationError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
