"""Batch command-line interface.

Subcommands: run, scan-thickness, tilt-sweep, potential-map, kh-map,
geometry-dump, plot-data.  Exit codes: 0 success, 2 configuration error,
3 runtime/numerical error, 4 I/O error.  The --threads flag affects speed
only, never results.
"""

from __future__ import annotations

import argparse
import dataclasses
import shutil
import sys
from pathlib import Path

from .config import RunConfig, parse_config
from .errors import ConfigError, HyperchannelError, MissingDataError
from . import pipeline

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_IO = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperchannel",
        description="Monte Carlo proton hyperchanneling simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="YAML config file (defaults apply without one)")
        p.add_argument("--seed", type=int, default=None,
                       help="override ensemble.seed")
        p.add_argument("--particles", type=int, default=None,
                       help="override ensemble.n_particles")
        p.add_argument("--out", type=Path, default=None,
                       help="override output.directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (speed only, never results)")

    for name, help_text in [
        ("run", "propagate one ensemble and write exit histograms"),
        ("scan-thickness", "on-axis yield versus reduced thickness"),
        ("tilt-sweep", "ensembles over the configured tilt fractions"),
        ("potential-map", "CSV grids of U_th, |grad U| and n_e"),
        ("kh-map", "radial table of laser-dressed Fourier components"),
        ("geometry-dump", "CSV of the channel string layout"),
    ]:
        common(sub.add_parser(name, help=help_text))

    plot = sub.add_parser("plot-data", help="export plot-ready CSVs "
                          "for one figure from an existing bundle")
    plot.add_argument("--bundle", type=Path, required=True,
                      help="bundle directory holding manifest.json")
    plot.add_argument("--figure", required=True, choices=pipeline.FIGURES)
    plot.add_argument("--out", type=Path, default=None)
    return parser


def _load_config(args) -> RunConfig:
    if args.config is not None:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        cfg = parse_config(text)
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.particles is not None:
        cfg = dataclasses.replace(cfg, n_particles=args.particles)
    if args.out is not None:
        cfg = dataclasses.replace(
            cfg, output=dataclasses.replace(cfg.output, directory=str(args.out)))
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "plot-data":
        try:
            bundle = pipeline.load_bundle(args.bundle)
            written = pipeline.emit_plot_data(bundle, args.figure, args.out)
        except MissingDataError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
        for path in written:
            print(path)
        return EXIT_OK

    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(cfg.output.directory)
    runner = {
        "run": lambda: pipeline.run_pipeline(cfg, out_dir, args.threads),
        "scan-thickness": lambda: pipeline.run_scan_thickness(
            cfg, out_dir, args.threads),
        "tilt-sweep": lambda: pipeline.run_tilt_sweep(cfg, out_dir, args.threads),
        "potential-map": lambda: pipeline.run_potential_map(cfg, out_dir),
        "kh-map": lambda: pipeline.run_kh_map(cfg, out_dir),
        "geometry-dump": lambda: pipeline.run_geometry_dump(cfg, out_dir),
    }[args.command]

    try:
        bundle = runner()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        _discard_partial(out_dir)
        return EXIT_IO
    except HyperchannelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _discard_partial(out_dir)
        return EXIT_RUNTIME

    print(bundle.directory / "manifest.json")
    return EXIT_OK


def _discard_partial(out_dir: Path) -> None:
    """Remove a bundle left without a manifest by a failed run."""
    try:
        if out_dir.is_dir() and not (out_dir / "manifest.json").exists():
            shutil.rmtree(out_dir)
    except OSError:
        pass


if __name__ == "__main__":
    raise SystemExit(main())
