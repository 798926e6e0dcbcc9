"""Run orchestration and data export for batch campaigns.

Every command writes into a bundle directory holding a ``manifest.json``
that lists each emitted file with a SHA-256 content digest, the config hash
and timing; plot-data exports then read bundles back and emit per-figure
CSV files consumable by any plotting tool.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    dos_projection,
    extract_rainbow_lines,
    deterministic_map,
    histogram_profile,
    jacobian_field,
    tilt_sweep,
    yield_vs_thickness,
)
from .config import RunConfig, config_hash, serialize_config
from .constants import BOHR_RADIUS_NM
from .errors import MissingDataError
from .gridio import write_grid_binary, write_grid_csv
from .laserkh import LaserParams, kh_potential_table
from .montecarlo import flux_enhancement, run_ensemble
from .potentials import ScreeningModel, electron_density

FIGURES = ("Fig4", "Fig5", "Fig6", "Fig7", "Fig8", "Fig9", "Fig10")


@dataclass
class OutputBundle:
    """A written bundle: its directory and parsed manifest."""

    directory: Path
    manifest: dict


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class BundleWriter:
    """Collects emitted files and finalises the manifest."""

    def __init__(self, directory, cfg: RunConfig, command: str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.command = command
        self.files: dict[str, str] = {}
        self.t0 = time.time()

    def path(self, name: str) -> Path:
        return self.directory / name

    def register(self, name: str) -> None:
        self.files[name] = _sha256(self.directory / name)

    def write_histogram(self, hist, stem: str, metadata: dict) -> None:
        fmts = self.cfg.output.formats
        if "binary" in fmts:
            write_grid_binary(hist, self.path(stem + ".chsf"))
            self.register(stem + ".chsf")
        if "csv" in fmts:
            write_grid_csv(hist, self.path(stem + ".csv"), metadata)
            self.register(stem + ".csv")

    def write_csv(self, name: str, header: list[str], rows,
                  comments: list[str] | None = None) -> None:
        with open(self.path(name), "w", newline="") as fh:
            for line in comments or []:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        self.register(name)

    def finalize(self, extra: dict | None = None) -> OutputBundle:
        cfg_text = serialize_config(self.cfg)
        (self.directory / "config.yaml").write_text(cfg_text)
        self.register("config.yaml")
        manifest = {
            "run_id": f"{self.command}-{int(self.t0)}",
            "command": self.command,
            "config_hash": config_hash(self.cfg),
            "seed": self.cfg.seed,
            "version": __version__,
            "wall_time_s": time.time() - self.t0,
            "files": self.files,
        }
        manifest.update(extra or {})
        (self.directory / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return OutputBundle(self.directory, manifest)


def load_bundle(directory) -> OutputBundle:
    directory = Path(directory)
    mpath = directory / "manifest.json"
    if not mpath.exists():
        raise MissingDataError(f"{directory} has no manifest.json")
    return OutputBundle(directory, json.loads(mpath.read_text()))


def _hist_meta(cfg: RunConfig) -> dict:
    return {"seed": cfg.seed, "config_hash": config_hash(cfg)}


# ---------------------------------------------------------------------------
# commands


def run_pipeline(cfg: RunConfig, out_dir=None, threads: int | None = None,
                 command: str = "run") -> OutputBundle:
    """Run one ensemble and write its histograms, summary and path dumps."""
    out_dir = Path(out_dir if out_dir is not None else cfg.output.directory)
    writer = BundleWriter(out_dir, cfg, command)
    field = cfg.field()
    result = run_ensemble(cfg.ensemble(), field, cfg.step, threads=threads,
                          path_dump=cfg.output.path_dump_count)

    writer.write_histogram(result.position_hist, "exit_position",
                           _hist_meta(cfg))
    writer.write_histogram(result.angle_hist, "exit_angle", _hist_meta(cfg))
    for z, hist in result.depth_hists:
        writer.write_histogram(hist, f"depth_{z:g}nm", _hist_meta(cfg))

    if cfg.output.path_dump_count > 0:
        rows = []
        for pid, path in enumerate(result.paths):
            for z, x, y, tx, ty, e, om2 in path:
                rows.append((pid, f"{z:.6g}", f"{x:.9g}", f"{y:.9g}",
                             f"{tx:.9g}", f"{ty:.9g}", f"{e:.9g}",
                             f"{om2:.9g}"))
        writer.write_csv(
            "paths.csv",
            ["particle", "z_nm", "x_nm", "y_nm", "theta_x_rad",
             "theta_y_rad", "energy_ev", "omega_sq"],
            rows)
    summary = dict(result.summary)
    summary["flux_enhancement"] = flux_enhancement(
        result.position_hist, field.geometry.cell_area_nm2)
    writer.path("summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    writer.register("summary.json")
    return writer.finalize({"summary": summary})


def run_scan_thickness(cfg: RunConfig, out_dir=None,
                       threads: int | None = None) -> OutputBundle:
    """Reduced-thickness scan of the on-axis yield (plus optional rainbow
    lines per scan point)."""
    out_dir = Path(out_dir if out_dir is not None else cfg.output.directory)
    writer = BundleWriter(out_dir, cfg, "scan-thickness")
    field = cfg.field()
    a = cfg.analysis
    lams = np.linspace(a.scan_lambda_min, a.scan_lambda_max, a.scan_points)
    scan = yield_vs_thickness(
        field, cfg.beam, lams, cfg.n_particles, cfg.seed, cfg.step,
        f_r_hz=a.scan_f_r_hz, on_axis_radius_nm=a.on_axis_radius_nm,
        threads=threads)
    writer.write_csv(
        "scan.csv",
        ["lambda", "thickness_nm", "on_axis_yield", "enhancement"],
        [(f"{l:.6g}", f"{t:.6g}", int(y), f"{e:.6g}")
         for l, t, y, e in zip(scan.lambda_values, scan.thickness_nm,
                               scan.axial_yield, scan.enhancement)],
        comments=[f"tilt_fraction={scan.tilt_fraction}",
                  f"on_axis_radius_nm={scan.on_axis_radius_nm}",
                  f"n_particles={cfg.n_particles}", f"seed={cfg.seed}"])

    if a.rainbow_grid > 0:
        for lam, thick in zip(scan.lambda_values, scan.thickness_nm):
            _write_rainbow(writer, field, cfg, thick,
                           f"rainbow_lambda{lam:.4g}.csv", a.rainbow_grid)
    return writer.finalize()


def _write_rainbow(writer: BundleWriter, field, cfg: RunConfig,
                   thickness_nm: float, name: str, grid_n: int) -> None:
    samples = deterministic_map(
        field, cfg.beam.energy_ev, thickness_nm, grid_n=grid_n,
        tilt_fraction=cfg.beam.tilt_fraction,
        tilt_azimuth_rad=cfg.beam.tilt_azimuth_rad)
    lines = extract_rainbow_lines(jacobian_field(samples))
    rows = []
    for lid, line in enumerate(lines):
        for px, py in line:
            rows.append((lid, f"{px:.6g}", f"{py:.6g}"))
    writer.write_csv(name, ["line_id", "x_nm", "y_nm"], rows,
                     comments=[f"thickness_nm={thickness_nm:.6g}",
                               f"grid_n={grid_n}"])


def run_tilt_sweep(cfg: RunConfig, out_dir=None,
                   threads: int | None = None) -> OutputBundle:
    """One ensemble per configured tilt; emits the slice stacks, the DOS
    back-projection and a cube index."""
    out_dir = Path(out_dir if out_dir is not None else cfg.output.directory)
    writer = BundleWriter(out_dir, cfg, "tilt-sweep")
    field = cfg.field()
    cube = tilt_sweep(field, cfg.beam, cfg.analysis.tilt_fractions,
                      cfg.n_particles, cfg.seed, cfg.thickness_nm,
                      cfg.step, threads=threads)
    slices = []
    for tf, pos, ang in zip(cube.tilt_fractions, cube.position_slices,
                            cube.angle_slices):
        stem_p = f"tilt{tf:.4g}_position"
        stem_a = f"tilt{tf:.4g}_angle"
        writer.write_histogram(pos, stem_p, _hist_meta(cfg))
        writer.write_histogram(ang, stem_a, _hist_meta(cfg))
        slices.append({"tilt_fraction": float(tf),
                       "position_stem": stem_p, "angle_stem": stem_a,
                       "total_counts": int(pos.counts.sum())})
    proj = dos_projection(cube)
    np.savetxt(writer.path("dos_projection.csv"), proj, delimiter=",")
    writer.register("dos_projection.csv")
    (writer.path("cube_index.json")).write_text(
        json.dumps({"slices": slices,
                    "thickness_nm": cfg.thickness_nm,
                    "energy_ev": cfg.beam.energy_ev}, indent=2) + "\n")
    writer.register("cube_index.json")

    if cfg.analysis.rainbow_grid > 0:
        for tf in cube.tilt_fractions:
            samples = deterministic_map(
                field, cfg.beam.energy_ev, cfg.thickness_nm,
                grid_n=cfg.analysis.rainbow_grid, tilt_fraction=float(tf),
                tilt_azimuth_rad=cfg.beam.tilt_azimuth_rad)
            lines = extract_rainbow_lines(jacobian_field(samples))
            rows = []
            for lid, line in enumerate(lines):
                for px, py in line:
                    rows.append((lid, f"{px:.6g}", f"{py:.6g}"))
            writer.write_csv(f"rainbow_tilt{tf:.4g}.csv",
                             ["line_id", "x_nm", "y_nm"], rows)
    return writer.finalize()


def run_potential_map(cfg: RunConfig, out_dir=None,
                      bin_nm: float | None = None) -> OutputBundle:
    """CSV grids of U_th, |grad U| and n_e over the channel cell."""
    out_dir = Path(out_dir if out_dir is not None else cfg.output.directory)
    writer = BundleWriter(out_dir, cfg, "potential-map")
    field = cfg.field()
    geom = field.geometry
    if bin_nm is None:
        bin_nm = cfg.histogram.position_bin_nm
    half = 0.5 * geom.string_spacing_nm
    n = 2 * int(round(half / bin_nm))
    centers = -half + (np.arange(n) + 0.5) * (2 * half / n)
    rows = []
    for x in centers:
        for y in centers:
            u = field.potential(x, y)
            gx, gy = field.gradient(x, y)
            ne = electron_density(field, x, y)
            rows.append((f"{x:.6g}", f"{y:.6g}", f"{u:.9g}",
                         f"{np.hypot(gx, gy):.9g}", f"{ne:.9g}"))
    writer.write_csv("potential_map.csv",
                     ["x_nm", "y_nm", "u_th_ev", "grad_u_ev_nm", "n_e_nm3"],
                     rows, comments=[f"bin_nm={bin_nm}"])
    return writer.finalize()


def run_kh_map(cfg: RunConfig, out_dir=None, n_r: int = 200,
               r_max_nm: float | None = None) -> OutputBundle:
    """Radial table of the dressed foreign atom's Fourier components."""
    out_dir = Path(out_dir if out_dir is not None else cfg.output.directory)
    writer = BundleWriter(out_dir, cfg, "kh-map")
    laser = LaserParams.from_intensity(
        cfg.laser.peak_intensity_w_cm2, cfg.laser.photon_energy_ev,
        cfg.laser.wavelength_nm)
    alpha0_nm = laser.alpha0_au * BOHR_RADIUS_NM
    model = ScreeningModel.moliere(cfg.laser.foreign_z)
    if r_max_nm is None:
        r_max_nm = max(4.0 * alpha0_nm, 0.2)
    r = np.linspace(1e-4, r_max_nm, n_r)
    # keep radii off the quiver ring, where the cycle average diverges
    r = np.where(np.abs(r - alpha0_nm) < 1e-6, r + 2e-6, r)
    table = kh_potential_table(model, 1, cfg.laser.foreign_z, alpha0_nm, r,
                               n_max=cfg.laser.n_harmonics)
    header = ["r_nm", "v0_ev"] + [f"v{n}_abs_ev"
                                  for n in range(1, cfg.laser.n_harmonics + 1)]
    rows = []
    for i, rr in enumerate(r):
        row = [f"{rr:.6g}", f"{table.components[0][i]:.9g}"]
        row += [f"{abs(table.components[n][i]):.9g}"
                for n in range(1, cfg.laser.n_harmonics + 1)]
        rows.append(row)
    writer.write_csv("kh_map.csv", header, rows,
                     comments=[f"alpha0_au={laser.alpha0_au:.9g}",
                               f"alpha0_nm={alpha0_nm:.9g}",
                               f"field_amplitude_au={laser.field_amplitude_au:.9g}",
                               f"photon_energy_ev={laser.photon_energy_ev}",
                               f"foreign_z={cfg.laser.foreign_z}"])
    return writer.finalize()


def run_geometry_dump(cfg: RunConfig, out_dir=None) -> OutputBundle:
    """CSV of the string layout (shell, position, period)."""
    out_dir = Path(out_dir if out_dir is not None else cfg.output.directory)
    writer = BundleWriter(out_dir, cfg, "geometry-dump")
    geom = cfg.geometry()
    rows = [(s.shell, f"{s.position[0]:.9g}", f"{s.position[1]:.9g}",
             f"{s.period_nm:.9g}") for s in geom.strings]
    writer.write_csv("geometry.csv", ["shell", "x_nm", "y_nm", "d_nm"], rows,
                     comments=[f"cell_area_nm2={geom.cell_area_nm2:.9g}",
                               f"string_spacing_nm={geom.string_spacing_nm:.9g}"])
    return writer.finalize()


# ---------------------------------------------------------------------------
# figure exports


def _read_grid_csv_rows(path: Path):
    import numpy as np
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v
            elif line.strip():
                rows.append(line.strip())
    header = rows[0].split(",")
    data = np.array([[float(tok) for tok in r.split(",")] for r in rows[1:]])
    return meta, header, data


def emit_plot_data(bundle: OutputBundle, figure: str, out_dir=None) -> list[Path]:
    """Write the plot-ready CSV set for one figure from an existing bundle.

    Raises MissingDataError naming the producing subcommand when the bundle
    lacks the needed scans.
    """
    from .gridio import read_grid_binary

    if figure not in FIGURES:
        raise MissingDataError(f"unknown figure {figure!r}; choose from {FIGURES}")
    directory = bundle.directory
    out_dir = Path(out_dir if out_dir is not None else directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = bundle.manifest.get("files", {})
    written = []

    def need(name: str, producer: str) -> Path:
        if name not in files:
            raise MissingDataError(
                f"figure {figure} needs {name!r}; run the {producer!r} "
                f"subcommand first")
        return directory / name

    def grid(stem: str, producer: str):
        if stem + ".chsf" in files:
            return read_grid_binary(directory / (stem + ".chsf"))
        need(stem + ".csv", producer)
        meta, header, data = _read_grid_csv_rows(directory / (stem + ".csv"))
        nx, ny = (int(t) for t in meta["dims"].split(","))
        counts = np.zeros((nx, ny), dtype=np.int64)
        counts[data[:, 0].astype(int), data[:, 1].astype(int)] = \
            data[:, 4].astype(np.int64)
        ox, oy = (float(t) for t in meta["origin"].split(","))
        from .montecarlo import FluxHistogram2D
        return FluxHistogram2D(meta["plane"], (ox, oy),
                               float(meta["bin_size"]), counts,
                               int(meta["n_sampled"]))

    def write_profile(hist, name: str, axis: int = 0):
        centers, vals = histogram_profile(hist, axis=axis, through="peak")
        path = out_dir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["coordinate", "counts"])
            w.writerows(zip((f"{c:.6g}" for c in centers),
                            (f"{v:.6g}" for v in vals)))
        written.append(path)

    def write_grid_flat(hist, name: str):
        path = out_dir / name
        write_grid_csv(hist, path, {})
        written.append(path)

    index = None
    if "cube_index.json" in files:
        index = json.loads((directory / "cube_index.json").read_text())

    if figure in ("Fig4", "Fig5", "Fig10"):
        if index is None:
            raise MissingDataError(
                f"figure {figure} needs a tilt cube; run the 'tilt-sweep' "
                f"subcommand first")
        wanted = {
            "Fig4": ([0.05, 0.15], "position"),
            "Fig5": ([0.0, 0.05, 0.10, 0.15, 0.20], "angle"),
            "Fig10": ([0.20], "angle"),
        }[figure]
        tilts, plane = wanted
        have = {round(s["tilt_fraction"], 6): s for s in index["slices"]}
        missing = [t for t in tilts if round(t, 6) not in have]
        if missing:
            raise MissingDataError(
                f"figure {figure} needs tilt fractions {missing} in the cube; "
                f"run 'tilt-sweep' with analysis.tilt_fractions including them")
        for t in tilts:
            s = have[round(t, 6)]
            stem = s[f"{plane}_stem"]
            h = grid(stem, "tilt-sweep")
            write_grid_flat(h, f"{figure.lower()}_tilt{t:.4g}_{plane}.csv")
            write_profile(h, f"{figure.lower()}_tilt{t:.4g}_{plane}_profile.csv")
        if figure == "Fig10" and "dos_projection.csv" in files:
            written.append(directory / "dos_projection.csv")

    elif figure in ("Fig6", "Fig7"):
        path = need("scan.csv", "scan-thickness")
        rows = [r for r in path.read_text().splitlines()
                if r and not r.startswith("#")]
        out = out_dir / f"{figure.lower()}_yield_vs_lambda.csv"
        out.write_text("\n".join(rows) + "\n")
        written.append(out)

    elif figure == "Fig8":
        h = grid("exit_position", "run")
        write_grid_flat(h, "fig8_position.csv")
        write_profile(h, "fig8_profile_x.csv", axis=0)
        write_profile(h, "fig8_profile_y.csv", axis=1)

    elif figure == "Fig9":
        # intensity profiles at several transverse cross-sections of the
        # exit plane (column profiles at fixed x offsets)
        h = grid("exit_position", "run")
        write_grid_flat(h, "fig9_position.csv")
        centers = h.centers(0)
        half = 0.5 * h.dims[0] * h.bin_size
        for frac in (0.0, 0.25, 0.5):
            x_target = frac * half
            col = int(np.argmin(np.abs(centers - x_target)))
            path = out_dir / f"fig9_profile_x{centers[col]:.4g}nm.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["y_nm", "counts"])
                w.writerows(zip((f"{c:.6g}" for c in h.centers(1)),
                                (f"{v}" for v in h.counts[col, :])))
            written.append(path)

    return written
