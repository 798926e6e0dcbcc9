"""Run configuration: YAML schema, validation, serialisation and hashing.

A config document is a nested key-value mapping with a ``schema_version``
key; unknown keys or versions are rejected outright so that typos never
silently change an experiment.  A minimal document only needs the beam
energy, target thickness, particle count and seed; everything else has the
silicon-channel defaults.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace

import yaml

from .crystal import (
    AtomicString,
    BeamSpec,
    ChannelGeometry,
    CrystalSpec,
    build_channel_strings,
    geometry_from_strings,
)
from .errors import ConfigError
from .montecarlo import (
    DEFAULT_ANGLE_BIN_MRAD,
    DEFAULT_ANGLE_HALFWIDTH_PSI,
    DEFAULT_BLOCK_SIZE,
    DEFAULT_POSITION_BIN_NM,
    EnsembleConfig,
)
from .potentials import BornTerm, PotentialField, ScreeningModel
from .transport import DEFAULT_DZ_NM, StepConfig

SCHEMA_VERSION = 1

MAX_PAPER_TILT_FRACTION = 0.20


@dataclass(frozen=True)
class HistogramConfig:
    position_bin_nm: float = DEFAULT_POSITION_BIN_NM
    angle_bin_mrad: float = DEFAULT_ANGLE_BIN_MRAD
    position_extent: str = "cell"
    angle_halfwidth_psi: float = DEFAULT_ANGLE_HALFWIDTH_PSI


@dataclass(frozen=True)
class AnalysisConfig:
    scan_lambda_min: float = 0.15
    scan_lambda_max: float = 0.35
    scan_points: int = 21
    scan_f_r_hz: float = 5.94e13
    tilt_fractions: tuple[float, ...] = (0.0, 0.05, 0.10, 0.15, 0.20)
    on_axis_radius_nm: float = 0.0053
    rainbow_grid: int = 0          # 0 disables rainbow-line extraction
    record_depths_nm: tuple[float, ...] = ()


@dataclass(frozen=True)
class LaserConfig:
    enabled: bool = False
    wavelength_nm: float = 800.0
    peak_intensity_w_cm2: float = 2.16e18
    photon_energy_ev: float = 27.21
    foreign_z: int = 15
    foreign_center_nm: tuple[float, float] = (0.0, 0.0)
    n_harmonics: int = 4


@dataclass(frozen=True)
class PotentialConfig:
    model: str = "moliere"
    born_b_ev_nmn: float = 0.0
    born_n: float = 0.0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "binary")
    path_dump_count: int = 0


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one batch campaign."""

    crystal: CrystalSpec = CrystalSpec()
    shells: int = 3
    explicit_strings: tuple[AtomicString, ...] = ()
    beam: BeamSpec = BeamSpec()
    n_particles: int = 100_000
    seed: int = 1
    thickness_nm: float = 83.0
    block_size: int = DEFAULT_BLOCK_SIZE
    step: StepConfig = StepConfig()
    potential: PotentialConfig = PotentialConfig()
    histogram: HistogramConfig = HistogramConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    laser: LaserConfig = LaserConfig()
    output: OutputConfig = OutputConfig()
    allow_tilt_above_range: bool = False

    def geometry(self) -> ChannelGeometry:
        if self.explicit_strings:
            s = self.explicit_strings[0].period_nm
            area = self.crystal.lattice_constant_nm ** 2 / 8.0
            half = max(abs(c) for st in self.explicit_strings for c in st.position)
            return geometry_from_strings(list(self.explicit_strings), area, half)
        return build_channel_strings(self.crystal, self.shells)

    def field(self) -> PotentialField:
        model = ScreeningModel.named(self.potential.model, 1, self.crystal.z2)
        born = None
        if self.potential.born_b_ev_nmn != 0.0:
            born = BornTerm(self.potential.born_b_ev_nmn, self.potential.born_n)
        return PotentialField(
            self.geometry(), model, z1=1, z2=self.crystal.z2,
            sigma_th_pm=self.crystal.sigma_th_pm, born=born,
        )

    def ensemble(self) -> EnsembleConfig:
        return EnsembleConfig(
            n_particles=self.n_particles,
            seed=self.seed,
            beam=self.beam,
            thickness_nm=self.thickness_nm,
            record_depths_nm=self.analysis.record_depths_nm,
            block_size=self.block_size,
            position_bin_nm=self.histogram.position_bin_nm,
            angle_bin_mrad=self.histogram.angle_bin_mrad,
            position_extent=self.histogram.position_extent,
            angle_halfwidth_psi=self.histogram.angle_halfwidth_psi,
        )


# ---------------------------------------------------------------------------
# parsing


def _take(mapping: dict, section: str, key: str, default, kind):
    if key not in mapping:
        return default
    value = mapping.pop(key)
    label = f"{section}.{key}" if section else key
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{label}: expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{label}: expected an integer, got {value!r}")
        return int(value)
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{label}: expected true/false, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{label}: expected a string, got {value!r}")
        return value
    if kind == "float_list":
        if not isinstance(value, (list, tuple)) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
        ):
            raise ConfigError(f"{label}: expected a list of numbers")
        return tuple(float(v) for v in value)
    if kind == "str_list":
        if not isinstance(value, (list, tuple)) or any(
            not isinstance(v, str) for v in value
        ):
            raise ConfigError(f"{label}: expected a list of strings")
        return tuple(value)
    raise AssertionError(kind)


def _reject_unknown(mapping: dict, section: str):
    if mapping:
        key = sorted(mapping)[0]
        label = f"{section}.{key}" if section else key
        raise ConfigError(f"unknown configuration key {label!r}")


def _section(doc: dict, name: str) -> dict:
    sec = doc.pop(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return dict(sec)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML config document into a RunConfig."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    doc = dict(doc)

    version = _take(doc, "", "schema_version", SCHEMA_VERSION, int)
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {version}; this build reads "
            f"version {SCHEMA_VERSION}")

    c = _section(doc, "crystal")
    crystal = CrystalSpec(
        z2=_take(c, "crystal", "z2", 14, int),
        lattice_constant_nm=_take(c, "crystal", "lattice_constant_nm", 0.543, float),
        axis=_take(c, "crystal", "axis", "<100>", str),
        string_period_nm=_take(c, "crystal", "string_period_nm", 0.543, float),
        sigma_th_pm=_take(c, "crystal", "sigma_th_pm", 7.4, float),
        temperature_k=_take(c, "crystal", "temperature_k", 4.0, float),
    )
    shells = _take(c, "crystal", "shells", 3, int)
    raw_strings = c.pop("strings", [])
    explicit = []
    if raw_strings:
        if not isinstance(raw_strings, list):
            raise ConfigError("crystal.strings must be a list of mappings")
        for i, ent in enumerate(raw_strings):
            if not isinstance(ent, dict):
                raise ConfigError(f"crystal.strings[{i}] must be a mapping")
            ent = dict(ent)
            explicit.append(AtomicString(
                position=(
                    _take(ent, f"crystal.strings[{i}]", "x_nm", None, float),
                    _take(ent, f"crystal.strings[{i}]", "y_nm", None, float),
                ),
                period_nm=_take(ent, f"crystal.strings[{i}]", "period_nm",
                                crystal.string_period_nm, float),
                z_offset_nm=_take(ent, f"crystal.strings[{i}]", "z_offset_nm",
                                  0.0, float),
            ))
            _reject_unknown(ent, f"crystal.strings[{i}]")
            if explicit[-1].position[0] is None or explicit[-1].position[1] is None:
                raise ConfigError(f"crystal.strings[{i}]: x_nm and y_nm required")
    _reject_unknown(c, "crystal")

    b = _section(doc, "beam")
    allow_tilt = _take(b, "beam", "allow_tilt_above_range", False, bool)
    beam = BeamSpec(
        energy_ev=_take(b, "beam", "energy_mev", 2.0, float) * 1e6,
        tilt_fraction=_take(b, "beam", "tilt_fraction", 0.0, float),
        divergence_mrad=_take(b, "beam", "divergence_mrad", 0.1, float),
        tilt_azimuth_rad=_take(b, "beam", "tilt_azimuth_rad", 0.0, float),
    )
    _reject_unknown(b, "beam")
    if beam.tilt_fraction > MAX_PAPER_TILT_FRACTION and not allow_tilt:
        raise ConfigError(
            f"beam.tilt_fraction={beam.tilt_fraction} exceeds the hyperchanneling "
            f"regime bound {MAX_PAPER_TILT_FRACTION}; set "
            f"beam.allow_tilt_above_range=true to override")

    e = _section(doc, "ensemble")
    n_particles = _take(e, "ensemble", "n_particles", 100_000, int)
    seed = _take(e, "ensemble", "seed", 1, int)
    thickness = _take(e, "ensemble", "thickness_nm", 83.0, float)
    block_size = _take(e, "ensemble", "block_size", DEFAULT_BLOCK_SIZE, int)
    _reject_unknown(e, "ensemble")

    s = _section(doc, "step")
    step = StepConfig(
        dz_nm=_take(s, "step", "dz_nm", DEFAULT_DZ_NM, float),
        stopping_enabled=_take(s, "step", "stopping", True, bool),
        scattering_enabled=_take(s, "step", "scattering", True, bool),
        binary_collisions_enabled=_take(s, "step", "binary_collisions", True, bool),
        z_val=_take(s, "step", "z_val", 4.0, float),
        z_loc=_take(s, "step", "z_loc", 4.0, float),
        fermi_velocity_m_per_s=_take(s, "step", "fermi_velocity_mps", 2.0936e6, float),
    )
    _reject_unknown(s, "step")

    p = _section(doc, "potential")
    potential = PotentialConfig(
        model=_take(p, "potential", "model", "moliere", str),
        born_b_ev_nmn=_take(p, "potential", "born_b_ev_nmn", 0.0, float),
        born_n=_take(p, "potential", "born_n", 0.0, float),
    )
    _reject_unknown(p, "potential")
    if potential.model not in ("moliere", "zbl"):
        raise ConfigError(f"potential.model must be 'moliere' or 'zbl', "
                          f"got {potential.model!r}")
    if potential.born_b_ev_nmn != 0.0 and potential.born_n <= 1.0:
        raise ConfigError("potential.born_n must exceed 1 when the Born term is on")

    h = _section(doc, "histogram")
    hist = HistogramConfig(
        position_bin_nm=_take(h, "histogram", "position_bin_nm",
                              DEFAULT_POSITION_BIN_NM, float),
        angle_bin_mrad=_take(h, "histogram", "angle_bin_mrad",
                             DEFAULT_ANGLE_BIN_MRAD, float),
        position_extent=_take(h, "histogram", "position_extent", "cell", str),
        angle_halfwidth_psi=_take(h, "histogram", "angle_halfwidth_psi",
                                  DEFAULT_ANGLE_HALFWIDTH_PSI, float),
    )
    _reject_unknown(h, "histogram")
    if hist.position_extent not in ("cell", "block"):
        raise ConfigError("histogram.position_extent must be 'cell' or 'block'")

    a = _section(doc, "analysis")
    analysis = AnalysisConfig(
        scan_lambda_min=_take(a, "analysis", "scan_lambda_min", 0.15, float),
        scan_lambda_max=_take(a, "analysis", "scan_lambda_max", 0.35, float),
        scan_points=_take(a, "analysis", "scan_points", 21, int),
        scan_f_r_hz=_take(a, "analysis", "scan_f_r_hz", 5.94e13, float),
        tilt_fractions=_take(a, "analysis", "tilt_fractions",
                             (0.0, 0.05, 0.10, 0.15, 0.20), "float_list"),
        on_axis_radius_nm=_take(a, "analysis", "on_axis_radius_nm", 0.0053, float),
        rainbow_grid=_take(a, "analysis", "rainbow_grid", 0, int),
        record_depths_nm=_take(a, "analysis", "record_depths_nm", (), "float_list"),
    )
    _reject_unknown(a, "analysis")
    if not 0.0 < analysis.scan_lambda_min < analysis.scan_lambda_max <= 0.5:
        raise ConfigError("analysis scan range must satisfy "
                          "0 < scan_lambda_min < scan_lambda_max <= 0.5")
    for tf in analysis.tilt_fractions:
        if tf > MAX_PAPER_TILT_FRACTION and not allow_tilt:
            raise ConfigError(
                f"analysis.tilt_fractions contains {tf} above the regime bound "
                f"{MAX_PAPER_TILT_FRACTION}")

    l = _section(doc, "laser")
    laser = LaserConfig(
        enabled=_take(l, "laser", "enabled", False, bool),
        wavelength_nm=_take(l, "laser", "wavelength_nm", 800.0, float),
        peak_intensity_w_cm2=_take(l, "laser", "peak_intensity_wcm2", 2.16e18, float),
        photon_energy_ev=_take(l, "laser", "photon_energy_ev", 27.21, float),
        foreign_z=_take(l, "laser", "foreign_z", 15, int),
        foreign_center_nm=tuple(
            _take(l, "laser", "foreign_center_nm", (0.0, 0.0), "float_list")),
        n_harmonics=_take(l, "laser", "n_harmonics", 4, int),
    )
    _reject_unknown(l, "laser")
    if len(laser.foreign_center_nm) != 2:
        raise ConfigError("laser.foreign_center_nm must have two components")

    o = _section(doc, "output")
    output = OutputConfig(
        directory=_take(o, "output", "directory", "out", str),
        formats=_take(o, "output", "formats", ("csv", "binary"), "str_list"),
        path_dump_count=_take(o, "output", "path_dump_count", 0, int),
    )
    _reject_unknown(o, "output")
    for fmt in output.formats:
        if fmt not in ("csv", "binary"):
            raise ConfigError(f"output.formats entries must be 'csv' or 'binary', "
                              f"got {fmt!r}")

    _reject_unknown(doc, "")

    cfg = RunConfig(
        crystal=crystal, shells=shells, explicit_strings=tuple(explicit),
        beam=beam, n_particles=n_particles, seed=seed, thickness_nm=thickness,
        block_size=block_size, step=step, potential=potential, histogram=hist,
        analysis=analysis, laser=laser, output=output,
        allow_tilt_above_range=allow_tilt,
    )
    # constructor-level invariants (positive counts etc.)
    cfg.ensemble()
    return cfg


# ---------------------------------------------------------------------------
# serialisation and hashing


def config_document(cfg: RunConfig) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "crystal": {
            "z2": cfg.crystal.z2,
            "lattice_constant_nm": cfg.crystal.lattice_constant_nm,
            "axis": cfg.crystal.axis,
            "string_period_nm": cfg.crystal.string_period_nm,
            "sigma_th_pm": cfg.crystal.sigma_th_pm,
            "temperature_k": cfg.crystal.temperature_k,
            "shells": cfg.shells,
        },
        "beam": {
            "energy_mev": cfg.beam.energy_ev / 1e6,
            "tilt_fraction": cfg.beam.tilt_fraction,
            "divergence_mrad": cfg.beam.divergence_mrad,
            "tilt_azimuth_rad": cfg.beam.tilt_azimuth_rad,
            "allow_tilt_above_range": cfg.allow_tilt_above_range,
        },
        "ensemble": {
            "n_particles": cfg.n_particles,
            "seed": cfg.seed,
            "thickness_nm": cfg.thickness_nm,
            "block_size": cfg.block_size,
        },
        "step": {
            "dz_nm": cfg.step.dz_nm,
            "stopping": cfg.step.stopping_enabled,
            "scattering": cfg.step.scattering_enabled,
            "binary_collisions": cfg.step.binary_collisions_enabled,
            "z_val": cfg.step.z_val,
            "z_loc": cfg.step.z_loc,
            "fermi_velocity_mps": cfg.step.fermi_velocity_m_per_s,
        },
        "potential": {
            "model": cfg.potential.model,
            "born_b_ev_nmn": cfg.potential.born_b_ev_nmn,
            "born_n": cfg.potential.born_n,
        },
        "histogram": {
            "position_bin_nm": cfg.histogram.position_bin_nm,
            "angle_bin_mrad": cfg.histogram.angle_bin_mrad,
            "position_extent": cfg.histogram.position_extent,
            "angle_halfwidth_psi": cfg.histogram.angle_halfwidth_psi,
        },
        "analysis": {
            "scan_lambda_min": cfg.analysis.scan_lambda_min,
            "scan_lambda_max": cfg.analysis.scan_lambda_max,
            "scan_points": cfg.analysis.scan_points,
            "scan_f_r_hz": cfg.analysis.scan_f_r_hz,
            "tilt_fractions": list(cfg.analysis.tilt_fractions),
            "on_axis_radius_nm": cfg.analysis.on_axis_radius_nm,
            "rainbow_grid": cfg.analysis.rainbow_grid,
            "record_depths_nm": list(cfg.analysis.record_depths_nm),
        },
        "laser": {
            "enabled": cfg.laser.enabled,
            "wavelength_nm": cfg.laser.wavelength_nm,
            "peak_intensity_wcm2": cfg.laser.peak_intensity_w_cm2,
            "photon_energy_ev": cfg.laser.photon_energy_ev,
            "foreign_z": cfg.laser.foreign_z,
            "foreign_center_nm": list(cfg.laser.foreign_center_nm),
            "n_harmonics": cfg.laser.n_harmonics,
        },
        "output": {
            "directory": cfg.output.directory,
            "formats": list(cfg.output.formats),
            "path_dump_count": cfg.output.path_dump_count,
        },
    }
    if cfg.explicit_strings:
        doc["crystal"]["strings"] = [
            {"x_nm": s.position[0], "y_nm": s.position[1],
             "period_nm": s.period_nm, "z_offset_nm": s.z_offset_nm}
            for s in cfg.explicit_strings
        ]
    return doc


def serialize_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_document(cfg), sort_keys=True)


def config_hash(cfg: RunConfig) -> str:
    """Stable digest of the canonicalised config content."""
    canon = json.dumps(config_document(cfg), sort_keys=True,
                       separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
