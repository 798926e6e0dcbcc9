"""Config schema: defaults, validation, round trips and hashing."""

import pytest

from hyperchannel.config import (
    RunConfig,
    config_hash,
    parse_config,
    serialize_config,
)
from hyperchannel.errors import ConfigError

MINIMAL = """
beam:
  energy_mev: 2.0
ensemble:
  thickness_nm: 83.0
  n_particles: 5000
  seed: 42
"""


def test_minimal_config_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.beam.energy_ev == 2.0e6
    assert cfg.thickness_nm == 83.0
    assert cfg.n_particles == 5000
    assert cfg.seed == 42
    # silicon-channel defaults
    assert cfg.crystal.z2 == 14
    assert cfg.crystal.sigma_th_pm == 7.4
    assert cfg.step.dz_nm == pytest.approx(0.543 / 4)
    assert cfg.step.binary_collisions_enabled is True
    assert cfg.potential.model == "moliere"
    assert cfg.histogram.position_bin_nm == 0.005
    assert cfg.analysis.on_axis_radius_nm == 0.0053


def test_empty_config_is_all_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()


def test_roundtrip_serialization():
    cfg = parse_config(MINIMAL)
    text = serialize_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_hash_changes_with_content():
    a = parse_config(MINIMAL)
    b = parse_config(MINIMAL.replace("seed: 42", "seed: 43"))
    assert config_hash(a) != config_hash(b)


def test_tilt_above_regime_rejected():
    text = MINIMAL + "\nbeam2: {}\n"
    doc = """
beam:
  energy_mev: 2.0
  tilt_fraction: 0.25
"""
    with pytest.raises(ConfigError, match="tilt_fraction"):
        parse_config(doc)
    override = """
beam:
  energy_mev: 2.0
  tilt_fraction: 0.25
  allow_tilt_above_range: true
"""
    cfg = parse_config(override)
    assert cfg.beam.tilt_fraction == 0.25


def test_unknown_key_named_in_error():
    doc = MINIMAL + "\nbogus_section: 1\n"
    with pytest.raises(ConfigError, match="bogus_section"):
        parse_config(doc)
    doc = """
beam:
  energy_mev: 2.0
  typo_key: 3
"""
    with pytest.raises(ConfigError, match="beam.typo_key"):
        parse_config(doc)


def test_type_errors_named():
    doc = """
ensemble:
  n_particles: "many"
"""
    with pytest.raises(ConfigError, match="ensemble.n_particles"):
        parse_config(doc)
    doc = """
step:
  scattering: 1
"""
    with pytest.raises(ConfigError, match="step.scattering"):
        parse_config(doc)


def test_schema_version_gate():
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config("schema_version: 99")
    assert parse_config("schema_version: 1") == RunConfig()


def test_malformed_yaml_is_config_error():
    with pytest.raises(ConfigError):
        parse_config("::: not yaml {{{")


def test_bad_potential_model():
    with pytest.raises(ConfigError, match="potential.model"):
        parse_config("potential:\n  model: hartree\n")


def test_born_requires_exponent():
    with pytest.raises(ConfigError, match="born_n"):
        parse_config("potential:\n  born_b_ev_nmn: 1.0e-8\n")
    cfg = parse_config(
        "potential:\n  born_b_ev_nmn: 1.0e-8\n  born_n: 10.0\n")
    assert cfg.potential.born_n == 10.0


def test_explicit_string_list():
    doc = """
crystal:
  strings:
    - {x_nm: 0.1, y_nm: 0.1}
    - {x_nm: -0.1, y_nm: 0.1, period_nm: 0.4}
"""
    cfg = parse_config(doc)
    assert len(cfg.explicit_strings) == 2
    assert cfg.explicit_strings[1].period_nm == 0.4
    geom = cfg.geometry()
    assert geom.n_strings == 2
    text = serialize_config(cfg)
    assert parse_config(text) == cfg


def test_analysis_scan_range_validated():
    with pytest.raises(ConfigError, match="scan_lambda"):
        parse_config("analysis:\n  scan_lambda_min: 0.4\n"
                     "  scan_lambda_max: 0.2\n")


def test_tilt_list_validated():
    with pytest.raises(ConfigError, match="tilt_fractions"):
        parse_config("analysis:\n  tilt_fractions: [0.0, 0.5]\n")


def test_field_and_ensemble_constructors():
    cfg = parse_config(MINIMAL)
    field = cfg.field()
    assert field.geometry.n_strings == 36
    ens = cfg.ensemble()
    assert ens.n_particles == 5000
    assert ens.thickness_nm == 83.0
