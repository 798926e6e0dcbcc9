"""Binary grid format and CSV round trips."""

import struct

import numpy as np
import pytest

from hyperchannel.errors import DomainError
from hyperchannel.gridio import (
    MAGIC,
    read_grid_binary,
    write_grid_binary,
    write_grid_csv,
)
from hyperchannel.montecarlo import bin_into, make_histogram


def _sample_hist():
    h = make_histogram("position", 0.05, 0.005)
    rng = np.random.default_rng(1)
    bin_into(h, rng.normal(0, 0.02, 2000), rng.normal(0, 0.02, 2000))
    h.n_sampled = 2000
    return h


def test_binary_roundtrip(tmp_path):
    h = _sample_hist()
    path = tmp_path / "grid.chsf"
    write_grid_binary(h, path)
    back = read_grid_binary(path)
    assert back.plane == h.plane
    assert back.origin == h.origin
    assert back.bin_size == h.bin_size
    np.testing.assert_array_equal(back.counts, h.counts)


def test_binary_header_layout(tmp_path):
    h = _sample_hist()
    path = tmp_path / "grid.chsf"
    write_grid_binary(h, path)
    raw = path.read_bytes()
    assert raw[:4] == MAGIC == b"CHSF"
    version, plane = struct.unpack_from("<HB", raw, 4)
    assert version == 1
    assert plane == 0
    nx, ny = struct.unpack_from("<II", raw, 7)
    assert (nx, ny) == h.counts.shape
    ox, oy, bs = struct.unpack_from("<ddd", raw, 15)
    assert (ox, oy) == h.origin
    assert bs == h.bin_size
    assert len(raw) == 39 + 8 * nx * ny


def test_binary_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.chsf"
    path.write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(DomainError):
        read_grid_binary(path)


def test_binary_rejects_wrong_version(tmp_path):
    h = _sample_hist()
    path = tmp_path / "grid.chsf"
    write_grid_binary(h, path)
    raw = bytearray(path.read_bytes())
    raw[4:6] = struct.pack("<H", 9)
    path.write_bytes(bytes(raw))
    with pytest.raises(DomainError):
        read_grid_binary(path)


def test_binary_rejects_truncation(tmp_path):
    h = _sample_hist()
    path = tmp_path / "grid.chsf"
    write_grid_binary(h, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(DomainError):
        read_grid_binary(path)


def test_csv_carries_metadata(tmp_path):
    h = _sample_hist()
    path = tmp_path / "grid.csv"
    write_grid_csv(h, path, {"seed": 7, "config_hash": "abc123"})
    text = path.read_text().splitlines()
    assert "# plane=position" in text
    assert "# seed=7" in text
    assert "# config_hash=abc123" in text
    header_idx = next(i for i, line in enumerate(text)
                      if not line.startswith("#"))
    assert text[header_idx] == "ix,iy,u_center,v_center,count"
    n_rows = len(text) - header_idx - 1
    assert n_rows == h.counts.size
