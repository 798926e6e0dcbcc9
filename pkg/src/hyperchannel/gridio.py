"""Histogram file formats: binary grids and commented CSV.

Binary layout (little-endian throughout):

    magic   4 bytes  b"CHSF"
    version u16      1
    plane   u8       0 = position plane, 1 = angle plane
    nx, ny  u32 each
    origin_x, origin_y, bin_size   f64 each
    counts  u64[nx * ny], C order (y fastest)

The CSV variant carries the same grid plus run metadata in '#'-prefixed
header lines and one "ix,iy,u_center,v_center,count" row per bin.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DomainError
from .montecarlo import FluxHistogram2D

MAGIC = b"CHSF"
VERSION = 1
_PLANE_TAGS = {"position": 0, "angle": 1}
_PLANE_NAMES = {v: k for k, v in _PLANE_TAGS.items()}
_HEADER = struct.Struct("<4sHBIIddd")


def write_grid_binary(hist: FluxHistogram2D, path) -> None:
    nx, ny = hist.counts.shape
    header = _HEADER.pack(
        MAGIC, VERSION, _PLANE_TAGS[hist.plane], nx, ny,
        hist.origin[0], hist.origin[1], hist.bin_size,
    )
    body = np.ascontiguousarray(hist.counts, dtype="<u8").tobytes()
    Path(path).write_bytes(header + body)


def read_grid_binary(path) -> FluxHistogram2D:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DomainError(f"{path}: truncated grid file")
    magic, version, plane, nx, ny, ox, oy, bs = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DomainError(f"{path}: not a CHSF grid file")
    if version != VERSION:
        raise DomainError(f"{path}: unsupported grid version {version}")
    expect = _HEADER.size + 8 * nx * ny
    if len(raw) != expect:
        raise DomainError(f"{path}: wrong payload size")
    counts = np.frombuffer(raw, dtype="<u8", offset=_HEADER.size).reshape(nx, ny)
    counts = counts.astype(np.int64)
    return FluxHistogram2D(
        plane=_PLANE_NAMES[plane],
        origin=(ox, oy),
        bin_size=bs,
        counts=counts,
        n_sampled=int(counts.sum()),
    )


def write_grid_csv(hist: FluxHistogram2D, path, metadata: dict | None = None) -> None:
    nx, ny = hist.counts.shape
    lines = [
        f"# plane={hist.plane}",
        f"# origin={hist.origin[0]:.9g},{hist.origin[1]:.9g}",
        f"# bin_size={hist.bin_size:.9g}",
        f"# dims={nx},{ny}",
        f"# n_sampled={hist.n_sampled}",
    ]
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}={value}")
    lines.append("ix,iy,u_center,v_center,count")
    cu = hist.centers(0)
    cv = hist.centers(1)
    for i in range(nx):
        row = hist.counts[i]
        for j in range(ny):
            lines.append(f"{i},{j},{cu[i]:.9g},{cv[j]:.9g},{row[j]}")
    Path(path).write_text("\n".join(lines) + "\n")
