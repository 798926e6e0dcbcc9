"""Post-processing: impact-parameter maps, rainbow lines, peak widths,
thickness and tilt scans, and confinement metrics.

The rainbow analysis samples the deterministic impact-parameter map (all
stochastic physics disabled) on a regular entry grid, forms the Jacobian

    J_r = (dx'/dx)(dy'/dy) - (dx'/dy)(dy'/dx)

by central differences, and extracts its zero-level contours, along which
the exit yield is singular (caustics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import AU_TIME_S, DENSITY_AU_TO_NM3, HARTREE_EV
from .crystal import BeamSpec, critical_angle, proton_velocity, thickness_for_reduced
from .errors import DomainError, NoPeakError
from .montecarlo import (
    EnsembleConfig,
    FluxHistogram2D,
    flux_enhancement,
    on_axis_yield,
    run_ensemble,
)
from .potentials import PotentialField
from .transport import StepConfig, get_field_tables, _kernel_arrays
from . import _kernel

_FOURPI = 4.0 * math.pi


# ---------------------------------------------------------------------------
# deterministic impact-parameter map and its Jacobian


@dataclass
class MapSamples:
    """Deterministic map on a regular entry grid; NaN where dechanneled."""

    x: np.ndarray            # (nx,) entry abscissas
    y: np.ndarray            # (ny,)
    exit_x: np.ndarray       # (nx, ny)
    exit_y: np.ndarray
    exit_tx: np.ndarray
    exit_ty: np.ndarray
    target: str              # "position" or "angle"

    def targets(self) -> tuple[np.ndarray, np.ndarray]:
        if self.target == "position":
            return self.exit_x, self.exit_y
        return self.exit_tx, self.exit_ty


@dataclass
class JacobianField:
    """Jacobian of the impact-parameter map on the sampling grid."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray       # (nx, ny)
    map_target: str


def deterministic_map(
    field: PotentialField,
    energy_ev: float,
    thickness_nm: float,
    grid_n: int = 61,
    tilt_fraction: float = 0.0,
    tilt_azimuth_rad: float = 0.0,
    extent_nm: float | None = None,
    dz_nm: float | None = None,
    target: str = "position",
) -> MapSamples:
    """Sample the entry -> exit map with all stochastic physics disabled."""
    geom = field.geometry
    if extent_nm is None:
        extent_nm = 0.5 * geom.string_spacing_nm
    xs = np.linspace(-extent_nm, extent_nm, grid_n)
    ys = np.linspace(-extent_nm, extent_nm, grid_n)
    step = StepConfig(
        dz_nm=dz_nm if dz_nm is not None else StepConfig().dz_nm,
        stopping_enabled=False,
        scattering_enabled=False,
        binary_collisions_enabled=False,
    )
    psi_c = critical_angle(energy_ev, field.z1, field.z2,
                           geom.strings[0].period_nm)
    t0 = tilt_fraction * psi_c
    tx0 = t0 * math.cos(tilt_azimuth_rad)
    ty0 = t0 * math.sin(tilt_azimuth_rad)

    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    n = gx.size
    xa = gx.ravel().copy()
    ya = gy.ravel().copy()
    txa = np.full(n, tx0)
    tya = np.full(n, ty0)
    ea = np.full(n, energy_ev)
    om2a = np.zeros(n)
    za = np.zeros(n)
    statusa = np.zeros(n, dtype=np.int64)

    tables = get_field_tables(field)
    sx, sy, sw, skick, szoff, sper = _kernel_arrays(field)
    born_b, born_n = (0.0, 0.0) if field.born is None else (
        field.born.b_ev_nmn, field.born.n)
    dummy = np.zeros((1, 1, 2))
    path_arr = np.full((1, 2, 7), np.nan)
    path_len = np.zeros(1, dtype=np.int64)
    rec_z = np.empty(0)
    rec_xy = np.empty((0, 1))

    _kernel.propagate_block(
        xa, ya, txa, tya, ea, om2a, za, statusa,
        sx, sy, sw, skick, szoff, sper,
        tables.frc, tables.dfrc, tables.lap, tables.dlap,
        tables.frc0, tables.dfrc0, tables.u0, tables.inv_du,
        tables.r_min2, tables.r_max2,
        born_b, born_n,
        thickness_nm, step.dz_nm,
        geom.tracking_half_width_nm, 0.1 * field.sigma_th_pm * 1e-3,
        field.sigma_th_pm * 1e-3,
        False, False, False,
        dummy, dummy,
        rec_z, rec_xy, rec_xy.copy(),
        0, path_arr, path_len,
    )

    bad = statusa != _kernel.STATUS_EXITED
    for arr in (xa, ya, txa, tya):
        arr[bad] = np.nan
    shape = (grid_n, grid_n)
    return MapSamples(
        x=xs, y=ys,
        exit_x=xa.reshape(shape), exit_y=ya.reshape(shape),
        exit_tx=txa.reshape(shape), exit_ty=tya.reshape(shape),
        target=target,
    )


def jacobian_field(samples: MapSamples) -> JacobianField:
    """J_r by central differences; one-sided at the grid boundary."""
    xs, ys = samples.x, samples.y
    if len(xs) < 2 or len(ys) < 2:
        raise DomainError("map grid must have at least 2 points per axis")
    hx = np.diff(xs)
    hy = np.diff(ys)
    if not (np.allclose(hx, hx[0]) and np.allclose(hy, hy[0])):
        raise DomainError("map grid must be regular")
    u, v = samples.targets()
    du_dx, du_dy = np.gradient(u, xs, ys, edge_order=1)
    dv_dx, dv_dy = np.gradient(v, xs, ys, edge_order=1)
    return JacobianField(
        x=xs, y=ys,
        values=du_dx * dv_dy - du_dy * dv_dx,
        map_target=samples.target,
    )


# ---------------------------------------------------------------------------
# marching-squares contour extraction

_EDGE_VERTS = ((0, 1), (1, 2), (2, 3), (3, 0))   # cell corners per edge


def _cell_corners(i, j):
    return ((i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1))


def extract_rainbow_lines(jf: JacobianField, iso: float = 0.0) -> list[np.ndarray]:
    """Zero-level contours of the Jacobian as polylines [(m, 2) arrays].

    Plain marching squares with linear interpolation; cells touching
    undefined (NaN) samples are skipped, so no spurious lines appear along
    the dechanneled region's border.  Segments sharing endpoints are chained
    into polylines; closed loops have identical first and last vertices.
    """
    vals = jf.values - iso
    xs, ys = jf.x, jf.y
    nx, ny = vals.shape
    segments = []

    for i in range(nx - 1):
        for j in range(ny - 1):
            corners = _cell_corners(i, j)
            cv = [vals[a, b] for a, b in corners]
            if any(np.isnan(c) for c in cv):
                continue
            pts = []
            for (a, b) in _EDGE_VERTS:
                va, vb = cv[a], cv[b]
                if (va > 0.0) == (vb > 0.0) or va == vb:
                    continue
                t = va / (va - vb)
                (ia, ja), (ib, jb) = corners[a], corners[b]
                px = xs[ia] + t * (xs[ib] - xs[ia])
                py = ys[ja] + t * (ys[jb] - ys[ja])
                pts.append((px, py))
            if len(pts) == 2:
                segments.append((pts[0], pts[1]))
            elif len(pts) == 4:
                # saddle cell: pair edges arbitrarily but consistently
                segments.append((pts[0], pts[1]))
                segments.append((pts[2], pts[3]))

    # a contour passing exactly through a grid node produces zero-length
    # segments; they carry no geometry and would break the chains
    segments = [
        (a, b) for a, b in segments
        if abs(a[0] - b[0]) > 1e-12 or abs(a[1] - b[1]) > 1e-12
    ]
    return _chain_segments(segments)


def _chain_segments(segments) -> list[np.ndarray]:
    def key(p):
        return (round(p[0], 9), round(p[1], 9))

    by_end: dict = {}
    for si, (a, b) in enumerate(segments):
        by_end.setdefault(key(a), []).append((si, 0))
        by_end.setdefault(key(b), []).append((si, 1))

    used = [False] * len(segments)
    lines = []
    for start in range(len(segments)):
        if used[start]:
            continue
        used[start] = True
        a, b = segments[start]
        chain = [a, b]
        # extend forward then backward
        for reverse in (False, True):
            while True:
                tip = key(chain[0] if reverse else chain[-1])
                nxt = None
                for si, end in by_end.get(tip, ()):
                    if not used[si]:
                        nxt = (si, end)
                        break
                if nxt is None:
                    break
                si, end = nxt
                used[si] = True
                sa, sb = segments[si]
                new_pt = sb if end == 0 else sa
                if reverse:
                    chain.insert(0, new_pt)
                else:
                    chain.append(new_pt)
        lines.append(np.array(chain))
    return lines


def is_closed(line: np.ndarray, tol: float = 1e-9) -> bool:
    return len(line) > 2 and np.allclose(line[0], line[-1], atol=tol)


# ---------------------------------------------------------------------------
# profiles and widths


def fwhm(abscissa: np.ndarray, values: np.ndarray) -> float:
    """Full width at half maximum of a sampled single-peak profile.

    The baseline is the mean of the outer ten percent of samples (split
    between both ends); crossings of the half level are linearly
    interpolated.  Raises NoPeakError when no sample rises above baseline.
    """
    x = np.asarray(abscissa, dtype=float)
    v = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.shape != v.shape or len(x) < 4:
        raise DomainError("profile must be two equal-length 1D arrays")
    k = max(1, int(round(0.05 * len(v))))
    baseline = float(np.mean(np.concatenate([v[:k], v[-k:]])))
    peak_idx = int(np.argmax(v))
    peak = v[peak_idx]
    if peak <= baseline:
        raise NoPeakError("profile has no peak above its baseline")
    half = baseline + 0.5 * (peak - baseline)

    def cross(idx_range):
        # first sample below the half level walking away from the peak
        prev = peak_idx
        last = peak_idx
        for i in idx_range:
            if v[i] < half:
                t = (half - v[i]) / (v[prev] - v[i])
                return x[i] + t * (x[prev] - x[i])
            prev = i
            last = i
        return x[last]

    left = cross(range(peak_idx - 1, -1, -1))
    right = cross(range(peak_idx + 1, len(v)))
    return float(abs(right - left))


def histogram_profile(hist: FluxHistogram2D, axis: int = 0,
                      through: str = "peak") -> tuple[np.ndarray, np.ndarray]:
    """1D profile of a 2D histogram along ``axis`` through its peak row or
    integrated over the other axis (``through='sum'``)."""
    if through == "sum":
        vals = hist.counts.sum(axis=1 - axis)
    elif through == "peak":
        pk = np.unravel_index(np.argmax(hist.counts), hist.counts.shape)
        vals = hist.counts[:, pk[1]] if axis == 0 else hist.counts[pk[0], :]
    else:
        raise DomainError("through must be 'peak' or 'sum'")
    return hist.centers(axis), vals.astype(float)


def count_local_maxima(values: np.ndarray, prominence: float,
                       min_separation: int = 2) -> int:
    """Number of local maxima with at least the given prominence.

    Prominence of a peak is its height above the higher of the two valley
    floors separating it from taller terrain (or the profile ends); peaks
    closer than ``min_separation`` samples merge into the taller one.
    """
    v = np.asarray(values, dtype=float)
    n = len(v)
    peaks = [i for i in range(1, n - 1) if v[i] >= v[i - 1] and v[i] > v[i + 1]]
    kept = []
    for p in peaks:
        left_base = v[p]
        i = p - 1
        while i >= 0 and v[i] <= v[p]:
            left_base = min(left_base, v[i])
            i -= 1
        if i < 0:
            left_base = v[: p + 1].min()
        right_base = v[p]
        i = p + 1
        while i < n and v[i] <= v[p]:
            right_base = min(right_base, v[i])
            i += 1
        if i >= n:
            right_base = v[p:].min()
        if v[p] - max(left_base, right_base) >= prominence:
            if kept and p - kept[-1] < min_separation:
                if v[p] > v[kept[-1]]:
                    kept[-1] = p
            else:
                kept.append(p)
    return len(kept)


# ---------------------------------------------------------------------------
# scans


@dataclass
class YieldScan:
    """On-axis yield versus reduced thickness."""

    lambda_values: np.ndarray
    thickness_nm: np.ndarray
    axial_yield: np.ndarray
    enhancement: np.ndarray
    tilt_fraction: float
    on_axis_radius_nm: float


def yield_vs_thickness(
    field: PotentialField,
    beam: BeamSpec,
    lambda_values,
    n_particles: int,
    seed: int,
    step_cfg: StepConfig | None = None,
    f_r_hz: float = 5.94e13,
    on_axis_radius_nm: float = 0.0053,
    threads: int | None = None,
    keep_results: bool = False,
):
    """Run one ensemble per reduced thickness and record the on-axis yield
    (exits within ``on_axis_radius_nm``, one tenth of the Bohr radius by
    default) plus the cell flux enhancement."""
    lam = np.asarray(lambda_values, dtype=float)
    if np.any(lam <= 0.0) or np.any(np.diff(lam) <= 0.0):
        raise DomainError("lambda values must be positive and increasing")
    step_cfg = step_cfg or StepConfig()
    v0 = proton_velocity(beam.energy_ev)
    thick = np.array([thickness_for_reduced(l, f_r_hz, v0) for l in lam])
    yields = np.zeros(len(lam))
    enh = np.zeros(len(lam))
    results = []
    for i, length in enumerate(thick):
        cfg = EnsembleConfig(
            n_particles=n_particles, seed=seed, beam=beam, thickness_nm=length)
        res = run_ensemble(cfg, field, step_cfg, threads=threads)
        yields[i] = on_axis_yield(res, on_axis_radius_nm)
        enh[i] = flux_enhancement(res.position_hist,
                                  field.geometry.cell_area_nm2)
        if keep_results:
            results.append(res)
    scan = YieldScan(lam, thick, yields, enh, beam.tilt_fraction,
                     on_axis_radius_nm)
    return (scan, results) if keep_results else scan


@dataclass
class TiltScanCube:
    """Per-tilt stacks of exit-plane histograms sharing grid metadata."""

    tilt_fractions: np.ndarray
    position_slices: list[FluxHistogram2D]
    angle_slices: list[FluxHistogram2D]
    normalization: np.ndarray       # total counts per position slice


def tilt_sweep(
    field: PotentialField,
    beam: BeamSpec,
    tilt_fractions,
    n_particles: int,
    seed: int,
    thickness_nm: float,
    step_cfg: StepConfig | None = None,
    threads: int | None = None,
) -> TiltScanCube:
    """One ensemble per tilt fraction; stacks position and angle planes."""
    fractions = np.asarray(tilt_fractions, dtype=float)
    step_cfg = step_cfg or StepConfig()
    pos_slices = []
    ang_slices = []
    totals = []
    for tf in fractions:
        b = BeamSpec(beam.energy_ev, float(tf), beam.divergence_mrad,
                     beam.tilt_azimuth_rad)
        cfg = EnsembleConfig(n_particles=n_particles, seed=seed, beam=b,
                             thickness_nm=thickness_nm)
        res = run_ensemble(cfg, field, step_cfg, threads=threads)
        pos_slices.append(res.position_hist)
        ang_slices.append(res.angle_hist)
        totals.append(res.position_hist.counts.sum())
    return TiltScanCube(fractions, pos_slices, ang_slices, np.array(totals))


def dos_projection(cube: TiltScanCube) -> np.ndarray:
    """Equal-weight back-projection: count-normalised average of the
    position slices; integrates to one over the grid."""
    acc = None
    used = 0
    for h in cube.position_slices:
        total = h.counts.sum()
        if total == 0:
            continue
        sl = h.counts / total
        acc = sl if acc is None else acc + sl
        used += 1
    if acc is None or used == 0:
        raise DomainError("tilt cube has no populated slices")
    return acc / used


# ---------------------------------------------------------------------------
# confinement metrics


@dataclass(frozen=True)
class ConfinementMetrics:
    """Confinement degree and discretised transverse energy scale."""

    c_nm: float
    energy_script_e_ev: float
    s_nm: float
    omega_e_rad_s: float
    omega_rad: float
    f_r_hz: float


def confinement_metrics(s_nm: float, omega_rad: float, n_e_nm3: float,
                        f_r_hz: float, a_nm: float) -> ConfinementMetrics:
    """C = sqrt(1 + omega_e / Omega) s and script-E = (s/a) f_r hbar omega_e.

    Both expressions are evaluated verbatim in atomic units (hbar = 1,
    omega_e and f_r as inverse atomic time units) and the energy-like
    number converted through the Hartree.  The formulas' unit bookkeeping is
    unconventional; values are reported with the units stated here.
    """
    if s_nm < 0.0 or n_e_nm3 < 0.0 or f_r_hz < 0.0:
        raise DomainError("inputs must be non-negative")
    if a_nm <= 0.0:
        raise DomainError("screening radius must be positive")
    if omega_rad == 0.0:
        raise DomainError("confinement degree diverges at Omega = 0")
    n_au = n_e_nm3 / DENSITY_AU_TO_NM3
    omega_e_au = math.sqrt(_FOURPI * n_au)
    omega_e_rad_s = omega_e_au / AU_TIME_S
    c_nm = math.sqrt(1.0 + omega_e_au / omega_rad) * s_nm
    f_r_au = f_r_hz * AU_TIME_S
    script_e = (s_nm / a_nm) * f_r_au * omega_e_au * HARTREE_EV
    return ConfinementMetrics(
        c_nm=c_nm,
        energy_script_e_ev=script_e,
        s_nm=s_nm,
        omega_e_rad_s=omega_e_rad_s,
        omega_rad=omega_rad,
        f_r_hz=f_r_hz,
    )
