"""Single-proton transverse dynamics through the crystal.

Paraxial small-angle equations of motion in depth z,

    dx/dz = theta_x,   d(theta)/dz = -grad U_th(x, y) / (p v),

with p v = T (gamma + 1) / gamma, integrated by classical explicit RK4.
Energy loss follows the local electron-gas stopping power

    -dE/dz = (4 pi Z1^2 e^4 / m_e v^2) n_e ln(2 m_e v^2 / hbar omega_e),

with omega_e = (4 pi e^2 n_e / m_e)^(1/2), evaluated in atomic units; the
angular dispersion grows as d(Omega^2)/dz = (m_e / m_p^2 v^2) (-dE/dz) and
feeds isotropic Gaussian scattering kicks with per-axis variance
d(Omega^2)/2.  Atoms of the string currently nearest to the proton act
through discrete momentum-approximation kicks (thermally displaced), while
that string is left out of the continuum sum so nothing is double counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from . import _bessel, _kernel
from .constants import (
    AU_VELOCITY_M_PER_S,
    BOHR_PER_NM,
    DENSITY_AU_TO_NM3,
    E2_EV_NM,
    STOPPING_AU_TO_EVNM,
)
from .crystal import beta_gamma, proton_pv, proton_velocity, thermal_displacement
from .errors import ConfigError, DomainError, RegimeError
from .potentials import PotentialField

_MP_AU = 1836.15267343
_FOURPI = 4.0 * math.pi

# quarter of the atom spacing along a string, so collision planes line up
# with integration step boundaries
DEFAULT_DZ_NM = 0.543 / 4.0


class Status(IntEnum):
    CHANNELED = 0
    DECHANNELED = 1
    EXITED = 2


@dataclass
class ProtonState:
    """Transverse phase-space point of one proton at depth z."""

    position: np.ndarray
    angle: np.ndarray
    energy_ev: float
    z_nm: float = 0.0
    omega_sq: float = 0.0
    status: Status = Status.CHANNELED

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.angle = np.asarray(self.angle, dtype=float)
        if self.energy_ev <= 0.0:
            raise DomainError("proton kinetic energy must be positive")
        if self.omega_sq < 0.0:
            raise DomainError("omega_sq must be non-negative")


@dataclass(frozen=True)
class StepConfig:
    """Integration step plus the physics toggles and electron-gas numbers."""

    dz_nm: float = DEFAULT_DZ_NM
    stopping_enabled: bool = True
    scattering_enabled: bool = True
    binary_collisions_enabled: bool = True
    z_val: float = 4.0
    z_loc: float = 4.0
    fermi_velocity_m_per_s: float = 2.0936e6

    def __post_init__(self):
        if self.dz_nm <= 0.0:
            raise ConfigError("dz must be positive")
        if self.z_val < 0.0 or self.z_loc < 0.0:
            raise ConfigError("effective electron numbers must be non-negative")


class Derivatives(NamedTuple):
    dx_dz: float
    dy_dz: float
    dtheta_x_dz: float
    dtheta_y_dz: float


def equations_of_motion(state: ProtonState, field) -> Derivatives:
    """Right-hand side of the paraxial equations at the state's position."""
    gx, gy = field.gradient(state.position[0], state.position[1])
    inv_pv = 1.0 / proton_pv(state.energy_ev)
    return Derivatives(state.angle[0], state.angle[1], -gx * inv_pv, -gy * inv_pv)


def rk4_step(state: ProtonState, field, dz_nm: float) -> ProtonState:
    """One classical four-stage Runge-Kutta update of (x, y, theta_x, theta_y).

    Deterministic; energy and omega_sq are untouched.  If the step carries
    the proton beyond the geometry's tracking region the returned state is
    marked Dechanneled (not an error).
    """
    if dz_nm <= 0.0:
        raise DomainError("dz must be positive")
    x, y = state.position
    tx, ty = state.angle
    inv_pv = 1.0 / proton_pv(state.energy_ev)
    half = 0.5 * dz_nm

    def accel(px, py):
        gx, gy = field.gradient(px, py)
        return -gx * inv_pv, -gy * inv_pv

    k1x, k1y = tx, ty
    k1tx, k1ty = accel(x, y)
    k2x, k2y = tx + half * k1tx, ty + half * k1ty
    k2tx, k2ty = accel(x + half * k1x, y + half * k1y)
    k3x, k3y = tx + half * k2tx, ty + half * k2ty
    k3tx, k3ty = accel(x + half * k2x, y + half * k2y)
    k4x, k4y = tx + dz_nm * k3tx, ty + dz_nm * k3ty
    k4tx, k4ty = accel(x + dz_nm * k3x, y + dz_nm * k3y)

    sixth = dz_nm / 6.0
    new_pos = np.array([
        x + sixth * (k1x + 2 * k2x + 2 * k3x + k4x),
        y + sixth * (k1y + 2 * k2y + 2 * k3y + k4y),
    ])
    new_ang = np.array([
        tx + sixth * (k1tx + 2 * k2tx + 2 * k3tx + k4tx),
        ty + sixth * (k1ty + 2 * k2ty + 2 * k3ty + k4ty),
    ])
    status = state.status
    geom = getattr(field, "geometry", None)
    if geom is not None:
        w = geom.tracking_half_width_nm
        if abs(new_pos[0]) > w or abs(new_pos[1]) > w:
            status = Status.DECHANNELED
    return ProtonState(new_pos, new_ang, state.energy_ev, state.z_nm + dz_nm,
                       state.omega_sq, status)


def _velocity_au(energy_ev: float) -> float:
    return proton_velocity(energy_ev) / AU_VELOCITY_M_PER_S


def _energy_of(state) -> float:
    if isinstance(state, ProtonState):
        return state.energy_ev
    return float(state)


def stopping_power(state, n_e_nm3: float) -> float:
    """Electron-gas stopping power -dE/dz [eV/nm] at local density n_e.

    ``state`` may be a ProtonState or a kinetic energy in eV.  Returns zero
    for vanishing density or when the Bethe logarithm's argument drops to
    one or below (very dilute gas).
    """
    if n_e_nm3 < 0.0:
        raise DomainError("electron density must be non-negative")
    if n_e_nm3 == 0.0:
        return 0.0
    v_au = _velocity_au(_energy_of(state))
    n_au = n_e_nm3 / DENSITY_AU_TO_NM3
    omega_e = math.sqrt(_FOURPI * n_au)
    arg = 2.0 * v_au * v_au / omega_e
    if arg <= 1.0:
        return 0.0
    return _FOURPI * n_au / (v_au * v_au) * math.log(arg) * STOPPING_AU_TO_EVNM


def valence_stopping(state, n_atoms_nm3: float, z_val: float, z_loc: float,
                     v_f_m_per_s: float) -> float:
    """Valence-electron stopping power [eV/nm], split into plasma and
    single-particle excitations:

        -dE/dz = (4 pi Z1^2 e^4 / m_e v^2) N [ Z_val ln(v/v_F)
                                             + Z_loc ln(2 m_e v v_F / hbar omega_p) ],

    with omega_p from the total valence density N Z_val.  With
    Z_loc = Z_val it reduces exactly to the local form at n_e = N Z_val.
    """
    if n_atoms_nm3 < 0.0 or z_val < 0.0 or z_loc < 0.0:
        raise DomainError("densities and electron numbers must be non-negative")
    if z_val == 0.0 and z_loc == 0.0:
        return 0.0
    v_au = _velocity_au(_energy_of(state))
    v_f_au = v_f_m_per_s / AU_VELOCITY_M_PER_S
    if v_au <= v_f_au:
        raise RegimeError("valence stopping requires v > v_F")
    n_au = n_atoms_nm3 / DENSITY_AU_TO_NM3
    omega_p = math.sqrt(_FOURPI * n_au * z_val)
    bracket = z_val * math.log(v_au / v_f_au)
    if omega_p > 0.0:
        bracket += z_loc * math.log(2.0 * v_au * v_f_au / omega_p)
    return _FOURPI * n_au / (v_au * v_au) * bracket * STOPPING_AU_TO_EVNM


def dispersion_growth(stopping_ev_nm: float, v_m_per_s: float) -> float:
    """Growth rate of the scattering-angle dispersion,
    d(Omega^2)/dz = (m_e / m_p^2 v^2) (-dE/dz)  [rad^2/nm]."""
    if stopping_ev_nm < 0.0:
        raise DomainError("stopping power must be non-negative")
    v_au = v_m_per_s / AU_VELOCITY_M_PER_S
    s_au = stopping_ev_nm / STOPPING_AU_TO_EVNM
    return s_au / (_MP_AU * _MP_AU * v_au * v_au) * BOHR_PER_NM


def multiple_scattering_kick(d_omega_sq: float, rng: np.random.Generator) -> np.ndarray:
    """One multiple-scattering kick: independent Gaussian components with
    variance d_omega_sq / 2 per axis (isotropic split of Omega^2)."""
    if d_omega_sq < 0.0:
        raise DomainError("dispersion increment must be non-negative")
    if d_omega_sq == 0.0:
        return np.zeros(2)
    return math.sqrt(0.5 * d_omega_sq) * rng.standard_normal(2)


def binary_collision_kick(state: ProtonState, atom_position: np.ndarray,
                          rng_thermal: np.random.Generator,
                          field: PotentialField) -> np.ndarray:
    """Impulse kick [rad] from a single thermally displaced atom.

    The momentum approximation integrates the transverse force of the
    screened point potential along the straight path, giving

        d(theta) = (2 Z1 Z2 e^2 / p v) sum_j alpha_j (beta_j / a) K1(beta_j b / a)

    directed radially away from the atom; b is the transverse offset to the
    displaced atom.  A (measure-zero) head-on configuration is resampled.
    """
    atom = np.asarray(atom_position, dtype=float)
    pv = proton_pv(state.energy_ev)
    model = field.model
    for _ in range(64):
        disp_pm = thermal_displacement(field.sigma_th_pm, rng_thermal)
        offset = state.position - (atom + disp_pm * 1e-3)
        b = math.hypot(offset[0], offset[1])
        if b > 0.0:
            break
    else:
        raise DomainError("could not draw a nonzero impact parameter")
    mag = 0.0
    for al, be in zip(model.alphas, model.betas):
        mag += al * (be / model.a_nm) * _bessel.k1(be * b / model.a_nm)
    mag *= 2.0 * field.z1 * field.z2 * E2_EV_NM / pv
    return mag * offset / b


def transverse_energy(state: ProtonState, field) -> float:
    """E_perp = (p v / 2) |theta|^2 + U_th(x, y) [eV]; conserved by the
    deterministic continuum motion."""
    pv = proton_pv(state.energy_ev)
    u = field.potential(state.position[0], state.position[1])
    return 0.5 * pv * float(state.angle @ state.angle) + u


def _kernel_arrays(field: PotentialField):
    geom = field.geometry
    sx = np.ascontiguousarray(geom._positions[:, 0])
    sy = np.ascontiguousarray(geom._positions[:, 1])
    sw = np.array([2.0 * field.z1 * field.z2 * E2_EV_NM / s.period_nm
                   for s in geom.strings])
    skick = np.array([w * s.period_nm for w, s in zip(sw, geom.strings)])
    szoff = np.array([s.z_offset_nm for s in geom.strings])
    sper = np.array([s.period_nm for s in geom.strings])
    return sx, sy, sw, skick, szoff, sper


def draw_counts(thickness_nm: float, cfg: StepConfig,
                field: PotentialField) -> tuple[int, int]:
    """Numbers of per-step scattering draws and collision-jitter draws a
    trajectory of this length can consume."""
    n_steps = int(math.ceil(thickness_nm / cfg.dz_nm)) + 2
    min_period = min(s.period_nm for s in field.geometry.strings)
    # margin covers extra planes encountered around nearest-string switches
    n_coll = int(math.ceil(thickness_nm / min_period)) + 16
    return n_steps, n_coll


def propagate_trajectory(
    initial: ProtonState,
    field: PotentialField,
    thickness_nm: float,
    cfg: StepConfig,
    rng: np.random.Generator | None = None,
    record_path: bool = False,
):
    """Propagate one proton to depth ``thickness_nm``.

    Returns the final ProtonState, or ``(state, path)`` when
    ``record_path``; ``path`` has columns (z, x, y, theta_x, theta_y, E,
    Omega^2).  The stochastic draws come from ``rng`` in the same order the
    ensemble kernel consumes them, so a by-hand single-particle run matches
    an n=1 ensemble exactly.
    """
    if thickness_nm <= 0.0:
        raise DomainError("thickness must be positive")
    w = field.geometry.tracking_half_width_nm
    if abs(initial.position[0]) > w or abs(initial.position[1]) > w:
        raise DomainError("initial position outside the tracked channel region")

    tables = get_field_tables(field)
    n_steps, n_coll = draw_counts(thickness_nm, cfg, field)
    if rng is not None:
        scat = rng.standard_normal((1, n_steps, 2))
        jit = rng.standard_normal((1, n_coll, 2))
    else:
        scat = np.zeros((1, n_steps, 2))
        jit = np.zeros((1, n_coll, 2))

    xa = np.array([float(initial.position[0])])
    ya = np.array([float(initial.position[1])])
    txa = np.array([float(initial.angle[0])])
    tya = np.array([float(initial.angle[1])])
    ea = np.array([float(initial.energy_ev)])
    om2a = np.array([float(initial.omega_sq)])
    za = np.zeros(1)
    status = np.zeros(1, dtype=np.int64)

    sx, sy, sw, skick, szoff, sper = _kernel_arrays(field)
    born_b, born_n = (0.0, 0.0) if field.born is None else (
        field.born.b_ev_nmn, field.born.n)

    n_path = 1 if record_path else 0
    path_arr = np.full((max(n_path, 1), n_steps + 1, 7), np.nan)
    path_len = np.zeros(max(n_path, 1), dtype=np.int64)
    rec_z = np.empty(0)
    rec_xy = np.empty((0, 1))

    _kernel.propagate_block(
        xa, ya, txa, tya, ea, om2a, za, status,
        sx, sy, sw, skick, szoff, sper,
        tables.frc, tables.dfrc, tables.lap, tables.dlap,
        tables.frc0, tables.dfrc0, tables.u0, tables.inv_du,
        tables.r_min2, tables.r_max2,
        born_b, born_n,
        thickness_nm, cfg.dz_nm, w, 0.1 * field.sigma_th_pm * 1e-3,
        field.sigma_th_pm * 1e-3,
        cfg.stopping_enabled, cfg.scattering_enabled,
        cfg.binary_collisions_enabled,
        scat, jit,
        rec_z, rec_xy, rec_xy.copy(),
        n_path, path_arr, path_len,
    )

    final = ProtonState(
        np.array([xa[0], ya[0]]), np.array([txa[0], tya[0]]),
        ea[0], za[0], om2a[0], Status(int(status[0])),
    )
    if record_path:
        return final, path_arr[0, : path_len[0]]
    return final


def get_field_tables(field: PotentialField) -> _kernel.FieldTables:
    """Radial profile tables for the kernel, built lazily per field."""
    tab = getattr(field, "_kernel_tables", None)
    if tab is None:
        tab = _kernel.build_field_tables(field)
        field._kernel_tables = tab
    return tab
