"""Channel geometry and beam kinematics for axial channeling in silicon.

The default geometry is the square-coordination string layout obtained by
projecting the diamond lattice along a cube axis: the atomic strings form a
45-degree rotated square lattice with transverse spacing a / (2 sqrt(2)),
one atom per period d = a along each string, and column phases staggered in
quarters of d (the fourfold screw arrangement of the diamond structure).
The channel centre sits in the middle of four strings.  Three square
coordination shells around the centre hold 4 + 12 + 20 = 36 strings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import C_M_PER_S, E2_EV_NM, PROTON_MASS_EV
from .errors import ConfigError, DomainError

SUPPORTED_AXES = ("<100>", "<111>")

# z-phase of a string column, in quarters of the period, keyed by the parity
# of its (i, j) index on the rotated square lattice
_Z_PHASE_QUARTERS = {(1, 0): 0, (0, 0): 1, (0, 1): 2, (1, 1): 3}


@dataclass(frozen=True)
class CrystalSpec:
    """Crystal parameters of the channeling target.

    ``sigma_th_pm`` is the one-dimensional thermal vibration amplitude; the
    silicon default 7.4 pm corresponds to a 4 K lattice.
    """

    z2: int = 14
    lattice_constant_nm: float = 0.543
    axis: str = "<100>"
    string_period_nm: float = 0.543
    sigma_th_pm: float = 7.4
    temperature_k: float = 4.0

    def __post_init__(self):
        if self.z2 < 1:
            raise ConfigError("z2 must be >= 1")
        if self.lattice_constant_nm <= 0.0:
            raise ConfigError("lattice_constant_nm must be positive")
        if self.string_period_nm <= 0.0:
            raise ConfigError("string_period_nm must be positive")
        if self.sigma_th_pm < 0.0:
            raise ConfigError("sigma_th_pm must be non-negative")
        if self.axis not in SUPPORTED_AXES:
            raise ConfigError(
                f"unsupported axis {self.axis!r}; supported: {SUPPORTED_AXES}"
            )


@dataclass(frozen=True)
class AtomicString:
    """A single atomic string: transverse position, period and z phase."""

    position: tuple[float, float]
    period_nm: float
    z_offset_nm: float = 0.0
    shell: int = 0

    def __post_init__(self):
        if self.period_nm <= 0.0:
            raise ConfigError("string period must be positive")


@dataclass(frozen=True)
class ChannelGeometry:
    """String layout of one axial channel plus its derived extents.

    ``cell_area_nm2`` is the area of the channel unit cell (the square with
    the four nearest strings at its corners); ``tracking_half_width_nm`` is
    the half-width of the region in which the modelled strings fully wall
    the neighbouring channels, used as the dechanneling boundary.
    """

    strings: tuple[AtomicString, ...]
    channel_center: tuple[float, float] = (0.0, 0.0)
    cell_area_nm2: float = 0.0
    string_spacing_nm: float = 0.0
    tracking_half_width_nm: float = 0.0

    _positions: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        pos = np.array([s.position for s in self.strings], dtype=float)
        object.__setattr__(self, "_positions", pos)

    def positions(self) -> np.ndarray:
        """String positions as an (n, 2) array [nm]."""
        return self._positions.copy()

    @property
    def n_strings(self) -> int:
        return len(self.strings)


def build_channel_strings(spec: CrystalSpec, shells: int = 3) -> ChannelGeometry:
    """Generate the strings on the first ``shells`` square coordination lines.

    Strings are ordered by shell, then by azimuth from the channel centre;
    positions are exact multiples of the lattice-constant fractions, so the
    output does not depend on floating-point summation order.
    """
    if shells < 1:
        raise ConfigError("shells must be >= 1")
    # axis validity checked by CrystalSpec

    a = spec.lattice_constant_nm
    s = a / (2.0 * math.sqrt(2.0))
    d = spec.string_period_nm

    entries = []
    for i in range(-shells, shells):
        for j in range(-shells, shells):
            half_i = i + 0.5
            half_j = j + 0.5
            shell = int(max(abs(half_i), abs(half_j)) + 0.5)
            if shell > shells:
                continue
            phase = _Z_PHASE_QUARTERS[(i % 2, j % 2)]
            x = half_i * s
            y = half_j * s
            angle = math.atan2(y, x) % (2.0 * math.pi)
            entries.append(
                (shell, angle, AtomicString((x, y), d, phase * d / 4.0, shell))
            )

    entries.sort(key=lambda e: (e[0], e[1]))
    strings = tuple(e[2] for e in entries)

    return ChannelGeometry(
        strings=strings,
        channel_center=(0.0, 0.0),
        cell_area_nm2=s * s,
        string_spacing_nm=s,
        tracking_half_width_nm=(shells - 0.5) * s,
    )


def geometry_from_strings(
    strings: list[AtomicString], cell_area_nm2: float, tracking_half_width_nm: float
) -> ChannelGeometry:
    """Wrap an explicit string list (arbitrary axes) into a geometry."""
    if not strings:
        raise ConfigError("string list must not be empty")
    spacing = math.sqrt(cell_area_nm2)
    return ChannelGeometry(
        strings=tuple(strings),
        cell_area_nm2=cell_area_nm2,
        string_spacing_nm=spacing,
        tracking_half_width_nm=tracking_half_width_nm,
    )


@dataclass(frozen=True)
class BeamSpec:
    """Incident beam: kinetic energy, tilt as a fraction of the critical
    angle, Gaussian divergence, and tilt azimuth in the transverse plane."""

    energy_ev: float = 2.0e6
    tilt_fraction: float = 0.0
    divergence_mrad: float = 0.1
    tilt_azimuth_rad: float = 0.0

    def __post_init__(self):
        if self.energy_ev <= 0.0:
            raise ConfigError("beam energy must be positive")
        if not 0.0 <= self.tilt_fraction < 1.0:
            raise ConfigError("tilt_fraction must lie in [0, 1)")
        if self.divergence_mrad < 0.0:
            raise ConfigError("divergence must be non-negative")


def critical_angle(e0_ev: float, z1: int, z2: int, d_nm: float) -> float:
    """Lindhard critical angle psi_c = sqrt(2 Z1 Z2 e^2 / (d E0)) [rad]."""
    if e0_ev <= 0.0 or z1 <= 0 or z2 <= 0 or d_nm <= 0.0:
        raise DomainError("critical_angle requires strictly positive inputs")
    return math.sqrt(2.0 * z1 * z2 * E2_EV_NM / (d_nm * e0_ev))


def beta_gamma(e0_ev: float) -> tuple[float, float]:
    """Relativistic (beta, gamma) of a proton with kinetic energy e0_ev."""
    if e0_ev <= 0.0:
        raise DomainError("kinetic energy must be positive")
    gamma = 1.0 + e0_ev / PROTON_MASS_EV
    beta = math.sqrt(1.0 - 1.0 / (gamma * gamma))
    return beta, gamma


def proton_velocity(e0_ev: float) -> float:
    """Proton speed [m/s] from relativistic kinematics."""
    beta, _ = beta_gamma(e0_ev)
    return beta * C_M_PER_S


def proton_pv(e0_ev: float) -> float:
    """Momentum times velocity, p v = T (gamma + 1) / gamma [eV].

    This is the stiffness entering the small-angle equations of motion,
    d(theta)/dz = -grad U / (p v).
    """
    _, gamma = beta_gamma(e0_ev)
    return e0_ev * (gamma + 1.0) / gamma


def reduced_thickness(f_r_hz: float, thickness_nm: float, v0_m_per_s: float) -> float:
    """Reduced thickness Lambda = f_r L / v0 (transverse quarter-period count
    at Lambda = 0.25)."""
    if f_r_hz <= 0.0 or v0_m_per_s <= 0.0:
        raise DomainError("f_r and v0 must be positive")
    if thickness_nm < 0.0:
        raise DomainError("thickness must be non-negative")
    return f_r_hz * (thickness_nm * 1e-9) / v0_m_per_s


def thickness_for_reduced(lam: float, f_r_hz: float, v0_m_per_s: float) -> float:
    """Invert the reduced thickness: L [nm] such that f_r L / v0 = lam."""
    if lam < 0.0:
        raise DomainError("reduced thickness must be non-negative")
    if f_r_hz <= 0.0 or v0_m_per_s <= 0.0:
        raise DomainError("f_r and v0 must be positive")
    return lam * v0_m_per_s / f_r_hz * 1e9


def thermal_displacement(sigma_th_pm: float, rng: np.random.Generator) -> np.ndarray:
    """One thermal displacement of a lattice atom: independent Gaussian
    samples per transverse axis with standard deviation sigma_th [pm]."""
    if sigma_th_pm < 0.0:
        raise DomainError("sigma_th must be non-negative")
    if sigma_th_pm == 0.0:
        return np.zeros(2)
    return sigma_th_pm * rng.standard_normal(2)
