"""Kramers-Henneberger dressed potentials of a laser-driven foreign atom.

In the oscillating frame of a free charge quivering with amplitude
alpha0 = F0 / omega^2 (atomic units), the screened atomic potential becomes
time periodic and expands into Fourier harmonics over the optical cycle,

    V_n(r) = (1/2pi) int_0^{2pi} V(|r_vec + alpha_vec(tau)|) e^{-i n tau} dtau.

The quiver path is circular (circular polarisation), so the distance only
depends on cos(tau) and every V_n is real with V_{-n} = V_n.  The cycle
average V_0 governs stabilisation: for alpha0 >> a it flattens into a ring
potential peaked near r = alpha0 (on the ring itself the average diverges
logarithmically, like the potential of a charged ring).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .constants import AU_INTENSITY_W_CM2, BOHR_RADIUS_NM, HARTREE_EV
from .errors import DomainError, NumericsError
from .potentials import PotentialField, ScreeningModel, point_potential

_QUAD_LIMIT = 400
_QUAD_TOL = 1e-10


@dataclass(frozen=True)
class LaserParams:
    """Dressing-laser parameters; field amplitude and quiver in atomic units."""

    wavelength_nm: float
    peak_intensity_w_cm2: float
    photon_energy_ev: float
    field_amplitude_au: float
    alpha0_au: float

    @classmethod
    def from_intensity(cls, peak_intensity_w_cm2: float,
                       photon_energy_ev: float = 27.21,
                       wavelength_nm: float = 800.0) -> "LaserParams":
        if peak_intensity_w_cm2 <= 0.0 or photon_energy_ev <= 0.0:
            raise DomainError("intensity and photon energy must be positive")
        f0 = field_amplitude_from_intensity(peak_intensity_w_cm2)
        omega = photon_energy_ev / HARTREE_EV
        return cls(wavelength_nm, peak_intensity_w_cm2, photon_energy_ev,
                   f0, quiver_amplitude(f0, omega))


def field_amplitude_from_intensity(intensity_w_cm2: float) -> float:
    """Peak field F0 [au] of a plane wave of the given intensity."""
    if intensity_w_cm2 < 0.0:
        raise DomainError("intensity must be non-negative")
    return math.sqrt(intensity_w_cm2 / AU_INTENSITY_W_CM2)


def quiver_amplitude(f0_au: float, omega_au: float) -> float:
    """Free-charge quiver radius alpha0 = F0 / omega^2 [au]."""
    if omega_au <= 0.0:
        raise DomainError("quiver amplitude diverges at zero frequency")
    return f0_au / (omega_au * omega_au)


def kh_fourier_component(model: ScreeningModel, z1: int, z2: int,
                         alpha0_nm: float, n: int, r_nm: float) -> float:
    """n-th Fourier component V_n(r) [eV] of the dressed point potential.

    Adaptive quadrature over the circular quiver path of radius
    ``alpha0_nm``; by symmetry the integrand reduces to a cosine transform
    and the result is real.  Exactly on the quiver ring (r = alpha0) the
    cycle average is singular.
    """
    if r_nm < 0.0:
        raise DomainError("radius must be non-negative")
    if alpha0_nm < 0.0:
        raise DomainError("quiver amplitude must be non-negative")
    if alpha0_nm == 0.0:
        if n == 0:
            return point_potential(model, z1, z2, r_nm)
        return 0.0
    if abs(r_nm - alpha0_nm) < 1e-12:
        raise DomainError("cycle average diverges on the quiver ring")

    def integrand(tau):
        d = math.sqrt(r_nm * r_nm + alpha0_nm * alpha0_nm
                      + 2.0 * r_nm * alpha0_nm * math.cos(tau))
        return point_potential(model, z1, z2, d) * math.cos(n * tau)

    val, err = integrate.quad(integrand, 0.0, math.pi,
                              epsabs=_QUAD_TOL, epsrel=_QUAD_TOL,
                              limit=_QUAD_LIMIT)
    if not math.isfinite(val) or err > max(1e-8, 1e-6 * abs(val)):
        raise NumericsError(
            f"KH quadrature did not converge at r={r_nm} nm, n={n} "
            f"(value {val}, error estimate {err})")
    return val / math.pi


@dataclass(frozen=True)
class KHPotential:
    """Tabulated Fourier components of one dressed atom on a radial grid."""

    model: ScreeningModel
    z: int
    center_nm: tuple[float, float]
    alpha0_nm: float
    r_nm: np.ndarray
    components: dict              # harmonic index -> values [eV]

    def v0(self, r):
        return np.interp(r, self.r_nm, self.components[0])


def kh_potential_table(model: ScreeningModel, z1: int, z2: int,
                       alpha0_nm: float, r_nm, n_max: int = 0,
                       center_nm: tuple[float, float] = (0.0, 0.0)) -> KHPotential:
    """Tabulate V_n, n = 0..n_max, over the radii ``r_nm``."""
    r = np.asarray(r_nm, dtype=float)
    comps = {}
    for n in range(n_max + 1):
        comps[n] = np.array([
            kh_fourier_component(model, z1, z2, alpha0_nm, n, float(rr))
            for rr in r
        ])
    return KHPotential(model, z2, center_nm, alpha0_nm, r, comps)


def kh_modified_channel_potential(field: PotentialField, foreign_center_nm,
                                  foreign_model: ScreeningModel,
                                  foreign_z: int, alpha0_nm: float,
                                  x_nm: float, y_nm: float) -> float:
    """Channel potential plus the cycle-averaged potential of a dressed
    foreign atom at ``foreign_center_nm`` [eV]."""
    cx, cy = foreign_center_nm
    w = field.geometry.tracking_half_width_nm
    if abs(cx) > w or abs(cy) > w:
        raise DomainError("foreign atom must sit inside the tracked region")
    base = field.potential(x_nm, y_nm)
    r = math.hypot(x_nm - cx, y_nm - cy)
    return base + kh_fourier_component(foreign_model, field.z1, foreign_z,
                                       alpha0_nm, 0, r)


def alpha0_nm_from_au(alpha0_au: float) -> float:
    return alpha0_au * BOHR_RADIUS_NM
