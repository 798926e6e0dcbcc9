"""Screened interaction potentials of the channel and derived quantities.

The point potential is the screened Coulomb form

    V(r') = (Z1 Z2 e^2 / r') sum_j alpha_j exp(-beta_j r' / a),

with the Moliere coefficients (0.35, 0.55, 0.10) / (0.3, 1.2, 6.0) or the
ZBL universal set.  Averaging along an infinite string of period d gives the
continuum potential in closed form,

    U_s(r) = (2 Z1 Z2 e^2 / d) sum_j alpha_j K0(beta_j r / a),

and thermal vibrations are folded in to second order,

    U_th = U + (sigma_th^2 / 2) (d_xx U + d_yy U),

which for the K0 series is a per-term factor 1 + (sigma_th beta_j / a)^2 / 2
because K0(k r) satisfies the modified Helmholtz equation.  Gradients,
Hessians and Laplacians are evaluated analytically through the K1/K0
recurrences.  The electron density follows from n_e = Lap(U_th) / (4 pi) in
atomic units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _bessel
from .constants import (
    C_NM_PER_S,
    DENSITY_AU_TO_NM3,
    E2_EV_NM,
    LAPLACIAN_EVNM2_TO_AU,
    PROTON_MASS_EV,
    moliere_screening_radius_nm,
    zbl_screening_radius_nm,
)
from .crystal import ChannelGeometry
from .errors import ConfigError, DegenerateChannelError, DomainError

MOLIERE_ALPHAS = (0.35, 0.55, 0.10)
MOLIERE_BETAS = (0.3, 1.2, 6.0)

ZBL_ALPHAS = (0.1818, 0.5099, 0.2802, 0.02817)
ZBL_BETAS = (3.2, 0.9423, 0.4029, 0.2016)


@dataclass(frozen=True)
class ScreeningModel:
    """Coefficients, exponents and screening radius of a screened potential."""

    kind: str
    alphas: tuple[float, ...]
    betas: tuple[float, ...]
    a_nm: float

    def __post_init__(self):
        if self.a_nm <= 0.0:
            raise ConfigError("screening radius must be positive")
        if len(self.alphas) != len(self.betas):
            raise ConfigError("alphas and betas must have equal length")

    @classmethod
    def moliere(cls, z2: int | float) -> "ScreeningModel":
        return cls("moliere", MOLIERE_ALPHAS, MOLIERE_BETAS,
                   moliere_screening_radius_nm(z2))

    @classmethod
    def zbl(cls, z1: int | float, z2: int | float) -> "ScreeningModel":
        return cls("zbl", ZBL_ALPHAS, ZBL_BETAS, zbl_screening_radius_nm(z1, z2))

    @classmethod
    def named(cls, name: str, z1: int | float, z2: int | float) -> "ScreeningModel":
        if name == "moliere":
            return cls.moliere(z2)
        if name == "zbl":
            return cls.zbl(z1, z2)
        raise ConfigError(f"unknown screening model {name!r}")

    def screening_function(self, x):
        """phi(x) = sum_j alpha_j exp(-beta_j x); in (0, 1] for x >= 0."""
        x = np.asarray(x, dtype=float)
        acc = np.zeros_like(x)
        for al, be in zip(self.alphas, self.betas):
            acc += al * np.exp(-be * x)
        return acc if acc.ndim else float(acc)


def point_potential(model: ScreeningModel, z1: int, z2: int, r_nm) -> float:
    """Screened point potential V(r') [eV] between proton and atom."""
    r = np.asarray(r_nm, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("point potential is singular at r' <= 0")
    val = z1 * z2 * E2_EV_NM / r * model.screening_function(r / model.a_nm)
    return float(val) if val.ndim == 0 else val


def string_continuum_potential(
    model: ScreeningModel, z1: int, z2: int, d_nm: float, r_nm
) -> float:
    """Continuum (line-averaged) potential U_s(r) [eV] of one string."""
    r = np.asarray(r_nm, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("continuum potential is singular at r <= 0")
    if d_nm <= 0.0:
        raise DomainError("string period must be positive")
    pref = 2.0 * z1 * z2 * E2_EV_NM / d_nm
    acc = np.zeros_like(r)
    for al, be in zip(model.alphas, model.betas):
        acc += al * _bessel.k0(be * r / model.a_nm)
    val = pref * acc
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class BornTerm:
    """Optional per-string Born repulsion B / r^n (compressibility fit)."""

    b_ev_nmn: float
    n: float

    def __post_init__(self):
        if self.n <= 1.0:
            raise ConfigError("Born exponent must exceed 1")


class PotentialField:
    """Total thermally smeared channel potential over a string geometry.

    Evaluation is pure: the field carries immutable per-term coefficients
    and exposes value / gradient / Hessian / Laplacian at arbitrary points.
    Points closer than ``min_r_nm`` to a string axis are rejected, since the
    continuum series is singular on the axes.
    """

    def __init__(
        self,
        geometry: ChannelGeometry,
        model: ScreeningModel,
        z1: int = 1,
        z2: int = 14,
        sigma_th_pm: float = 7.4,
        born: BornTerm | None = None,
        min_r_nm: float = 1e-4,
    ):
        self.geometry = geometry
        self.model = model
        self.z1 = z1
        self.z2 = z2
        self.sigma_th_pm = sigma_th_pm
        self.born = born
        self.min_r_nm = min_r_nm

        sigma_nm = sigma_th_pm * 1e-3
        self._alphas = np.array(model.alphas)
        self._ks = np.array(model.betas) / model.a_nm        # nm^-1
        # per-term smearing factor from Lap K0(k r) = k^2 K0(k r)
        self._smear = 1.0 + 0.5 * (sigma_nm * self._ks) ** 2

        self._pos = geometry.positions()
        # per-string prefactor 2 Z1 Z2 e^2 / d_i
        self._pref = np.array(
            [2.0 * z1 * z2 * E2_EV_NM / s.period_nm for s in geometry.strings]
        )

    # -- internal accumulation over strings and screening terms ----------

    def _displacements(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dx = x[..., None] - self._pos[:, 0]
        dy = y[..., None] - self._pos[:, 1]
        r = np.hypot(dx, dy)
        if np.any(r < self.min_r_nm):
            raise DomainError(
                f"evaluation within {self.min_r_nm} nm of a string axis"
            )
        return dx, dy, r

    def potential(self, x, y, smeared: bool = True):
        """Channel potential U_th (or bare U) at (x, y) [eV], Born included."""
        dx, dy, r = self._displacements(x, y)
        weights = self._smear if smeared else np.ones_like(self._smear)
        acc = np.zeros(r.shape[:-1])
        for al, k, w in zip(self._alphas, self._ks, weights):
            acc += (al * w) * np.sum(self._pref * _bessel.k0(k * r), axis=-1)
        if self.born is not None:
            acc += np.sum(self.born.b_ev_nmn * r ** (-self.born.n), axis=-1)
        return float(acc) if acc.ndim == 0 else acc

    def gradient(self, x, y, smeared: bool = True):
        """(dU/dx, dU/dy) [eV/nm]; analytic from dK0 = -k K1."""
        dx, dy, r = self._displacements(x, y)
        weights = self._smear if smeared else np.ones_like(self._smear)
        dur = np.zeros_like(r)      # dU/dr per string
        for al, k, w in zip(self._alphas, self._ks, weights):
            dur += -(al * w) * k * _bessel.k1(k * r)
        dur *= self._pref
        if self.born is not None:
            dur += -self.born.n * self.born.b_ev_nmn * r ** (-self.born.n - 1.0)
        gx = np.sum(dur * dx / r, axis=-1)
        gy = np.sum(dur * dy / r, axis=-1)
        if gx.ndim == 0:
            return np.array([float(gx), float(gy)])
        return np.stack([gx, gy], axis=-1)

    def hessian(self, x, y, smeared: bool = True):
        """2x2 matrix of second derivatives [eV/nm^2].

        For a radial profile f(r):  H = f'' rhat rhat^T + (f'/r)(I - rhat rhat^T),
        with K0'' (x) = K0(x) + K1(x)/x.
        """
        dx, dy, r = self._displacements(x, y)
        weights = self._smear if smeared else np.ones_like(self._smear)
        d1 = np.zeros_like(r)
        d2 = np.zeros_like(r)
        for al, k, w in zip(self._alphas, self._ks, weights):
            kr = k * r
            k1v = _bessel.k1(kr)
            k0v = _bessel.k0(kr)
            d1 += -(al * w) * k * k1v
            d2 += (al * w) * k * k * (k0v + k1v / kr)
        d1 *= self._pref
        d2 *= self._pref
        if self.born is not None:
            b, n = self.born.b_ev_nmn, self.born.n
            d1 += -n * b * r ** (-n - 1.0)
            d2 += n * (n + 1.0) * b * r ** (-n - 2.0)
        ux = dx / r
        uy = dy / r
        hxx = np.sum(d2 * ux * ux + d1 / r * uy * uy, axis=-1)
        hyy = np.sum(d2 * uy * uy + d1 / r * ux * ux, axis=-1)
        hxy = np.sum((d2 - d1 / r) * ux * uy, axis=-1)
        if hxx.ndim == 0:
            return np.array([[float(hxx), float(hxy)], [float(hxy), float(hyy)]])
        return np.stack(
            [np.stack([hxx, hxy], axis=-1), np.stack([hxy, hyy], axis=-1)], axis=-2
        )

    def laplacian(self, x, y, smeared: bool = True):
        """Lap U [eV/nm^2]; for the K0 series Lap K0(k r) = k^2 K0(k r)."""
        dx, dy, r = self._displacements(x, y)
        weights = self._smear if smeared else np.ones_like(self._smear)
        acc = np.zeros(r.shape[:-1])
        for al, k, w in zip(self._alphas, self._ks, weights):
            acc += (al * w) * k * k * np.sum(self._pref * _bessel.k0(k * r), axis=-1)
        if self.born is not None:
            b, n = self.born.b_ev_nmn, self.born.n
            acc += np.sum(n * n * b * r ** (-n - 2.0), axis=-1)
        return float(acc) if acc.ndim == 0 else acc


def thermal_smear(field: PotentialField, x, y):
    """Smeared potential U_th = U + (sigma_th^2/2) Lap U of the screened
    continuum part (Born repulsion, when present, is added unsmeared)."""
    return field.potential(x, y, smeared=True)


def channel_potential(field: PotentialField, x, y):
    """Total thermally smeared channel potential [eV]."""
    return field.potential(x, y)


def channel_gradient(field: PotentialField, x, y):
    """Gradient of the channel potential [eV/nm]."""
    return field.gradient(x, y)


def channel_hessian(field: PotentialField, x, y):
    """Hessian of the channel potential [eV/nm^2]."""
    return field.hessian(x, y)


def electron_density(field: PotentialField, x, y):
    """Electron-gas density n_e = Lap U_th / (4 pi) [nm^-3].

    Evaluated in atomic units, where the expression is dimensionally
    consistent, then converted; negative values (possible far from the
    strings, where the smeared model is only approximate) clip to zero.
    """
    lap = field.laplacian(x, y)
    n_au = np.asarray(lap) * LAPLACIAN_EVNM2_TO_AU / (4.0 * math.pi)
    n = np.clip(n_au, 0.0, None) * DENSITY_AU_TO_NM3
    return float(n) if n.ndim == 0 else n


def harmonic_frequency(field) -> float:
    """Average transverse oscillation frequency f_r [Hz] near the channel
    centre, from the mean Hessian eigenvalue there."""
    geom = getattr(field, "geometry", None)
    cx, cy = geom.channel_center if geom is not None else (0.0, 0.0)
    hess = field.hessian(cx, cy)
    eigs = np.linalg.eigvalsh(hess)
    if np.any(eigs <= 0.0):
        raise DegenerateChannelError(
            "channel potential is not confining at the centre"
        )
    lam_mean = float(np.mean(eigs))        # eV/nm^2
    omega = math.sqrt(lam_mean / PROTON_MASS_EV) * C_NM_PER_S   # rad/s
    return omega / (2.0 * math.pi)


def effective_area_gamma(a0_nm2: float, k: float, e_ev: float, phi_rad: float) -> float:
    """Log of the effective potential-area ratio, ln |A0 k / (pi E phi^2)|."""
    if phi_rad == 0.0:
        raise DomainError("effective area diverges at zero tilt")
    if a0_nm2 <= 0.0 or e_ev <= 0.0 or k == 0.0:
        raise DomainError("A0 and E must be positive and k nonzero")
    return math.log(abs(a0_nm2 * k / (math.pi * e_ev * phi_rad**2)))
