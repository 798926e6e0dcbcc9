"""Physical constants and unit conversions.

Internal unit system: lengths in nm, energies in eV, angles in rad, with the
Gaussian-convention elementary charge squared e^2 = 1.439965 eV nm.  The
electron-gas expressions (local stopping power, plasma frequency, densities
derived from potential Laplacians) are evaluated in Hartree atomic units,
where they hold verbatim, and converted at the boundary.
"""

import math

# Elementary charge squared, Gaussian convention [eV nm]
E2_EV_NM = 1.439965

# Rest energies [eV]
PROTON_MASS_EV = 938.272e6
ELECTRON_MASS_EV = 0.51099895e6

# Proton/electron mass ratio
PROTON_ELECTRON_MASS_RATIO = PROTON_MASS_EV / ELECTRON_MASS_EV

# Speed of light
C_M_PER_S = 2.99792458e8
C_NM_PER_S = 2.99792458e17

# Atomic units
BOHR_RADIUS_NM = 0.0529177210903
HARTREE_EV = 27.211386245988
AU_TIME_S = 2.4188843265857e-17
AU_VELOCITY_M_PER_S = 2.18769126364e6
# Intensity of a 1-au field amplitude [W/cm^2]
AU_INTENSITY_W_CM2 = 3.50944758e16

HBAR_EV_S = 6.582119569e-16

NM_PER_BOHR = BOHR_RADIUS_NM
BOHR_PER_NM = 1.0 / BOHR_RADIUS_NM

# eV/nm^2  ->  Hartree/bohr^2
LAPLACIAN_EVNM2_TO_AU = (1.0 / HARTREE_EV) * BOHR_RADIUS_NM**2
# Hartree/bohr  ->  eV/nm
STOPPING_AU_TO_EVNM = HARTREE_EV / BOHR_RADIUS_NM
# bohr^-3  ->  nm^-3
DENSITY_AU_TO_NM3 = BOHR_PER_NM**3


def moliere_screening_radius_nm(z2: int | float) -> float:
    """Thomas-Fermi screening radius a = a0 [9 pi^2 / (128 Z2)]^(1/3) for a
    proton projectile (Lindhard convention)."""
    return BOHR_RADIUS_NM * (9.0 * math.pi**2 / (128.0 * z2)) ** (1.0 / 3.0)


def zbl_screening_radius_nm(z1: int | float, z2: int | float) -> float:
    """ZBL universal screening length a_U = 0.8854 a0 / (Z1^0.23 + Z2^0.23)."""
    return 0.8854 * BOHR_RADIUS_NM / (z1**0.23 + z2**0.23)
