import numpy as np
import pytest

from hyperchannel.crystal import BeamSpec, CrystalSpec, build_channel_strings
from hyperchannel.potentials import PotentialField, ScreeningModel
from hyperchannel.transport import StepConfig


@pytest.fixture(scope="session")
def si_geometry():
    return build_channel_strings(CrystalSpec(), shells=3)


@pytest.fixture(scope="session")
def si_field(si_geometry):
    return PotentialField(si_geometry, ScreeningModel.moliere(14),
                          z1=1, z2=14, sigma_th_pm=7.4)


@pytest.fixture(scope="session")
def si_field_cold(si_geometry):
    """Same layout with thermal smearing off (rigid lattice)."""
    return PotentialField(si_geometry, ScreeningModel.moliere(14),
                          z1=1, z2=14, sigma_th_pm=0.0)


@pytest.fixture(scope="session")
def deterministic_step():
    return StepConfig(stopping_enabled=False, scattering_enabled=False,
                      binary_collisions_enabled=False)


@pytest.fixture(scope="session")
def collimated_beam():
    return BeamSpec(energy_ev=2.0e6, tilt_fraction=0.0, divergence_mrad=0.0)


class SyntheticHarmonicField:
    """U = k/2 (x^2 + y^2); analytic benchmark for the integrator."""

    def __init__(self, k_ev_nm2: float):
        self.k = k_ev_nm2

    def potential(self, x, y, smeared=True):
        return 0.5 * self.k * (np.asarray(x) ** 2 + np.asarray(y) ** 2)

    def gradient(self, x, y, smeared=True):
        return np.asarray([self.k * x, self.k * y])

    def hessian(self, x, y, smeared=True):
        return np.array([[self.k, 0.0], [0.0, self.k]])

    def laplacian(self, x, y, smeared=True):
        return 2.0 * self.k


@pytest.fixture(scope="session")
def harmonic_field():
    # curvature close to the real channel's 1454 eV/nm^2 scale
    return SyntheticHarmonicField(1450.0)
