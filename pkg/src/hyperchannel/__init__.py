"""Monte Carlo simulator of MeV proton hyperchanneling through thin
silicon nanocrystals: super-focusing, flux maps, rainbow-line analysis and
laser-dressed (Kramers-Henneberger) potential modifications."""

__version__ = "0.1.0"

from .crystal import (
    AtomicString,
    BeamSpec,
    ChannelGeometry,
    CrystalSpec,
    build_channel_strings,
    critical_angle,
    proton_velocity,
    reduced_thickness,
    thermal_displacement,
    thickness_for_reduced,
)
from .montecarlo import (
    EnsembleConfig,
    FluxHistogram2D,
    flux_enhancement,
    merge_histograms,
    run_ensemble,
    sample_beam,
)
from .potentials import (
    BornTerm,
    PotentialField,
    ScreeningModel,
    channel_gradient,
    channel_hessian,
    channel_potential,
    effective_area_gamma,
    electron_density,
    harmonic_frequency,
    point_potential,
    string_continuum_potential,
    thermal_smear,
)
from .transport import (
    ProtonState,
    Status,
    StepConfig,
    binary_collision_kick,
    dispersion_growth,
    equations_of_motion,
    multiple_scattering_kick,
    propagate_trajectory,
    rk4_step,
    stopping_power,
    transverse_energy,
    valence_stopping,
)

__all__ = [name for name in dir() if not name.startswith("_")]
