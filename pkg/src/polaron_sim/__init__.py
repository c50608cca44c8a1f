"""Polaron master-equation engine for pulse-driven quantum-dot excitons."""

from polaron_sim.dynamics import (
    DriveSpec,
    Trajectory,
    effective_drive,
    integrate,
    integrate_direct_full_me,
    population_metric,
    pulse_envelope,
)
from polaron_sim.kernel import (
    PhononBath,
    bath_displacement,
    phi,
    spectral_density,
    tabulate_kernel,
)
from polaron_sim.photons import (
    CorrelationSurface,
    PulseTrainSpec,
    efficiency,
    emitted_photon_number,
    g1,
    g2_surface,
    indistinguishability,
)
from polaron_sim.rates import (
    DriveSnapshot,
    RateSet,
    averaged_rates,
    effective_rates,
    full_rates,
)
from polaron_sim.units import (
    HBAR,
    KB,
    ConfigError,
    SimulationConfig,
    angular_frequency_to_energy,
    energy_to_angular_frequency,
    load_config,
)

__version__ = "0.1.0"

__all__ = [
    "HBAR",
    "KB",
    "ConfigError",
    "CorrelationSurface",
    "DriveSnapshot",
    "DriveSpec",
    "PhononBath",
    "PulseTrainSpec",
    "RateSet",
    "SimulationConfig",
    "Trajectory",
    "angular_frequency_to_energy",
    "averaged_rates",
    "bath_displacement",
    "effective_drive",
    "effective_rates",
    "efficiency",
    "emitted_photon_number",
    "energy_to_angular_frequency",
    "full_rates",
    "g1",
    "g2_surface",
    "indistinguishability",
    "integrate",
    "integrate_direct_full_me",
    "load_config",
    "phi",
    "population_metric",
    "pulse_envelope",
    "spectral_density",
    "tabulate_kernel",
]
