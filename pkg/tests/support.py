"""Shared configuration builders for the test suite."""

from __future__ import annotations

import dataclasses
import math

from polaron_sim.units import (
    BathParams,
    CavitySpec,
    DriveSpec,
    SimulationConfig,
    SystemParams,
)
from polaron_sim.units import (
    energy_to_angular_frequency as mev,
)

TAU_P = 10.1  # ps, 2 tau_p = 20.2 ps
BATH = BathParams(alpha_p=0.03, omega_b=mev(1.0), temperature=4.2)
SYSTEM = SystemParams(gamma=mev(0.002), gamma_prime=mev(0.002))


def config(theta_pi: float, delta_mev: float = 0.0, *, tau_p: float = TAU_P, alpha_p: float | None = None,
           temperature: float | None = None, gamma: float | None = None, gamma_prime: float | None = None,
           purcell: float | None = None, **quad) -> SimulationConfig:
    bath = BATH
    if alpha_p is not None:
        bath = dataclasses.replace(bath, alpha_p=alpha_p)
    if temperature is not None:
        bath = dataclasses.replace(bath, temperature=temperature)
    system = SYSTEM
    if gamma is not None:
        system = dataclasses.replace(system, gamma=gamma)
    if gamma_prime is not None:
        system = dataclasses.replace(system, gamma_prime=gamma_prime)
    cavity = CavitySpec(purcell=purcell) if purcell is not None else None
    drive = DriveSpec.from_area(theta_pi * math.pi, tau_p, mev(delta_mev), cavity=cavity)
    cfg = SimulationConfig(bath=bath, drive=drive, system=system)
    if quad:
        cfg = dataclasses.replace(cfg, quadrature=dataclasses.replace(cfg.quadrature, **quad))
    return cfg


REFERENCE_DOCUMENT = """\
[bath]
alpha_p = 0.03
omega_b = 1.0
temperature = 4.2

[system]
gamma = 0.002
gamma_prime = 0.002

[drive]
theta_pi = 16
tau_p = 10.1
delta_lx = 0.83
"""
