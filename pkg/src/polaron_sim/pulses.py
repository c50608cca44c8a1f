"""Pulse envelopes and the bad-cavity effective drive."""

from __future__ import annotations

import math

import numpy as np

from polaron_sim.units import DriveSpec


def pulse_envelope(t, drive: DriveSpec):
    """Bare Gaussian envelope Omega_p exp(-(t - center)^2 / tau_p^2), 1/ps."""
    t = np.asarray(t, dtype=float)
    out = drive.omega_p * np.exp(-(((t - drive.center) / drive.tau_p) ** 2))
    return out if out.ndim else float(out)


def effective_drive(omega_c, g: float, kappa: float, delta_lc: float):
    """Exciton drive seen through a bad cavity: g Omega_c / sqrt(kappa^2 + Delta_Lc^2).

    The bad-cavity regime (kappa >> g) is assumed, not checked.
    """
    denom = math.hypot(kappa, delta_lc)
    if denom == 0:
        raise ValueError("effective_drive undefined for kappa = 0 and Delta_Lc = 0")
    return g * np.asarray(omega_c, dtype=float) / denom if np.ndim(omega_c) else g * omega_c / denom


def drive_scale(drive: DriveSpec) -> float:
    """Factor mapping the configured envelope onto the exciton Rabi frequency."""
    if drive.mode == "exciton":
        return 1.0
    cav = drive.cavity
    return effective_drive(1.0, cav.g, cav.kappa, drive.delta_lx - cav.delta_cx)


def exciton_rabi(t, drive: DriveSpec):
    """Bare exciton Rabi frequency Omega(t), including the cavity mapping."""
    return drive_scale(drive) * pulse_envelope(t, drive)


def rate_detuning(drive: DriveSpec) -> float:
    """Detuning entering the phonon-rate integrals."""
    if drive.mode == "cavity" and drive.cavity.rate_detuning == "cavity":
        return drive.cavity.delta_cx
    return drive.delta_lx


def pulse_train(t, drive: DriveSpec, centers):
    """Sum of identical Gaussians of ``drive`` shape centred at ``centers``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for c in centers:
        out = out + drive.omega_p * np.exp(-(((t - c) / drive.tau_p) ** 2))
    return drive_scale(drive) * (out if out.ndim else float(out))
