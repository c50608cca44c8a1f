"""Phonon scattering rates of the semi-analytical polaron master equation.

All tau integrals are composite Simpson sums over the tabulated kernel, so a
rate evaluation is a handful of dot products and cheap enough to repeat at
every right-hand-side call of the integrator.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from polaron_sim.kernel import PhononBath
from polaron_sim.pulses import exciton_rabi, rate_detuning
from polaron_sim.units import DriveSpec


@dataclass(frozen=True)
class DriveSnapshot:
    omega: float  # bare Rabi frequency
    omega_r: float  # <B> omega
    delta_lx: float
    eta: float

    @classmethod
    def from_drive(cls, omega: float, b_avg: float, delta_lx: float) -> DriveSnapshot:
        omega_r = b_avg * omega
        return cls(omega, omega_r, delta_lx, math.hypot(omega_r, delta_lx))


@dataclass(frozen=True)
class RateSet:
    """Instantaneous phonon rates, 1/ps.  gamma_u and gamma_g are complex."""

    gamma_sig_plus: float = 0.0
    gamma_sig_minus: float = 0.0
    gamma_cd: float = 0.0
    gamma_sd: float = 0.0
    gamma_u: complex = 0j
    gamma_g: complex = 0j
    delta_shift: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


RATE_NAMES = tuple(RateSet.__dataclass_fields__)


@dataclass(frozen=True)
class AuxKernels:
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray
    q: np.ndarray
    r: np.ndarray


def aux_kernels(snap: DriveSnapshot, tau) -> AuxKernels:
    """Shorthand functions f, g, h, q, r of the two-time operator expansion."""
    tau = np.asarray(tau, dtype=float)
    om, d, eta = snap.omega_r, snap.delta_lx, snap.eta
    if eta == 0:
        zero = np.zeros_like(tau)
        return AuxKernels(np.ones_like(tau), zero, zero, np.ones_like(tau), zero)
    c, s = np.cos(eta * tau), np.sin(eta * tau)
    return AuxKernels(
        f=(d * d * c + om * om) / eta**2,
        g=d * s / eta,
        h=2 * d * om * (1 - c) / eta**2,
        q=c,
        r=2 * om * s / eta,
    )


def _full_rate_arrays(omega_r, delta: float, bath: PhononBath) -> dict[str, np.ndarray]:
    omega_r = np.atleast_1d(np.asarray(omega_r, dtype=float))
    w = bath.simpson_weights
    wg = w * bath.green_g
    wu = w * bath.green_u
    a1 = wg.sum()

    eta = np.hypot(omega_r, delta)
    live = omega_r != 0
    eta_safe = np.where(live, eta, 1.0)
    arg = np.outer(eta_safe, bath.tau)
    cos, sin = np.cos(arg), np.sin(arg)
    cc, cs = cos @ wg, sin @ wg
    sc, ss = cos @ wu, sin @ wu

    om2 = omega_r**2
    half = 0.5 * om2
    g_ratio = delta / eta_safe  # Delta / eta
    f_int = (delta * delta * cc + om2 * a1) / eta_safe**2

    out = {
        "gamma_sig_plus": half * ((f_int + sc).real - g_ratio * (cs + ss).imag),
        "gamma_sig_minus": half * ((f_int + sc).real + g_ratio * (cs + ss).imag),
        "gamma_cd": half * (sc - f_int).real,
        "gamma_sd": half * g_ratio * (ss - cs).real,
        "gamma_u": omega_r * om2 / (2 * eta_safe) * ss,
        "gamma_g": omega_r * om2 * delta / (2 * eta_safe**2) * (a1 - cc),
        "delta_shift": half * g_ratio * (cs + ss).real,
    }
    for k, v in out.items():
        out[k] = np.where(live, v, 0.0)
    return out


def full_rates(snap: DriveSnapshot, bath: PhononBath) -> RateSet:
    """All seven phonon rates at one instant of the drive."""
    if snap.omega_r == 0:
        return RateSet()
    arr = _full_rate_arrays(snap.omega_r, snap.delta_lx, bath)
    return RateSet(**{k: (complex(v[0]) if k in ("gamma_u", "gamma_g") else float(v[0])) for k, v in arr.items()})


@lru_cache(maxsize=256)
def _effective_integrals(bath: PhononBath, delta: float) -> tuple[complex, complex, complex]:
    w = bath.simpson_weights
    em1 = np.expm1(bath.phi_table)  # e^phi - 1
    one_m = -np.expm1(-bath.phi_table)  # 1 - e^-phi
    c, s = np.cos(delta * bath.tau), np.sin(delta * bath.tau)
    return (c * w) @ em1, (s * w) @ em1, (c * w) @ one_m


def effective_rates(snap: DriveSnapshot, bath: PhononBath) -> RateSet:
    """Weak-drive rates: only gamma_sig_plus, gamma_sig_minus, gamma_cd set."""
    if snap.omega_r == 0:
        return RateSet()
    e_c, e_s, m_c = _effective_integrals(bath, float(snap.delta_lx))
    half = 0.5 * snap.omega_r**2
    return RateSet(
        gamma_sig_plus=half * (e_c.real - e_s.imag),
        gamma_sig_minus=half * (e_c.real + e_s.imag),
        gamma_cd=half * m_c.real,
    )


def effective_rate_arrays(omega_r, delta: float, bath: PhononBath) -> dict[str, np.ndarray]:
    omega_r = np.atleast_1d(np.asarray(omega_r, dtype=float))
    e_c, e_s, m_c = _effective_integrals(bath, float(delta))
    half = 0.5 * omega_r**2
    zero = np.zeros_like(omega_r)
    return {
        "gamma_sig_plus": half * (e_c.real - e_s.imag),
        "gamma_sig_minus": half * (e_c.real + e_s.imag),
        "gamma_cd": half * m_c.real,
        "gamma_sd": zero,
        "gamma_u": zero.astype(complex),
        "gamma_g": zero.astype(complex),
        "delta_shift": zero,
    }


def rate_arrays(omega, delta: float, bath: PhononBath, which: str = "full") -> dict[str, np.ndarray]:
    """Rates for an array of bare Rabi frequencies."""
    omega_r = bath.B_avg * np.atleast_1d(np.asarray(omega, dtype=float))
    if which == "full":
        return _full_rate_arrays(omega_r, delta, bath)
    if which == "effective":
        return effective_rate_arrays(omega_r, delta, bath)
    raise ValueError(f"unknown rate model {which!r}")


def averaged_rates(drive: DriveSpec, bath: PhononBath, which: str = "full", n_points: int = 2001) -> RateSet:
    """Pulse-averaged rates, integral of Gamma_i(t) over +-5 tau_p divided by 2 tau_p."""
    if n_points % 2 == 0:
        n_points += 1
    t = np.linspace(drive.center - 5 * drive.tau_p, drive.center + 5 * drive.tau_p, n_points)
    arr = rate_arrays(exciton_rabi(t, drive), rate_detuning(drive), bath, which)
    h = t[1] - t[0]
    w = np.ones(n_points)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    w *= h / 3.0
    avg = {k: (w @ v) / (2 * drive.tau_p) for k, v in arr.items()}
    return RateSet(**{k: (complex(v) if k in ("gamma_u", "gamma_g") else float(v)) for k, v in avg.items()})
