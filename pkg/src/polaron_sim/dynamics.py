"""Liouvillian assembly and time integration of the exciton density matrix.

States are 2x2 in the basis (|g>, |e>) and are propagated as row-major
vectors vec(rho) = (rho_gg, rho_ge, rho_eg, rho_ee) under a 4x4 generator.
Three generators are available:

``analytic``
    the rate form of the polaron master equation (seven phonon rates plus
    the drive renormalisation term, see ``QuadratureSettings.drive_correction``);
``effective``
    the weak-drive form with three rates;
``direct``
    the phonon dissipator built from the two-time operators
    exp(-i H tau) X exp(i H tau) by brute-force tau quadrature.  Slow; it is
    the oracle that the analytic form is checked against.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from polaron_sim.kernel import PhononBath, tabulate_kernel
from polaron_sim.pulses import (
    drive_scale,
    effective_drive,
    exciton_rabi,
    pulse_envelope,
    rate_detuning,
)
from polaron_sim.rates import effective_rate_arrays
from polaron_sim.units import DriveSpec, SimulationConfig

__all__ = [
    "DriveSpec",
    "IntegrationError",
    "Liouvillian",
    "Trajectory",
    "effective_drive",
    "integrate",
    "integrate_direct_full_me",
    "population_metric",
    "pulse_envelope",
]

SOLVERS = ("analytic", "direct", "effective")


class IntegrationError(RuntimeError):
    def __init__(self, msg: str, t: float):
        super().__init__(f"{msg} (at t = {t:.6g} ps)")
        self.t = t


# -- operator algebra -------------------------------------------------------

I2 = np.eye(2, dtype=complex)
SP = np.array([[0, 0], [1, 0]], dtype=complex)  # |e><g|
SM = SP.T.copy()
NX = SP @ SM  # |e><e|
SX = SP + SM
SY = -1j * (SP - SM)

GROUND = np.array([[1, 0], [0, 0]], dtype=complex)


def _pre(a):
    return np.kron(a, I2)


def _post(b):
    return np.kron(I2, b.T)


def _prepost(a, b):
    return np.kron(a, b.T)


def _comm(h):
    """Superoperator of -i[h, .]."""
    return -1j * (_pre(h) - _post(h))


def _dissipator(o):
    """Superoperator of 2 o . o^+ - o^+ o . - . o^+ o."""
    od = o.conj().T
    return 2 * _prepost(o, od) - _pre(od @ o) - _post(od @ o)


_A_U = _prepost(NX, SP) + _pre(SM) - _prepost(NX, SM)
_A_U_DAG = _prepost(SM, NX) + _post(SP) - _prepost(SP, NX)
_A_G = _prepost(NX, SP) - _pre(SM) + _prepost(NX, SM)
_A_G_DAG = _prepost(SM, NX) - _post(SP) + _prepost(SP, NX)
_SPSP = _prepost(SP, SP)
_SMSM = _prepost(SM, SM)

# coefficient order for the time-dependent part of the analytic generator
_BASIS = np.stack([
    _comm(SX / 2),  # 0: Omega_R
    -_comm(NX),  # 1: Delta^{s+s-}  (+i[n, rho])
    _dissipator(SP) / 2,  # 2: Gamma^{s+}
    _dissipator(SM) / 2,  # 3: Gamma^{s-}
    -(_SPSP + _SMSM),  # 4: Gamma^cd
    -1j * (_SPSP - _SMSM),  # 5: Gamma^sd
    -1j * _A_U + 1j * _A_U_DAG,  # 6: Re Gamma_u
    _A_U + _A_U_DAG,  # 7: Im Gamma_u
    -(_A_G + _A_G_DAG),  # 8: Re Gamma_g
    -1j * _A_G + 1j * _A_G_DAG,  # 9: Im Gamma_g
    _comm(SX),  # 10: drive correction, Im Gamma_g sigma_x
    -_comm(SY),  # 11: drive correction, -Im Gamma_u sigma_y
])


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(-1)


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v).reshape(v.shape[:-1] + (2, 2))


# -- generators --------------------------------------------------------------


class Liouvillian:
    """Time-dependent 4x4 generator for one configuration.

    ``centers`` lists the pulse centres (a single pulse at ``drive.center`` by
    default); the drive is the sum of identical Gaussians.
    """

    def __init__(self, config: SimulationConfig, bath: PhononBath | None = None,
                 solver: str = "analytic", centers=None, phonons: bool = True):
        if solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {solver!r}")
        self.config = config
        self.solver = solver
        if bath is None:
            # phonons off is the bare two-level problem: no rates and <B> = 1
            params = config.bath if phonons else dataclasses.replace(config.bath, alpha_p=0.0)
            bath = tabulate_kernel(params, config.quadrature)
        self.bath = bath
        drive = config.drive
        self.drive = drive
        self.centers = np.atleast_1d(drive.center if centers is None else np.asarray(centers, dtype=float))
        self.scale = drive_scale(drive) * drive.omega_p
        self.inv_tau2 = 1.0 / drive.tau_p**2
        self.delta = drive.delta_lx
        self.rate_delta = rate_detuning(drive)
        self.phonons = phonons and self.bath.alpha_p > 0
        self.b_avg = self.bath.B_avg if phonons else 1.0
        q = config.quadrature
        self.significant_only = q.significant_rates_only
        self.drive_correction = q.drive_correction

        sysp = config.system
        self.L0 = (
            self.delta * -_comm(NX)  # H = -Delta n
            + config.gamma_total / 2 * _dissipator(SM)
            + sysp.gamma_prime / 2 * _dissipator(NX)
        )

        b = self.bath
        w = b.simpson_weights
        self._tau = b.tau
        self._wg = w * b.green_g
        self._wu = w * b.green_u
        self._a1 = self._wg.sum()
        if solver == "direct":
            self._kernel_g = w * self.b_avg**2 * b.green_g
            self._kernel_u = w * self.b_avg**2 * b.green_u
        self._cache: CubicSpline | None = None

    # drive -----------------------------------------------------------------

    def omega(self, t: float) -> float:
        """Bare exciton Rabi frequency at time t."""
        s = 0.0
        for c in self.centers:
            x = (t - c) ** 2 * self.inv_tau2
            if x < 700.0:
                s += math.exp(-x)
        return self.scale * s

    # analytic coefficients -------------------------------------------------

    def coefficients(self, t: float) -> np.ndarray:
        """Coefficient vector multiplying the basis superoperators at time t."""
        if self._cache is not None:
            return self._cache(t)
        return self._coefficients(t)

    def _coefficients(self, t: float) -> np.ndarray:
        c = np.zeros(len(_BASIS))
        om_r = self.b_avg * self.omega(t)
        c[0] = om_r
        if not self.phonons or om_r < 1e-12:
            return c
        if self.solver == "effective":
            r = effective_rate_arrays(om_r, self.rate_delta, self.bath)
            c[2] = r["gamma_sig_plus"][0]
            c[3] = r["gamma_sig_minus"][0]
            c[4] = r["gamma_cd"][0]
            return c

        d = self.rate_delta
        eta = math.hypot(om_r, d)
        arg = eta * self._tau
        cos, sin = np.cos(arg), np.sin(arg)
        cc, cs = cos @ self._wg, sin @ self._wg
        sc, ss = cos @ self._wu, sin @ self._wu
        om2 = om_r * om_r
        half = 0.5 * om2
        gr = d / eta
        f_int = (d * d * cc + om2 * self._a1) / (eta * eta)
        mix = cs + ss
        gamma_u = om_r * om2 / (2 * eta) * ss
        gamma_g = om_r * om2 * d / (2 * eta * eta) * (self._a1 - cc)

        c[2] = half * ((f_int + sc).real - gr * mix.imag)
        c[3] = half * ((f_int + sc).real + gr * mix.imag)
        c[4] = half * (sc - f_int).real
        c[6] = gamma_u.real
        c[7] = gamma_u.imag
        if self.drive_correction:
            c[11] = gamma_u.imag
        if not self.significant_only:
            c[1] = half * gr * mix.real
            c[5] = half * gr * (ss - cs).real
            c[8] = gamma_g.real
            c[9] = gamma_g.imag
            if self.drive_correction:
                c[10] = gamma_g.imag
        return c

    def enable_rate_cache(self, t0: float, t1: float, step: float = 0.05) -> None:
        """Replace per-call rates by cubic interpolation on a fixed time grid."""
        n = max(4, math.ceil((t1 - t0) / step) + 1)
        grid = np.linspace(t0, t1, n)
        self._cache = None
        table = np.array([self._coefficients(t) for t in grid])
        self._cache = CubicSpline(grid, table, axis=0)

    # direct phonon dissipator ---------------------------------------------

    def _direct_phonon(self, om: float) -> np.ndarray:
        om_r = self.b_avg * om
        h = -self.delta * NX + 0.5 * om_r * SX
        lam, v = np.linalg.eigh(h)
        phase = np.exp(-1j * np.outer(self._tau, lam))  # (N, 2)
        u = np.einsum("ij,kj,lj->kil", v, phase, v.conj())  # U(tau) = V e^{-i lam tau} V^+
        ud = np.conj(np.swapaxes(u, 1, 2))
        out = np.zeros((4, 4), dtype=complex)
        for x, kern in ((0.5 * om * SX, self._kernel_g), (-0.5 * om * SY, self._kernel_u)):
            xt = u @ x @ ud  # X(t, tau) on every tau node
            k = np.tensordot(kern, xt, axes=(0, 0))
            kd = k.conj().T
            # -( [X, K rho] + h.c. ), h.c. taken as the linear map rho -> (K rho)^+ for Hermitian rho
            out -= _pre(x @ k) - _prepost(k, x) + _post(kd @ x) - _prepost(x, kd)
        return out

    # full generator --------------------------------------------------------

    def matrix(self, t: float) -> np.ndarray:
        if self.solver == "direct":
            om = self.omega(t)
            m = self.L0 + self.b_avg * om * _BASIS[0]
            if self.phonons and om > 1e-12:
                m = m + self._direct_phonon(om)
            return m
        return self.L0 + np.tensordot(self.coefficients(t), _BASIS, axes=(0, 0))

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        return self.matrix(t) @ y


# -- trajectories ------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n, 2, 2)
    dense: Callable | None = None

    @property
    def n_x(self) -> np.ndarray:
        return self.states[:, 1, 1].real

    def state_at(self, t) -> np.ndarray:
        if self.dense is None:
            raise ValueError("trajectory has no dense output")
        return unvec(self.dense(t).T)

    def trace_defect(self) -> float:
        tr = self.states[:, 0, 0] + self.states[:, 1, 1]
        return float(np.max(np.abs(tr - 1.0)))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.states - np.conj(np.swapaxes(self.states, 1, 2)))))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.states + np.conj(np.swapaxes(self.states, 1, 2)))
        return float(np.linalg.eigvalsh(herm).min())


def default_window(config: SimulationConfig) -> tuple[float, float]:
    d = config.drive
    t0 = config.integrator.t_start
    t1 = config.integrator.t_end
    return (d.center - 5 * d.tau_p if t0 is None else t0,
            d.center + 5 * d.tau_p if t1 is None else t1)


def propagate(gen: Liouvillian, y0: np.ndarray, t0: float, t1: float, *, t_eval=None,
              rtol: float = 1e-8, atol: float = 1e-10, method: str = "DOP853",
              dense: bool = True, max_step: float = np.inf):
    """Integrate d vec/dt = L(t) vec from t0 to t1; returns the solve_ivp result."""
    sol = solve_ivp(gen, (t0, t1), np.asarray(y0, dtype=complex), method=method, t_eval=t_eval,
                    dense_output=dense, rtol=rtol, atol=atol, max_step=max_step)
    if sol.status != 0:
        t_fail = float(sol.t[-1]) if len(sol.t) else t0
        raise IntegrationError(f"integration failed: {sol.message}", t_fail)
    return sol


def integrate(config: SimulationConfig, *, solver: str = "analytic", t_eval=None, t_end: float | None = None,
              bath: PhononBath | None = None, phonons: bool = True, rho0: np.ndarray | None = None) -> Trajectory:
    """Evolve rho from the ground state over the configured window.

    The default window is [center - 5 tau_p, center + 5 tau_p]; ``t_end``
    overrides its end.  ``t_eval`` picks output times (default: the
    integrator's own steps).
    """
    gen = Liouvillian(config, bath=bath, solver=solver, phonons=phonons)
    t0, t1 = default_window(config)
    if t_end is not None:
        t1 = t_end
    if config.quadrature.rate_cache and solver != "direct":
        gen.enable_rate_cache(t0, t1)
    ig = config.integrator
    y0 = vec(GROUND if rho0 is None else rho0)
    sol = propagate(gen, y0, t0, t1, t_eval=t_eval, rtol=ig.rtol, atol=ig.atol, method=ig.method)
    return Trajectory(times=sol.t, states=unvec(sol.y.T), dense=sol.sol)


def integrate_direct_full_me(config: SimulationConfig, **kw) -> Trajectory:
    """Oracle integrator using the unexpanded phonon dissipator."""
    return integrate(config, solver="direct", **kw)


def population_metric(traj: Trajectory, drive: DriveSpec) -> float:
    """Exciton population one pulse full width (2 tau_p) after the pulse centre."""
    t_probe = drive.center + 2 * drive.tau_p
    if traj.times[0] > t_probe or traj.times[-1] < t_probe - 1e-9:
        raise ValueError(f"trajectory [{traj.times[0]:.3g}, {traj.times[-1]:.3g}] ps does not reach t = {t_probe:.3g} ps")
    if traj.dense is not None:
        return float(traj.state_at(t_probe)[1, 1].real)
    return float(np.interp(t_probe, traj.times, traj.n_x))


def population_at(config: SimulationConfig, *, solver: str = "analytic", bath: PhononBath | None = None,
                  phonons: bool = True) -> float:
    """Population metric for one configuration, integrating only as far as needed."""
    d = config.drive
    t_probe = d.center + 2 * d.tau_p
    traj = integrate(config, solver=solver, t_end=t_probe, t_eval=[t_probe], bath=bath, phonons=phonons)
    return float(traj.n_x[-1])


def exciton_drive(t, config: SimulationConfig):
    return exciton_rabi(t, config.drive)
