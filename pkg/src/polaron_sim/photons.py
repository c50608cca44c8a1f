"""Two-time correlations and single-photon-source figures of merit.

G1(t, tau) = <s+(t) s-(t + tau)> follows from the quantum regression
theorem: rho(t) s+ is propagated by the same generator as the state.  For a
pulse train the generator is sampled into one-step propagators on a uniform
grid; identical pulses share their propagators and free evolution between
pulses is a single matrix exponential.  All regression vectors are then
pushed forward together, and the t-integrated G2(tau) is accumulated on the
fly so the full (t, tau) surface never has to be held in memory.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson, solve_ivp, trapezoid
from scipy.linalg import expm

from polaron_sim.dynamics import (
    GROUND,
    SP,
    IntegrationError,
    Liouvillian,
    Trajectory,
    _post,
    integrate,
    propagate,
    vec,
)
from polaron_sim.kernel import PhononBath, tabulate_kernel
from polaron_sim.units import (
    CavitySpec,
    ConfigValidationError,
    DriveSpec,
    SimulationConfig,
    energy_to_angular_frequency,
)

SCHEMES = {
    "pi-pulse": (math.pi, 0.0),
    "phonon-assisted": (18.7 * math.pi, 0.48),  # (area, detuning in meV)
}

_RHO_SP = _post(SP)  # vec(rho) -> vec(rho s+)
_TR_SM = 2  # Tr[s- X] = X_eg, index 2 of the row-major vec


class HorizonError(ValueError):
    pass


def efficiency(purcell: float) -> float:
    """Collection efficiency beta = F_P / (1 + F_P)."""
    if purcell < 0:
        raise ValueError("Purcell factor must be >= 0")
    return purcell / (1.0 + purcell)


def scheme_config(base: SimulationConfig, scheme: str, purcell: float | None = None,
                  fullwidth: float = 18.0) -> SimulationConfig:
    """Copy of ``base`` driven by one of the two excitation schemes."""
    theta, det_mev = SCHEMES[scheme]
    cav = base.drive.cavity or CavitySpec()
    if purcell is not None:
        cav = dataclasses.replace(cav, purcell=purcell)
    drive = DriveSpec.from_area(theta, fullwidth / 2.0, energy_to_angular_frequency(det_mev),
                                cavity=cav, center=0.0)
    return dataclasses.replace(base, drive=drive)


@dataclass(frozen=True)
class PulseTrainSpec:
    """Identical pulses every ``period`` (= 2T); pulse 0 is the analysed one.

    ``n_periods`` counts the explicitly simulated periods up to and including
    the analysed pulse, so the default of 2 prepares the state with one
    earlier pulse.  Pulses at 2T and 4T are always included to form the side
    peak.  ``isolated`` drops every pulse but the analysed one.
    """

    drive: DriveSpec
    period: float = 612.0
    n_periods: int = 2
    isolated: bool = False

    def __post_init__(self):
        if self.n_periods < 1:
            raise ConfigValidationError("train.n_periods must be >= 1")
        if self.drive.tau_p * 10 > self.period:
            raise ConfigValidationError("train.period must exceed 10 tau_p")

    @property
    def half_period(self) -> float:
        return self.period / 2.0

    @property
    def fullwidth(self) -> float:
        return 2.0 * self.drive.tau_p

    @property
    def centers(self) -> np.ndarray:
        if self.isolated:
            return np.array([0.0])
        k = np.arange(-(self.n_periods - 1), 3)
        return k * self.period

    @property
    def window(self) -> tuple[float, float]:
        T = self.half_period
        return -(2 * (self.n_periods - 1) + 1) * T, 4 * T

    @classmethod
    def from_config(cls, config: SimulationConfig, **kw) -> PulseTrainSpec:
        return cls(drive=config.drive, period=config.train.period, n_periods=config.train.n_periods, **kw)


def check_lifetime(gamma_total: float, train: PulseTrainSpec) -> bool:
    """Warn (and return False) when 1/(gamma + gamma_tilde) exceeds T/3."""
    if gamma_total <= 0 or 1.0 / gamma_total > train.half_period / 3:
        warnings.warn("radiative lifetime exceeds a third of the half period; G2 peaks will overlap",
                      RuntimeWarning, stacklevel=3)
        return False
    return True


@dataclass
class CorrelationSurface:
    """Integrated G2(tau) for tau >= 0 plus a strided sample of G2(t, tau)."""

    tau: np.ndarray
    g2_integrated: np.ndarray
    t: np.ndarray  # full t grid, uniform, over [-T, T]
    n_x: np.ndarray  # N_x on that grid
    half_period: float
    sample_t: np.ndarray
    sample_tau: np.ndarray
    sample_g2: np.ndarray
    min_value: float
    max_regression_defect: float  # max |G1(t, 0) - N_x(t)|
    trace_defect: float  # of the propagated state over the whole window
    hermiticity_defect: float

    def symmetric(self) -> tuple[np.ndarray, np.ndarray]:
        """G2(tau) mirrored onto negative delays."""
        return (np.concatenate([-self.tau[:0:-1], self.tau]),
                np.concatenate([self.g2_integrated[:0:-1], self.g2_integrated]))

    def center_area(self) -> float:
        m = self.tau <= self.half_period + 1e-9
        return 2.0 * float(trapezoid(self.g2_integrated[m], self.tau[m]))

    def side_area(self) -> float:
        T = self.half_period
        m = (self.tau >= T - 1e-9) & (self.tau <= 3 * T + 1e-9)
        return float(trapezoid(self.g2_integrated[m], self.tau[m]))


class TrainPropagator:
    """Uniform-grid one-step propagators for a pulse train."""

    def __init__(self, config: SimulationConfig, train: PulseTrainSpec, *, step: float = 0.1,
                 solver: str = "analytic", bath: PhononBath | None = None, chunk: float = 1.0):
        T = train.half_period
        if abs(round(T / step) * step - T) > 1e-9 * T:
            raise ValueError("half period must be a whole number of grid steps")
        self.step = step
        self.train = train
        self.config = dataclasses.replace(config, drive=train.drive)
        self.bath = bath if bath is not None else tabulate_kernel(config.bath, config.quadrature)
        t0, t1 = train.window
        self.n_steps = round((t1 - t0) / step)
        self.times = t0 + step * np.arange(self.n_steps + 1)

        single = Liouvillian(self.config, bath=self.bath, solver=solver, centers=[0.0])
        self.free = expm(single.L0 * step)
        half_w = math.ceil(5.0 * train.drive.tau_p / chunk) * chunk
        self._pulse_offsets, self._pulse_props = self._pulse_table(single, half_w, chunk)
        self.pulse_half_width = half_w

        # step j covers [t_j, t_j+1]; map each to a pulse-table entry or free evolution
        self.index = np.full(self.n_steps, -1, dtype=int)
        n_half = round(half_w / step)
        for c in train.centers:
            jc = round((c - t0) / step)
            lo, hi = max(jc - n_half, 0), min(jc + n_half, self.n_steps)
            self.index[lo:hi] = np.arange(lo, hi) - (jc - n_half)

    def _pulse_table(self, gen: Liouvillian, half_w: float, chunk: float):
        ig = self.config.integrator
        n_chunk = round(chunk / self.step)
        edges = np.arange(-half_w, half_w + 1e-9, chunk)
        props = []
        for a in edges[:-1]:
            grid = a + self.step * np.arange(n_chunk + 1)
            y0 = np.eye(4, dtype=complex).reshape(-1)
            sol = solve_ivp(lambda t, y: (gen.matrix(t) @ y.reshape(4, 4)).reshape(-1), (a, a + chunk), y0,
                            method=ig.method, t_eval=grid, rtol=ig.rtol, atol=ig.atol * 1e-2)
            if sol.status != 0:
                raise IntegrationError(f"propagator integration failed: {sol.message}", float(sol.t[-1]))
            phis = sol.y.T.reshape(-1, 4, 4)
            for k in range(n_chunk):
                props.append(phis[k + 1] @ np.linalg.inv(phis[k]))
        return edges[0] + self.step * np.arange(len(props)), np.array(props)

    def step_matrix(self, j: int) -> np.ndarray:
        k = self.index[j]
        return self.free if k < 0 else self._pulse_props[k]

    def states(self, rho0: np.ndarray = GROUND) -> np.ndarray:
        """vec(rho) on every grid time, starting from ``rho0`` at the window start."""
        out = np.empty((self.n_steps + 1, 4), dtype=complex)
        y = vec(rho0)
        out[0] = y
        for j in range(self.n_steps):
            y = self.step_matrix(j) @ y
            out[j + 1] = y
        return out


def g2_surface(config: SimulationConfig, train: PulseTrainSpec | None = None, *, step: float = 0.1,
               solver: str = "analytic", bath: PhononBath | None = None, sample_stride: int = 20,
               propagator: TrainPropagator | None = None) -> CorrelationSurface:
    """Factorised G2(t, tau) = (N(t) N(t + tau) - |G1(t, tau)|^2) / 2 and its t integral.

    t runs over [-T, T] about the analysed pulse, tau over [0, 3T].
    """
    train = train or PulseTrainSpec.from_config(config)
    prop = propagator or TrainPropagator(config, train, step=step, solver=solver, bath=bath)
    step = prop.step
    T = train.half_period
    check_lifetime(config.system.gamma * (1 + train.drive.purcell), train)

    states = prop.states()
    n_all = states[:, 3].real
    t0 = prop.times[0]
    i_lo = round((-T - t0) / step)
    i_hi = round((T - t0) / step)
    n_rows = i_hi - i_lo + 1
    n_tau = round(3 * T / step) + 1
    if i_hi + n_tau - 1 > prop.n_steps:
        raise HorizonError("propagation window too short for tau up to 3T")

    w_rows = np.full(n_rows, step)
    w_rows[0] = w_rows[-1] = step / 2
    curve = np.zeros(n_tau)
    rows = states[i_lo:i_hi + 1] @ _RHO_SP.T  # vec(rho(t) s+)
    n_rows_x = n_all[i_lo:i_hi + 1]
    regression_defect = float(np.max(np.abs(rows[:, _TR_SM] - states[i_lo:i_hi + 1, 3])))

    sample_rows = np.arange(0, n_rows, sample_stride)
    sample_cols = np.arange(0, n_tau, sample_stride)
    sample = np.full((len(sample_rows), len(sample_cols)), np.nan)
    min_value = 0.0

    V = np.zeros((n_rows, 4), dtype=complex)
    for j in range(i_lo, i_hi + n_tau):
        # rows with t_i <= t_j and tau = t_j - t_i <= 3T are live
        a = max(0, j - i_lo - (n_tau - 1))
        b = min(n_rows, j - i_lo + 1)
        if j <= i_hi:
            V[j - i_lo] = rows[j - i_lo]
        live = slice(a, b)
        g1 = V[live, _TR_SM]
        k = j - i_lo - np.arange(a, b)  # tau index per live row
        g2 = 0.5 * (n_rows_x[live] * n_all[j] - (g1.real**2 + g1.imag**2))
        g2[k == 0] = 0.0  # G1(t, 0) = N(t) identically
        curve[k] += w_rows[live] * g2
        min_value = min(min_value, float(g2.min()))
        hit = (k % sample_stride == 0) & (np.arange(a, b) % sample_stride == 0)
        if hit.any():
            rr = np.arange(a, b)[hit] // sample_stride
            sample[rr, k[hit] // sample_stride] = g2[hit]
        if j < prop.n_steps:
            V[live] = V[live] @ prop.step_matrix(j).T

    return CorrelationSurface(
        tau=step * np.arange(n_tau),
        g2_integrated=curve,
        t=prop.times[i_lo:i_hi + 1],
        n_x=n_rows_x,
        half_period=T,
        sample_t=prop.times[i_lo:i_hi + 1][sample_rows],
        sample_tau=step * sample_cols,
        sample_g2=sample,
        min_value=min_value,
        max_regression_defect=regression_defect,
        trace_defect=float(np.max(np.abs(states[:, 0] + states[:, 3] - 1.0))),
        hermiticity_defect=float(np.max(np.abs(states[:, 1] - states[:, 2].conj()))),
    )


def g1(t: float, tau: float, config: SimulationConfig, train: PulseTrainSpec | None = None, *,
       solver: str = "analytic", bath: PhononBath | None = None) -> complex:
    """G1(t, tau) for one pair of times by direct regression integration."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    train = train or PulseTrainSpec.from_config(config)
    t0, t1 = train.window
    if not t0 <= t <= t1 or t + tau > t1:
        raise HorizonError(f"(t, t + tau) = ({t}, {t + tau}) outside the simulated window [{t0}, {t1}]")
    cfg = dataclasses.replace(config, drive=train.drive)
    gen = Liouvillian(cfg, bath=bath, solver=solver, centers=train.centers)
    ig = cfg.integrator
    rho_t = vec(GROUND)
    if t > t0:
        rho_t = propagate(gen, rho_t, t0, t, rtol=ig.rtol, atol=ig.atol, method=ig.method, dense=False).y[:, -1]
    v = _RHO_SP @ rho_t
    if tau > 0:
        v = propagate(gen, v, t, t + tau, rtol=ig.rtol, atol=ig.atol, method=ig.method, dense=False).y[:, -1]
    return complex(v[_TR_SM])


def indistinguishability(surface: CorrelationSurface) -> float:
    """1 - (centre-peak area over [-T, T]) / (side-peak area over [T, 3T])."""
    side = surface.side_area()
    if side < 1e-12:
        raise ZeroDivisionError(f"side-peak area {side:.3g} too small; indistinguishability undefined")
    return 1.0 - surface.center_area() / side


def emitted_photon_number(traj: Trajectory, gamma_tilde: float, *, tail_tol: float = 1e-6) -> float:
    """Integral of gamma_tilde N_x(t) over the trajectory, which must end decayed."""
    if gamma_tilde == 0:
        return 0.0
    if traj.n_x[-1] > tail_tol:
        raise HorizonError(f"N_x = {traj.n_x[-1]:.3g} at the end of the trajectory; extend the horizon")
    return float(gamma_tilde * simpson(traj.n_x, x=traj.times))


def single_pulse_trajectory(config: SimulationConfig, *, solver: str = "analytic", bath: PhononBath | None = None,
                            tail_tol: float = 1e-6, dt: float = 0.02) -> Trajectory:
    """One isolated pulse, integrated until N_x has decayed below ``tail_tol`` (if it decays at all)."""
    d = config.drive
    t0 = d.center - 5 * d.tau_p
    t1 = d.center + 5 * d.tau_p + (math.log(1.0 / tail_tol) + 5.0) / max(config.gamma_total, 1e-3)
    n = math.ceil((t1 - t0) / dt)
    n += n % 2
    grid = np.linspace(t0, t1, n + 1)
    return integrate(config, solver=solver, t_eval=grid, t_end=t1, bath=bath)


def single_pulse_emission(config: SimulationConfig, *, solver: str = "analytic", bath: PhononBath | None = None,
                          tail_tol: float = 1e-6, dt: float = 0.02) -> float:
    """n_ems for one isolated pulse, integrating until the exciton has decayed."""
    g_tilde = config.system.gamma * config.drive.purcell
    if g_tilde == 0:
        return 0.0
    traj = single_pulse_trajectory(config, solver=solver, bath=bath, tail_tol=tail_tol, dt=dt)
    return emitted_photon_number(traj, g_tilde, tail_tol=tail_tol)


@dataclass(frozen=True)
class SourceSummary:
    scheme: str
    purcell: float
    indistinguishability: float
    beta: float
    n_ems: float


def photon_source(config: SimulationConfig, scheme: str | None = None, purcell: float | None = None, *,
                  step: float = 0.1, solver: str = "analytic") -> tuple[SourceSummary, CorrelationSurface]:
    """All figures of merit for one excitation scheme and Purcell factor."""
    cfg = scheme_config(config, scheme, purcell) if scheme is not None else config
    fp = cfg.drive.purcell
    bath = tabulate_kernel(cfg.bath, cfg.quadrature)
    surface = g2_surface(cfg, step=step, solver=solver, bath=bath)
    summary = SourceSummary(
        scheme=scheme or "custom",
        purcell=fp,
        indistinguishability=indistinguishability(surface),
        beta=efficiency(fp),
        n_ems=single_pulse_emission(cfg, solver=solver, bath=bath),
    )
    return summary, surface


def side_peak_from_single_pulses(config: SimulationConfig, *, bath: PhononBath | None = None,
                                 dt: float = 0.05) -> float:
    """Side-peak area assuming the emitter fully resets between pulses.

    Without memory between pulses G1(t, tau) across two pulses factorises
    into <s+(t)><s-(t + tau)>, so the area follows from one isolated pulse:
    ((int N dt)^2 - (int |<s->|^2 dt)^2) / 2.  Independent of the regression
    machinery and used to check it.
    """
    T = config.train.period / 2
    c = config.drive.center
    ig = dataclasses.replace(config.integrator, t_start=c - T)
    grid = np.linspace(c - T, c + T, round(2 * T / dt) + 1)
    traj = integrate(dataclasses.replace(config, integrator=ig), t_eval=grid, t_end=grid[-1], bath=bath)
    total_n = simpson(traj.n_x, x=grid)
    total_c2 = simpson(np.abs(traj.states[:, 1, 0]) ** 2, x=grid)
    return 0.5 * (total_n**2 - total_c2**2)


__all__ = [
    "SCHEMES",
    "CorrelationSurface",
    "HorizonError",
    "PulseTrainSpec",
    "SourceSummary",
    "TrainPropagator",
    "check_lifetime",
    "efficiency",
    "emitted_photon_number",
    "g1",
    "g2_surface",
    "indistinguishability",
    "photon_source",
    "scheme_config",
    "side_peak_from_single_pulses",
    "single_pulse_emission",
    "single_pulse_trajectory",
]
