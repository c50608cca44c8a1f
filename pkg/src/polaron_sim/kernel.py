"""Phonon spectral function, correlation kernel phi(tau) and <B>.

phi is evaluated with QUADPACK's oscillatory rule and tabulated once per
bath on a uniform tau grid; every rate integral downstream reads the table.
A composite Gauss-Legendre rule is kept alongside as an independent check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from polaron_sim.units import HBAR, KB, BathParams, QuadratureSettings


class KernelError(ArithmeticError):
    """Quadrature failed to meet its error budget."""

    def __init__(self, msg: str, error_estimate: float = float("nan")):
        super().__init__(msg)
        self.error_estimate = error_estimate


def spectral_density(omega, bath):
    """J(omega) = alpha_p omega^3 exp(-omega^2 / 2 omega_b^2), in 1/ps."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("spectral_density is defined for omega >= 0")
    out = bath.alpha_p * omega**3 * np.exp(-(omega**2) / (2.0 * bath.omega_b**2))
    return out if out.ndim else float(out)


def _x_coth_x(x):
    """x coth(x), finite at x = 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x * x / 3.0, safe / np.tanh(safe))


def _thermal_weight(omega, bath):
    """(J(omega) / omega^2) coth(hbar omega / 2 kB T); limit alpha_p 2kBT/hbar at 0."""
    scale = 2.0 * KB * bath.temperature / HBAR  # 1/ps
    x = omega / scale
    return bath.alpha_p * scale * _x_coth_x(x) * np.exp(-(omega**2) / (2.0 * bath.omega_b**2))


def _bare_weight(omega, bath):
    """J(omega) / omega^2."""
    return bath.alpha_p * omega * np.exp(-(omega**2) / (2.0 * bath.omega_b**2))


def phi_with_error(tau: float, bath, *, cutoff_factor: float = 8.0, epsrel: float = 1e-12,
                   epsabs: float = 1e-15, budget: float = 1e-9) -> tuple[complex, float]:
    """phi(tau) and the summed quadrature error estimate."""
    if tau < 0:
        raise ValueError("phi is tabulated for tau >= 0 only")
    if bath.alpha_p == 0:
        return 0j, 0.0
    w_max = cutoff_factor * bath.omega_b
    kw = {"epsabs": epsabs, "epsrel": epsrel, "limit": 500}

    def re_f(w):
        return float(_thermal_weight(w, bath))

    def im_f(w):
        return float(_bare_weight(w, bath))

    if tau == 0:
        re, e1 = quad(re_f, 0.0, w_max, **kw)
        im, e2 = 0.0, 0.0
    else:
        re, e1 = quad(re_f, 0.0, w_max, weight="cos", wvar=tau, **kw)
        im, e2 = quad(im_f, 0.0, w_max, weight="sin", wvar=tau, **kw)
    err = e1 + e2
    if not err <= budget:
        raise KernelError(f"phi({tau}) quadrature error {err:.3g} exceeds budget {budget:.3g}", err)
    return complex(re, -im), err


def phi(tau: float, bath, *, cutoff_factor: float = 8.0) -> complex:
    """Phonon correlation function phi(tau) by adaptive quadrature."""
    return phi_with_error(tau, bath, cutoff_factor=cutoff_factor)[0]


def _gl_nodes(w_max: float, tau_max: float, order: int = 20):
    """Composite Gauss-Legendre nodes on [0, w_max], panels <= pi / (4 tau_max)."""
    width = w_max / 16.0
    if tau_max > 0:
        width = min(width, math.pi / (4.0 * tau_max))
    n_panels = max(1, math.ceil(w_max / width))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, w_max, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def phi_gauss_legendre(tau, bath, *, cutoff_factor: float = 8.0, order: int = 20) -> np.ndarray:
    """phi on an array of tau by a fixed composite Gauss-Legendre rule.

    Independent of :func:`phi` (different node family, no adaptivity); used as
    the cross-check oracle and for scanning the decay of the kernel.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if bath.alpha_p == 0:
        return np.zeros(tau.shape, dtype=complex)
    w_max = cutoff_factor * bath.omega_b
    nodes, weights = _gl_nodes(w_max, float(tau.max()), order)
    wc = weights * _thermal_weight(nodes, bath)
    ws = weights * _bare_weight(nodes, bath)
    arg = np.outer(tau, nodes)
    return np.cos(arg) @ wc - 1j * (np.sin(arg) @ ws)


def bath_displacement(bath, *, cutoff_factor: float = 8.0) -> float:
    """Thermal displacement factor <B> = exp(-phi(0)/2)."""
    if isinstance(bath, PhononBath):
        return bath.B_avg
    return math.exp(-phi(0.0, bath, cutoff_factor=cutoff_factor).real / 2.0)


@dataclass(frozen=True, eq=False)
class PhononBath:
    """Bath parameters together with the tabulated kernel phi(tau), tau >= 0."""

    alpha_p: float
    omega_b: float
    temperature: float
    B_avg: float
    tau: np.ndarray
    phi_table: np.ndarray
    tau_max: float
    step: float

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.tau, self.phi_table)

    def phi_interp(self, tau):
        """Interpolated phi; zero beyond the memory cutoff."""
        tau = np.asarray(tau, dtype=float)
        out = np.where(tau <= self.tau_max, self._spline(np.clip(tau, 0.0, self.tau_max)), 0.0)
        return out if out.ndim else complex(out)

    @cached_property
    def simpson_weights(self) -> np.ndarray:
        n = len(self.tau)
        w = np.ones(n)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * self.step / 3.0

    @cached_property
    def green_g(self) -> np.ndarray:
        """G_g / <B>^2 = cosh(phi) - 1 on the table grid."""
        return np.cosh(self.phi_table) - 1.0

    @cached_property
    def green_u(self) -> np.ndarray:
        """G_u / <B>^2 = sinh(phi) on the table grid."""
        return np.sinh(self.phi_table)

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau_ps", "re_phi", "im_phi"])
            for t, p in zip(self.tau, self.phi_table):
                w.writerow([f"{t:.9g}", f"{p.real:.9g}", f"{p.imag:.9g}"])


def _memory_cutoff(bath, cutoff_factor: float, tol: float, scan_max: float) -> float:
    """Smallest tau beyond which |phi| stays below tol over a trailing window."""
    if bath.alpha_p == 0:
        return 0.0
    tail = max(2.0, 3.0 / bath.omega_b)
    span = max(8.0 / bath.omega_b, 2.0 * tail)
    while True:
        grid = np.arange(0.0, span + 0.05, 0.05)
        mag = np.abs(phi_gauss_legendre(grid, bath, cutoff_factor=cutoff_factor))
        above = np.nonzero(mag >= tol)[0]
        last = grid[above[-1]] if len(above) else 0.0
        if span - last >= tail:
            return last + 0.05
        if span >= scan_max:
            raise KernelError(f"|phi| does not fall below {tol:g} within {scan_max:g} ps")
        span = min(2.0 * span, scan_max)


@lru_cache(maxsize=64)
def _tabulate(alpha_p, omega_b, temperature, cutoff_factor, tol, step, scan_max) -> PhononBath:
    params = BathParams(alpha_p, omega_b, temperature)
    tau_max = _memory_cutoff(params, cutoff_factor, tol, scan_max)
    n = max(2, math.ceil(tau_max / step))
    n += n % 2  # Simpson needs an even panel count
    h = step
    tau_max = n * h
    tau = np.linspace(0.0, tau_max, n + 1)
    if alpha_p == 0:
        table = np.zeros(n + 1, dtype=complex)
    else:
        table = np.array([phi(t, params, cutoff_factor=cutoff_factor) for t in tau])
    if abs(table[-1]) >= tol:
        raise KernelError(f"|phi(tau_max)| = {abs(table[-1]):.3g} not below {tol:g}")
    b_avg = math.exp(-table[0].real / 2.0)
    tau.flags.writeable = False
    table.flags.writeable = False
    return PhononBath(alpha_p, omega_b, temperature, b_avg, tau, table, tau_max, h)


def tabulate_kernel(bath, quadrature=None) -> PhononBath:
    """Sample phi on a uniform grid over [0, tau_max] for reuse by the rates.

    ``bath`` is anything with ``alpha_p``, ``omega_b`` (1/ps) and
    ``temperature``; ``quadrature`` is a ``QuadratureSettings`` (defaults if
    omitted).  Results are cached per parameter set.
    """
    q = quadrature or QuadratureSettings()
    return _tabulate(float(bath.alpha_p), float(bath.omega_b), float(bath.temperature),
                     float(q.omega_cutoff_factor), float(q.kernel_tol), float(q.tau_step),
                     float(q.tau_scan_max))
