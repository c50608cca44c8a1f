from __future__ import annotations

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar
from support import BATH

from polaron_sim.kernel import (
    KernelError,
    bath_displacement,
    phi,
    phi_gauss_legendre,
    phi_with_error,
    spectral_density,
    tabulate_kernel,
)
from polaron_sim.units import BathParams


def test_spectral_density_zero():
    assert spectral_density(0.0, BATH) == 0.0


def test_spectral_density_negative_raises():
    with pytest.raises(ValueError):
        spectral_density(-0.1, BATH)


def test_spectral_density_at_omega_b():
    b = BathParams(0.03, 1.5193, 4.2)
    assert spectral_density(1.5193, b) == pytest.approx(0.03 * 1.5193**3 * math.exp(-0.5), rel=1e-15)


def test_spectral_density_argmax():
    res = minimize_scalar(lambda w: -spectral_density(w, BATH), bounds=(0.1, 10), method="bounded",
                          options={"xatol": 1e-10})
    assert res.x == pytest.approx(math.sqrt(3) * BATH.omega_b, rel=1e-6)


@given(st.floats(min_value=1e-6, max_value=20))
def test_spectral_density_positive(w):
    assert spectral_density(w, BATH) > 0


def test_phi0_dual_quadrature():
    a, _ = phi_with_error(0.0, BATH)
    b = phi_gauss_legendre([0.0], BATH)[0]
    assert a.imag == 0.0
    assert a.real > 0
    assert abs(a - b) / abs(a) < 1e-8


def test_im_phi_closed_form():
    # Im phi(tau) = -alpha sqrt(pi/2) omega_b^3 tau exp(-omega_b^2 tau^2 / 2)
    a, wb = BATH.alpha_p, BATH.omega_b
    for tau in (0.1, 0.5, 1.0, 2.0, 4.0):
        exact = -a * math.sqrt(math.pi / 2) * wb**3 * tau * math.exp(-0.5 * (wb * tau) ** 2)
        assert phi(tau, BATH).imag == pytest.approx(exact, rel=1e-9, abs=1e-13)


def test_re_phi0_low_temperature_limit():
    # coth -> 1 as T -> 0, leaving alpha omega_b^2
    cold = BathParams(BATH.alpha_p, BATH.omega_b, 1e-3)
    assert phi(0.0, cold).real == pytest.approx(BATH.alpha_p * BATH.omega_b**2, rel=1e-10)


def test_phi_off_grid_dual_quadrature():
    taus = np.linspace(0.05, 6.0, 25)
    gl = phi_gauss_legendre(taus, BATH)
    direct = np.array([phi(t, BATH) for t in taus])
    assert np.max(np.abs(gl - direct)) < 1e-9


def test_quadrature_error_budget():
    with pytest.raises(KernelError) as info:
        phi_with_error(0.0, BATH, epsabs=0.0, epsrel=1e-3, budget=1e-30)
    assert info.value.error_estimate > 0


def test_tolerance_halving_converged():
    a, err = phi_with_error(0.0, BATH, epsrel=1e-10)
    b, _ = phi_with_error(0.0, BATH, epsrel=5e-11)
    assert abs(a - b) <= max(err, 1e-15)


def test_bath_displacement():
    b = bath_displacement(BATH)
    assert 0 < b < 1
    assert b == pytest.approx(math.exp(-phi(0.0, BATH).real / 2), rel=1e-15)
    gl = math.exp(-phi_gauss_legendre([0.0], BATH)[0].real / 2)
    assert abs(b - gl) / b < 1e-8
    assert bath_displacement(BathParams(0.0, BATH.omega_b, 4.2)) == 1.0
    assert bath_displacement(BathParams(BATH.alpha_p, BATH.omega_b, 10.0)) < b


@settings(max_examples=25, deadline=None)
@given(
    alpha=st.floats(min_value=0.001, max_value=0.1),
    t1=st.floats(min_value=1.0, max_value=50.0),
    dt=st.floats(min_value=0.5, max_value=50.0),
)
def test_bath_displacement_monotone(alpha, t1, dt):
    lo = bath_displacement(BathParams(alpha, BATH.omega_b, t1))
    hi_t = bath_displacement(BathParams(alpha, BATH.omega_b, t1 + dt))
    hi_a = bath_displacement(BathParams(alpha * 1.5, BATH.omega_b, t1))
    assert 0 < hi_t < lo <= 1
    assert hi_a < lo


def test_table_endpoints(bath):
    assert bath.phi_table[0] == phi(0.0, BATH)
    assert abs(bath.phi_table[-1]) < 1e-8
    assert bath.tau[0] == 0.0 and bath.tau[-1] == pytest.approx(bath.tau_max)
    assert bath.step <= 0.01
    assert bath.B_avg == pytest.approx(bath_displacement(BATH), rel=1e-15)
    assert 3.0 < bath.tau_max < 10.0


def test_table_interpolation_vs_direct(bath):
    rng = np.random.default_rng(20240611)
    taus = rng.uniform(0, bath.tau_max, 100)
    interp = bath.phi_interp(taus)
    direct = np.array([phi(t, BATH) for t in taus])
    assert np.max(np.abs(interp - direct)) < 1e-7


def test_table_decays_beyond_few_inverse_cutoffs(bath):
    mag = np.abs(bath.phi_table)
    tail = mag[bath.tau >= 4.0 / BATH.omega_b]
    assert np.all(np.diff(tail) <= 1e-12)


def test_table_envelope(bath):
    lhs = np.abs(np.exp(bath.phi_table) - 1.0)
    assert np.all(lhs <= math.expm1(bath.phi_table[0].real) + 1e-15)


def test_green_function_identity(bath):
    b2 = bath.B_avg**2
    gg, gu = b2 * bath.green_g, b2 * bath.green_u
    assert np.max(np.abs(gg + gu - b2 * np.expm1(bath.phi_table))) < 1e-12


def test_zero_coupling_table():
    b = tabulate_kernel(BathParams(0.0, BATH.omega_b, 4.2))
    assert b.B_avg == 1.0
    assert np.all(b.phi_table == 0)


def test_table_is_cached_and_readonly(bath):
    assert tabulate_kernel(BATH) is bath
    with pytest.raises(ValueError):
        bath.phi_table[0] = 0


def test_dump_csv(bath, tmp_path):
    path = tmp_path / "kernel.csv"
    bath.dump_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["tau_ps", "re_phi", "im_phi"]
    assert len(rows) == len(bath.tau) + 1
    assert float(rows[1][1]) == pytest.approx(bath.phi_table[0].real, rel=1e-8)
