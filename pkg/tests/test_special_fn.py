import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from helmtrace import special_fn as sf

mp.mp.dps = 40


def _mp_rel(a, b):
    return abs(complex(a) - complex(b)) / abs(complex(b))


# --- spot values -------------------------------------------------------------

def test_bessel_i0_at_one_matches_power_series():
    series = math.fsum(0.25 ** m / math.factorial(m) ** 2 for m in range(30))
    assert abs(sf.bessel_i(0, 1.0) - series) <= 1e-15 * series
    assert abs(series - 1.2660658777520) < 1e-12


def test_bessel_i0_tiny_argument_is_one():
    assert abs(sf.bessel_i(0, 1e-8) - 1.0) <= 1e-15


def test_bessel_i_three_term_recurrence_complex():
    z = 2 + 3j
    lhs = sf.bessel_i(2, z) - sf.bessel_i(4, z)
    rhs = 6 / z * sf.bessel_i(3, z)
    assert abs(lhs - rhs) <= 1e-12 * abs(rhs)


def test_bessel_k0_at_one_matches_integral_representation():
    # integrand is below 1e-300 beyond t = 8
    ref, _ = integrate.quad(lambda t: math.exp(-math.cosh(t)), 0, 8.0, epsabs=0, epsrel=1e-13)
    assert abs(sf.bessel_k(0, 1.0) - ref) <= 1e-13 * ref
    assert abs(ref - 0.4210244382407) < 1e-12


def test_bessel_k0_decay_envelope():
    v = sf.bessel_k(0, 10.0)
    assert v.imag == 0 and 0 < v.real < 2 * math.exp(-10)
    assert v.real <= math.sqrt(math.pi / 20) * math.exp(-10)


def test_wronskian_k1_complex():
    z = 2 + 3j
    w = sf.bessel_i_prime(1, z) * sf.bessel_k(1, z) - sf.bessel_i(1, z) * sf.bessel_k_prime(1, z)
    assert abs(w - 1 / z) <= 1e-12 * abs(1 / z)


def test_log_deriv_small_argument_limits():
    s = 1e-4
    assert abs(sf.log_deriv_i(0, s) / (s / 2) - 1) <= 1e-6
    s = 1e-3
    assert abs(sf.log_deriv_i(32, s) / (32 / s) - 1) <= 1e-4
    s = 1e-6
    v = sf.log_deriv_k(0, s)
    assert v.real < 0 and abs(v) > 1e4
    ratio = -sf.bessel_k(1, s) / sf.bessel_k(0, s)
    assert abs(v - ratio) <= 1e-12 * abs(ratio)


def test_spherical_closed_forms():
    for z in (0.3, 1.0, 2 + 1j, 40.0):
        assert abs(sf.sph_k(0, z) - math.pi / (2 * z) * np.exp(-z)) <= 1e-14 * abs(sf.sph_k(0, z))
        # -z k_0'/k_0 = 1 + z
        assert abs(-z * sf.sph_log_deriv_k(0, z) - (1 + z)) <= 1e-13 * abs(1 + z)
    assert abs(sf.sph_i(0, 1.0) - math.sinh(1.0)) <= 1e-15
    assert abs(math.sinh(1.0) - 1.1752011936) < 1e-10


# --- mpmath oracles ------------------------------------------------------------

@pytest.mark.parametrize("k", [0, 1, 7, 32, 64, 200, 256])
@pytest.mark.parametrize("z", [1e-3, 0.7, 5 + 5j, 90 * np.exp(-1.2j), 150.0, 2e3 * np.exp(0.9j)])
def test_log_derivatives_against_mpmath(k, z):
    zi = mp.mpc(z)
    ia = mp.besseli(k, zi)
    ip = (mp.besseli(k - 1, zi) + mp.besseli(k + 1, zi)) / 2
    ka = mp.besselk(k, zi)
    kp = -(mp.besselk(k - 1, zi) + mp.besselk(k + 1, zi)) / 2
    assert _mp_rel(sf.log_deriv_i(k, z), ip / ia) <= 1e-12
    assert _mp_rel(sf.log_deriv_k(k, z), kp / ka) <= 1e-12


@pytest.mark.parametrize("l", [0, 1, 5, 40, 128])
@pytest.mark.parametrize("z", [1e-3, 1.0, 3 - 2j, 500.0])
def test_spherical_log_derivatives_against_mpmath(l, z):
    zi = mp.mpc(z)
    f = lambda nu: mp.besseli(nu, zi)
    g = lambda nu: mp.besselk(nu, zi)
    # i_l = sqrt(pi/2z) I_{l+1/2}: log-derivative is I'/I - 1/(2z)
    di = (f(l - 0.5) + f(l + 1.5)) / (2 * f(l + 0.5)) - 1 / (2 * zi)
    dk = -(g(l - 0.5) + g(l + 1.5)) / (2 * g(l + 0.5)) - 1 / (2 * zi)
    assert _mp_rel(sf.sph_log_deriv_i(l, z), di) <= 1e-12
    assert _mp_rel(sf.sph_log_deriv_k(l, z), dk) <= 1e-12


def test_log_bessel_values_against_mpmath():
    for z in (1e-2, 3 + 4j, 800.0, 5e3 * np.exp(0.3j)):
        li, _ = sf.log_i_with_derivs(64, z)
        lk, _ = sf.log_k_with_derivs(64, z)
        for k in (0, 10, 64):
            ri = complex(mp.log(mp.besseli(k, mp.mpc(z))))
            rk = complex(mp.log(mp.besselk(k, mp.mpc(z))))
            # logs agree modulo 2 pi i
            d = li[k, 0] - ri
            assert abs(d.real) <= 1e-12 * max(1, abs(ri.real))
            assert abs(math.remainder(d.imag, 2 * math.pi)) <= 1e-10
            d = lk[k, 0] - rk
            assert abs(d.real) <= 1e-12 * max(1, abs(rk.real))
            assert abs(math.remainder(d.imag, 2 * math.pi)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(k=st.integers(0, 64), logmag=st.floats(-3, 3), phase=st.floats(-1.5, 1.5))
def test_i_ratio_property_against_mpmath(k, logmag, phase):
    z = 10 ** logmag * np.exp(1j * phase)
    got = sf.i_ratios(k, z)[k, 0]
    ref = mp.besseli(k + 1, mp.mpc(z)) / mp.besseli(k, mp.mpc(z))
    assert _mp_rel(got, ref) <= 1e-12


def test_high_order_ratios_past_scaled_underflow():
    # order far beyond where the scaled routine underflows
    z = 1000.0
    r = sf.i_ratios(20000, z)[:, 0]
    for k in (0, 5000, 20000):
        ref = mp.besseli(k + 1, z) / mp.besseli(k, z)
        assert _mp_rel(r[k], ref) <= 1e-13


# --- invariants -------------------------------------------------------------------

def test_wronskian_random_points():
    rng = np.random.default_rng(7)
    for _ in range(300):
        k = int(rng.integers(0, 65))
        z = 10 ** rng.uniform(-3, 3) * np.exp(1j * rng.uniform(-1.5, 1.5))
        assert sf.scaled_wronskian_residual(k, z) <= 1e-11


@pytest.mark.parametrize("z", [0.01, 1.0, 3 + 2j, 30 - 20j])
def test_recurrence_residuals(z):
    iv = [sf.bessel_i(k, z) for k in range(66)]
    kv = [sf.bessel_k(k, z) for k in range(66)]
    for k in range(1, 65):
        ri = iv[k - 1] - iv[k + 1] - 2 * k / z * iv[k]
        rk = kv[k + 1] - kv[k - 1] - 2 * k / z * kv[k]
        assert abs(ri) <= 1e-11 * max(abs(iv[k - 1]), abs(iv[k + 1]))
        assert abs(rk) <= 1e-11 * max(abs(kv[k - 1]), abs(kv[k + 1]))


@pytest.mark.parametrize("s", [1e-3, 0.5, 7.0, 300.0])
def test_positivity_on_real_axis(s):
    for k in (0, 1, 10, 64):
        assert sf.bessel_i(k, s).real > 0 and sf.bessel_k(k, s).real > 0
        assert sf.log_deriv_i(k, s).real > 0
        assert sf.log_deriv_k(k, s).real < 0


def test_conjugate_symmetry():
    for k in (0, 3, 40):
        for z in (0.4 + 2j, 12 + 30j, 250 + 100j):
            assert abs(sf.log_deriv_i(k, np.conj(z)) - np.conj(sf.log_deriv_i(k, z))) <= 1e-13 * abs(sf.log_deriv_i(k, z))
            assert abs(sf.bessel_k(k, np.conj(z)) - np.conj(sf.bessel_k(k, z))) <= 1e-13 * abs(sf.bessel_k(k, z))


def test_switchover_is_continuous():
    rad = sf._TUNING["recurrence_radius"]
    for phase in np.linspace(-1.5, 1.5, 7):
        below = sf.i_ratios(sf.MAX_ORDER, rad * (1 - 1e-9) * np.exp(1j * phase))
        above = sf.i_ratios(sf.MAX_ORDER, rad * (1 + 1e-9) * np.exp(1j * phase))
        assert np.max(np.abs(below - above) / np.abs(above)) <= 1e-8


def test_corrupted_tuning_breaks_and_restores():
    z = np.array([500.0 + 0j])
    good = sf.i_ratios(32, z)
    with sf.corrupted_tuning(recurrence_radius=1e7, growth=0.0, start_pad=2):
        bad = sf.i_ratios(32, z)
    assert np.max(np.abs(bad - good) / np.abs(good)) > 1e-3
    assert np.array_equal(sf.i_ratios(32, z), good)


# --- errors -------------------------------------------------------------------------

def test_domain_errors():
    with pytest.raises(sf.DomainError):
        sf.bessel_i(0, -1.0)
    with pytest.raises(sf.DomainError):
        sf.bessel_k(0, 1j)
    with pytest.raises(sf.DomainError):
        sf.bessel_i(257, 1.0)
    with pytest.raises(sf.DomainError):
        sf.bessel_i(1.5, 1.0)
    with pytest.raises(sf.DomainError):
        sf.sph_i(129, 1.0)
    with pytest.raises(sf.DomainError):
        sf.bessel_k(0, 2e6)


def test_overflow_is_reported():
    with pytest.raises(sf.RangeError):
        sf.bessel_i(0, 1e5)
    # K underflows instead; zero is the representable answer
    v = sf.bessel_k(0, 1e5)
    assert v == 0 or abs(v) < 1e-300
