import io
import math

import mpmath as mp
import numpy as np
import pytest

from helmtrace import special_fn as sf
from helmtrace.layer_ops import (
    BOUND_NAMES,
    BoundReport,
    check_coercivity,
    check_continuity_bounds,
    check_normal_derivative_bound,
    k_quadrature_oracle,
    layer_spectrum,
    sweep_bounds,
    v_quadrature_oracle,
)

mp.mp.dps = 40


def _mp_products(k, s):
    z = mp.mpc(s)
    I, K = mp.besseli(k, z), mp.besselk(k, z)
    Ip = (mp.besseli(k - 1, z) + mp.besseli(k + 1, z)) / 2
    Kp = -(mp.besselk(k - 1, z) + mp.besselk(k + 1, z)) / 2
    return I * K, z * (Ip * K + I * Kp) / 2, z * z * Ip * Kp


def _rel(a, b):
    return abs(complex(a) - complex(b)) / abs(complex(b))


# --- spectrum --------------------------------------------------------------------

@pytest.mark.parametrize("s", [1e-3, 0.2 + 0.1j, 1.0, 4 * np.exp(1.3j), 60.0, 900 * np.exp(-0.7j)])
def test_operators_against_mpmath(s):
    spec = layer_spectrum(s, 128)
    for k in (0, 1, 2, 9, 40, 128):
        v, kk, w = _mp_products(k, s)
        assert _rel(spec.V[k], v) <= 1e-11
        assert _rel(spec.K[k], kk) <= 1e-9
        assert _rel(spec.W[k], w) <= 1e-11


def test_v0_at_one():
    spec = layer_spectrum(1.0, 0)
    # 1.266066 * 0.421024 rounds to 0.533043; the unrounded product is 0.5330447
    assert abs(spec.V[0] - 0.5330447) < 1e-7
    assert abs(v_quadrature_oracle(0, 1.0) - spec.V[0]) <= 1e-8


@pytest.mark.parametrize("s", [1e-3, 0.5 - 0.4j, 3.0, 12 * np.exp(1.4j), 500.0])
def test_jump_relations(s):
    spec = layer_spectrum(s, 64)
    assert np.max(np.abs(spec.jump("S", "dir"))) == 0
    assert np.max(np.abs(spec.jump("S", "neu") - 1)) <= 1e-11
    assert np.max(np.abs(spec.jump("D", "dir") + 1)) <= 1e-11
    assert np.max(np.abs(spec.jump("D", "neu"))) == 0
    assert np.array_equal(spec.K, spec.Kdual)


def test_apply_and_zero_data():
    spec = layer_spectrum(2.0, 8)
    c = np.zeros(9, dtype=complex)
    for op in ("V", "K", "Kdual", "W"):
        assert np.all(spec.apply(op, c) == 0)
    e = np.zeros(5, dtype=complex)
    e[3] = 1.0
    assert spec.apply("V", e)[3] == spec.V[1]
    with pytest.raises(ValueError):
        spec.apply("V", np.zeros(21))


def test_domain_checks():
    with pytest.raises(ValueError):
        layer_spectrum(-1.0, 4)
    with pytest.raises(sf.DomainError):
        layer_spectrum(2e3, 4)
    with pytest.raises(sf.DomainError):
        layer_spectrum(1.0, 129)


def test_large_mode_limits():
    # h|V| -> pi, |K| -> 0, 2 pi |W| / h -> 1/2 as k grows
    from helmtrace.extension_spectral import dtn_disk_modes
    for s in (0.5, 3.0):
        spec = layer_spectrum(s, 128)
        h = 2 * math.pi * dtn_disk_modes(128, abs(s))
        assert abs(h[128] * abs(spec.V[128]) - math.pi) < 1e-3
        assert abs(spec.K[128]) < 1e-3
        assert abs(2 * math.pi * abs(spec.W[128]) / h[128] - 0.5) < 1e-3


# --- quadrature oracles ------------------------------------------------------------

def test_v_oracle_examples():
    assert abs(v_quadrature_oracle(0, 1.0) - complex(_mp_products(0, 1.0)[0])) <= 1e-8
    s = 1 + 1j
    assert _rel(v_quadrature_oracle(5, s), _mp_products(5, s)[0]) <= 1e-7
    v = v_quadrature_oracle(3, 50.0)
    assert abs(v) <= 1.1 / (2 * 50)


@pytest.mark.parametrize("phase", [0.0, 0.8, -1.4])
@pytest.mark.parametrize("sigma", [1e-3, 0.3, 2.0, 10.0])
def test_v_oracle_against_spectrum(sigma, phase):
    s = sigma * np.exp(1j * phase)
    spec = layer_spectrum(s, 32)
    for k in (0, 1, 4, 13, 32):
        assert _rel(v_quadrature_oracle(k, s), spec.V[k]) <= 1e-7


@pytest.mark.parametrize("phase", [0.0, 0.8, -1.4])
@pytest.mark.parametrize("sigma", [1e-3, 0.3, 2.0, 10.0])
def test_k_oracle_against_spectrum(sigma, phase):
    s = sigma * np.exp(1j * phase)
    spec = layer_spectrum(s, 16)
    for k in (0, 1, 5, 16):
        assert _rel(k_quadrature_oracle(k, s), spec.K[k]) <= 1e-7


def test_oracle_mode_cap():
    with pytest.raises(sf.DomainError):
        v_quadrature_oracle(33, 1.0)
    with pytest.raises(sf.DomainError):
        k_quadrature_oracle(33, 1.0)


# --- bounds ----------------------------------------------------------------------------

def test_bounds_real_unit_wavenumber():
    spec = layer_spectrum(1.0, 0)
    rep = check_continuity_bounds(spec)
    assert not rep.violations
    assert {r[3] for r in rep.rows} == set(BOUND_NAMES)
    v_row = [r for r in rep.rows if r[3] == "V"][0]
    i1k0 = float(mp.besseli(1, 1) * mp.besselk(0, 1))
    assert abs(v_row[4] - 2 * math.pi * i1k0) < 1e-12
    assert abs(i1k0 - 0.2380) < 1e-4 and v_row[4] < 2 * math.pi


def test_bounds_near_imaginary_axis():
    s = 2.0 * np.exp(1.45j)
    rep = check_continuity_bounds(layer_spectrum(s, 64))
    assert not rep.violations
    assert abs(1 / math.cos(1.45) - 8.2985) < 1e-4
    assert len(rep.rows) == 6 * 65


def test_bound_report_csv_and_worst():
    rep = BoundReport()
    rep.add(1 + 0j, 0, "V", 1.0, 2.0)
    rep.add(1 + 0j, 1, "V", 3.0, 2.0)
    assert len(rep.violations) == 1
    assert rep.worst("V")[6] == -0.5
    buf = io.StringIO()
    rep.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].split(",") == list(BoundReport.COLUMNS)
    assert len(lines) == 3


def test_normal_derivative_ratio():
    for sigma in (1e-3, 0.7, 25.0):
        for k in (0, 3, 20):
            assert abs(check_normal_derivative_bound(k, sigma) - 1) <= 1e-9
    assert check_normal_derivative_bound(0, (1 + 1j) / math.sqrt(2)) <= 1
    assert abs(check_normal_derivative_bound(32, 100.0) - 1) <= 1e-8


def test_coercivity():
    res = check_coercivity(2, 1.5)
    assert abs(res.lhs - res.rhs) <= 1e-13 * res.rhs
    # for s off the real axis the real part is an identity, not a strict bound
    res = check_coercivity(2, 1.5 * np.exp(1j * math.pi / 4))
    assert abs(res.margin) <= 1e-12
    assert res.modulus_margin > 0
    zero = check_coercivity(0, 1.0, parts=(0.0, 0.0, 0.0, 0.0))
    assert zero.lhs == 0 and zero.rhs == 0 and zero.margin == 0


def test_small_sweep():
    report, normal_rows, coer = sweep_bounds(np.logspace(-3, 3, 5), [0.0, 0.9, -1.45], 16)
    assert not report.violations
    assert all(r <= 1 + 1e-9 for _, _, r in normal_rows)
    assert all(abs(r - 1) <= 1e-9 for s, _, r in normal_rows if s.imag == 0)
    assert all(m >= -1e-12 for _, _, m in coer)
