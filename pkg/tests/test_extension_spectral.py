import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate

from helmtrace.extension_spectral import (
    Geometry,
    TruncationError,
    annulus_mode,
    annulus_modes,
    dtn_ball,
    dtn_disk,
    dtn_disk_modes,
    dtn_exterior_ball,
    dtn_exterior_disk,
    dtn_exterior_disk_modes,
    extension_profile,
    extension_weights,
    field_energies_disk,
    field_energies_exterior_disk,
    field_energy_disk,
    field_energy_exterior_disk,
    halfspace_norm,
    min_ext_norm,
)
from helmtrace.trace_spaces import TWO_PI, FourierTrace, SphericalTrace

mp.mp.dps = 40
SIGMAS7 = np.logspace(-3, 3, 7)


def _mp_dtn_disk(k, s):
    s = mp.mpf(s)
    return s * (mp.besseli(k - 1, s) + mp.besseli(k + 1, s)) / (2 * mp.besseli(k, s))


def _mp_dtn_ext(k, s):
    s = mp.mpf(s)
    return s * (mp.besselk(k - 1, s) + mp.besselk(k + 1, s)) / (2 * mp.besselk(k, s))


def _mp_annulus(k, s, rho, variant):
    """2 pi s u'(1) for u = I_k(s r) + B K_k(s r) normalised by u(1), with
    u(rho) = 0 (alternative) or u'(rho) = 0 (standard)."""
    s, rho = mp.mpf(s), mp.mpf(rho)
    I = lambda r: mp.besseli(k, s * r)
    K = lambda r: mp.besselk(k, s * r)
    Ip = lambda r: (mp.besseli(k - 1, s * r) + mp.besseli(k + 1, s * r)) / 2
    Kp = lambda r: -(mp.besselk(k - 1, s * r) + mp.besselk(k + 1, s * r)) / 2
    B = -I(rho) / K(rho) if variant == "alternative" else -Ip(rho) / Kp(rho)
    return float(2 * mp.pi * s * (Ip(1) + B * Kp(1)) / (I(1) + B * K(1)))


# --- DtN eigenvalues --------------------------------------------------------------

@pytest.mark.parametrize("k", [0, 1, 5, 32, 64])
@pytest.mark.parametrize("s", [1e-4, 0.3, 7.0, 2e3])
def test_disk_dtn_against_mpmath(k, s):
    assert abs(dtn_disk(k, s) / float(_mp_dtn_disk(k, s)) - 1) <= 1e-12
    assert abs(dtn_exterior_disk(k, s) / float(_mp_dtn_ext(k, s)) - 1) <= 1e-12


def test_disk_dtn_examples():
    s = 1e-3
    assert abs(dtn_disk(0, s) / (s * s / 2) - 1) <= 1e-5
    assert abs(dtn_disk(1, 1e-6) - 1) <= 1e-6
    assert abs(TWO_PI * dtn_disk(0, 1.0) - 2.8048) < 1e-4
    assert abs(dtn_disk(0, 1.0) - 0.44639) < 1e-5


def test_exterior_disk_examples():
    vals = [dtn_exterior_disk(0, s) for s in (1e-2, 1e-4, 1e-6)]
    assert vals[2] < 0.1 and vals[0] > vals[1] > vals[2]
    # log(2/sigma) - gamma correction
    s = 1e-6
    assert abs(vals[2] * (math.log(2 / s) - np.euler_gamma) - 1) < 1e-3
    assert abs(dtn_exterior_disk(1, 1e-6) - 1) < 1e-6
    for k in range(4):
        assert 10 <= dtn_exterior_disk(k, 10.0) <= 10 + k + 1


def test_annulus_against_mpmath_solve():
    for variant in ("standard", "alternative"):
        for k in (0, 1, 6):
            for s in (1e-3, 0.8, 12.0):
                got = annulus_mode(k, s, 0.5, variant)
                assert abs(got / _mp_annulus(k, s, 0.5, variant) - 1) <= 1e-10


def test_annulus_examples():
    assert abs(annulus_mode(0, 1e-4, 0.5, "alternative") / (TWO_PI / math.log(2)) - 1) < 1e-6
    ratio = annulus_mode(0, 1e-3, 0.5, "standard") / (TWO_PI * dtn_disk(0, 1e-3))
    assert 1 - 0.25 <= ratio <= 1
    for s in np.logspace(-4, 4, 25):
        std = annulus_modes(16, s, 0.5, "standard")
        alt = annulus_modes(16, s, 0.5, "alternative")
        assert np.all(std <= alt * (1 + 1e-12))


def _radial_fe_energy(k, s, rho, variant, n=4000):
    """Minimise 2 pi int (|u'|^2 + (k^2/r^2 + s^2)|u|^2) r dr over P1 functions
    on [rho, 1] with u(1) = 1 (and u(rho) = 0 for the alternative variant)."""
    from scipy.sparse import diags
    from scipy.sparse.linalg import spsolve
    r = np.linspace(rho, 1.0, n + 1)
    h = np.diff(r)
    kin = 0.5 * (r[:-1] + r[1:]) / h
    # 3-point Gauss per element; exact up to rounding at this resolution
    t, w = np.polynomial.legendre.leggauss(3)
    t, w = (t + 1) / 2, w / 2
    m_aa = m_ab = m_bb = 0.0
    for tq, wq in zip(t, w):
        rq = r[:-1] + tq * h
        q = wq * h * (k * k / rq + s * s * rq)
        m_aa = m_aa + q * (1 - tq) ** 2
        m_ab = m_ab + q * (1 - tq) * tq
        m_bb = m_bb + q * tq ** 2
    d = np.zeros(n + 1)
    d[:-1] += kin + m_aa
    d[1:] += kin + m_bb
    off = -kin + m_ab
    A = diags([off, d, off], [-1, 0, 1], format="csr")
    free = np.arange(1 if variant == "alternative" else 0, n)
    rhs = -A[free][:, [n]].toarray().ravel()
    u = np.zeros(n + 1)
    u[n] = 1.0
    u[free] = spsolve(A[free][:, free].tocsc(), rhs)
    # elementwise sum avoids the cancellation in u^T A u when u is nearly constant
    ua, ub = u[:-1], u[1:]
    e = kin * (ub - ua) ** 2 + m_aa * ua ** 2 + 2 * m_ab * ua * ub + m_bb * ub ** 2
    return TWO_PI * float(np.sum(e))


@pytest.mark.parametrize("variant", ["standard", "alternative"])
@pytest.mark.parametrize("k,s", [(0, 1e-3), (1, 2.0), (4, 0.5)])
def test_annulus_against_radial_fe(variant, k, s):
    fe = _radial_fe_energy(k, s, 0.5, variant)
    exact = annulus_mode(k, s, 0.5, variant)
    assert exact <= fe * (1 + 1e-12)
    assert fe / exact - 1 <= 1e-5


def test_ball_closed_forms():
    for s in (1e-3, 0.5, 3.0, 40.0):
        ref = float(mp.mpf(s) / mp.tanh(s) - 1)
        assert abs(dtn_ball(0, s) - ref) <= 1e-12 * ref
        assert abs(dtn_exterior_ball(0, s) - (1 + s)) <= 1e-14 * (1 + s)
        ratio = dtn_exterior_ball(0, s) / max(1.0, s)
        assert 1 <= ratio <= 2
    assert abs(dtn_ball(0, 1e-4) / (1e-8 / 3) - 1) < 1e-6


@pytest.mark.parametrize("l", [1, 4, 30])
def test_ball_against_mpmath(l):
    for s in (0.01, 2.0, 200.0):
        z = mp.mpf(s)
        f = lambda nu: mp.besseli(nu, z)
        g = lambda nu: mp.besselk(nu, z)
        di = z * (f(l - 0.5) + f(l + 1.5)) / (2 * f(l + 0.5)) - mp.mpf(1) / 2
        dk = z * (g(l - 0.5) + g(l + 1.5)) / (2 * g(l + 0.5)) + mp.mpf(1) / 2
        assert abs(dtn_ball(l, s) / float(di) - 1) <= 1e-12
        assert abs(dtn_exterior_ball(l, s) / float(dk) - 1) <= 1e-12


# --- profiles and norms ------------------------------------------------------------

def test_min_ext_norm_examples():
    disk = Geometry("disk")
    one = FourierTrace([1.0])
    prof = extension_profile(disk, 0, 2.0)
    i1, i0 = float(mp.besseli(1, 2)), float(mp.besseli(0, 2))
    expect = math.sqrt(TWO_PI * 2 * i1 / i0)
    assert abs(min_ext_norm(one, prof) - expect) <= 1e-13 * expect
    assert min_ext_norm(one, prof) <= 2 * math.sqrt(math.pi)
    e1 = FourierTrace.mode(1)
    v = min_ext_norm(e1, extension_profile(disk, 1, 1.0))
    assert abs(v - math.sqrt(TWO_PI * float(_mp_dtn_disk(1, 1)))) < 1e-12
    assert abs(v - 2.791) < 1e-3
    for geom in (disk, Geometry("annulus", 0.5), Geometry("disk_exterior")):
        assert min_ext_norm(FourierTrace.zeros(3), extension_profile(geom, 3, 1.0)) == 0
    ball = extension_profile(Geometry("ball"), 2, 1.0)
    assert min_ext_norm(SphericalTrace([0.0, 0.0, 0.0]), ball) == 0


def test_profile_labels_and_errors():
    ann = Geometry("annulus", 0.5)
    assert extension_profile(ann, 3, 1.0, "alternative").label == "HD-alt"
    assert extension_profile(Geometry("ball"), 3, 1.0).kind == "sphere"
    with pytest.raises(ValueError):
        Geometry("square")
    with pytest.raises(ValueError):
        Geometry("annulus", 0.99)
    with pytest.raises(ValueError):
        extension_weights(Geometry("disk"), 3, 1.0, "other")
    with pytest.raises(ValueError):
        extension_weights(Geometry("halfspace"), 3, 1.0)
    with pytest.raises(ValueError):
        dtn_disk(0, 0.0)


def test_halfspace_norm():
    xi = np.linspace(-12, 12, 240_001)
    gsq = TWO_PI * np.exp(-xi ** 2)
    n0 = halfspace_norm(xi, gsq, 0.0)
    assert abs(n0 - TWO_PI) < 1e-6
    l2 = np.trapezoid(gsq, xi)
    prev = n0
    for s in (0.5, 1.0, 2.0, 10.0):
        n = halfspace_norm(xi, gsq, s)
        assert n > prev
        prev = n
        upper = TWO_PI * (s * l2 + np.trapezoid(np.abs(xi) * gsq, xi))
        ratio = n * n / upper
        assert 1 / math.sqrt(2) <= ratio <= 1
    assert halfspace_norm(xi, np.zeros_like(xi), 1.0) == 0
    with pytest.raises(TruncationError):
        halfspace_norm(np.linspace(-1, 1, 101), np.ones(101), 1.0)


# --- volume energies ---------------------------------------------------------------------

def test_energy_identity_interior_and_exterior():
    for s in SIGMAS7:
        e = field_energies_disk(16, s)
        d = TWO_PI * dtn_disk_modes(16, s)
        assert np.max(np.abs(e / d - 1)) <= 1e-9
        e = field_energies_exterior_disk(16, s)
        d = TWO_PI * dtn_exterior_disk_modes(16, s)
        assert np.max(np.abs(e / d - 1)) <= 1e-8


def test_energy_examples():
    s = 1e-4
    assert abs(field_energy_disk(0, s) / (math.pi * s * s) - 1) < 1e-6
    e = field_energy_disk(3, 2.0 * (1 + 1j) / math.sqrt(2))
    assert isinstance(e, float) and e > 0
    big = field_energy_exterior_disk(0, 1e-4)
    assert abs(big / (TWO_PI * dtn_exterior_disk(0, 1e-4)) - 1) <= 1e-8
    # default truncation is R = 1 + max(20/Re s, 10); double its extent
    for s, R in ((1.0, 21.0), (5.0 + 2j, 11.0)):
        a = field_energy_exterior_disk(2, s)
        b = field_energy_exterior_disk(2, s, R=2 * R - 1)
        assert abs(a - b) <= 1e-10 * a


def test_energy_radial_oracle_single_mode():
    # independent adaptive quadrature of |u'|^2 + (k^2/r^2 + |s|^2)|u|^2 with
    # u = I_k(s r)/I_k(s), using scipy's Bessel routines directly
    from scipy import special as sp
    k, s = 3, 2.0 * np.exp(0.6j)
    I1 = sp.iv(k, s)

    def f(r):
        u = sp.iv(k, s * r) / I1
        du = s * sp.ivp(k, s * r) / I1
        return (abs(du) ** 2 + (k * k / (r * r) + abs(s) ** 2) * abs(u) ** 2) * r

    ref = TWO_PI * integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-13)[0]
    assert abs(field_energy_disk(k, s) / ref - 1) <= 1e-10
