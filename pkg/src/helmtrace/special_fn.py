"""Modified Bessel functions of integer order for Re z > 0.

Values come from the exponentially scaled AMOS routines in scipy; every
quantity that can over- or underflow (high order at small argument, large
argument) is routed through ratios of consecutive orders instead:

* ``I_{k+1}/I_k`` by backward recurrence (a truncated continued fraction)
  for ``|z| <= recurrence_radius``, and above it by downward recurrence
  seeded with scaled values at the top order,
* ``K_{k+1}/K_k`` by forward recurrence, which is stable for K.

Logarithmic derivatives and logs of the functions are built from these
ratios, so the spectral formulas never touch an overflowing number.
"""
from __future__ import annotations

import contextlib
import math

import numpy as np
from scipy import special as sp

MAX_ORDER = 256
MAX_DEGREE = 128
Z_MIN = 1e-8
Z_MAX = 1e6

# recurrence_radius: switchover between backward recurrence and scaled values.
# start index of the backward recurrence is kmax + growth*|z| + start_pad.
_TUNING = {"recurrence_radius": 100.0, "growth": 2.0, "start_pad": 64}


class DomainError(ValueError):
    """Argument or order outside the supported domain."""


class RangeError(OverflowError):
    """Result not representable in double precision."""


@contextlib.contextmanager
def corrupted_tuning(**overrides):
    """Temporarily replace tuning constants (fault-injection hook)."""
    saved = dict(_TUNING)
    _TUNING.update(overrides)
    try:
        yield
    finally:
        _TUNING.clear()
        _TUNING.update(saved)


def _as_args(z):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z.real <= 0):
        raise DomainError("Re z must be positive")
    az = np.abs(z)
    if np.any(az < Z_MIN) or np.any(az > Z_MAX):
        raise DomainError(f"|z| outside [{Z_MIN:g}, {Z_MAX:g}]")
    return z


def _check_order(order, cap):
    if int(order) != order or order < 0 or order > cap:
        raise DomainError(f"order must be an integer in [0, {cap}]")
    return int(order)


def _backward_ratios(kmax, z, step):
    """Ratios f_{k+1}/f_k for k = 0..kmax of the minimal solution of
    f_{k-1} - f_{k+1} = step(k)/z f_k, by backward recurrence."""
    if z.size == 0:
        return np.empty((kmax + 1, 0), dtype=complex)
    zmax = float(np.max(np.abs(z)))
    n_start = kmax + int(math.ceil(_TUNING["growth"] * zmax)) + int(_TUNING["start_pad"])
    r = np.zeros_like(z)
    out = np.empty((kmax + 1, z.size), dtype=complex)
    for k in range(n_start, -1, -1):
        r = 1.0 / (step(k + 1) / z + r)
        if k <= kmax:
            out[k] = r
    return out


def _i_ratios_backward(kmax, z):
    return _backward_ratios(kmax, z, lambda j: 2.0 * j)


def _seeded_ratios(kmax, z, nu_top, step):
    """Downward recurrence seeded by exact scaled values at the top order;
    stable because I is the minimal solution."""
    out = np.empty((kmax + 1, z.size), dtype=complex)
    if z.size == 0:
        return out
    with np.errstate(invalid="ignore", divide="ignore"):
        r = sp.ive(nu_top + 1, z) / sp.ive(nu_top, z)
    bad = ~np.isfinite(r) | (r == 0)
    if np.any(bad):
        # scaled values underflow at very high order; start higher from the
        # uniform estimate and let the downward recurrence damp its error
        zb, pad = z[bad], 32
        nu = nu_top + pad
        rb = zb / (nu + 1.0 + np.sqrt((nu + 1.0) ** 2 + zb * zb))
        for j in range(pad - 1, -1, -1):
            rb = 1.0 / (step(kmax + j + 1) / zb + rb)
        r[bad] = rb
    out[kmax] = r
    for k in range(kmax - 1, -1, -1):
        r = 1.0 / (step(k + 1) / z + r)
        out[k] = r
    return out


def _i_ratios_direct(kmax, z):
    return _seeded_ratios(kmax, z, kmax, lambda j: 2.0 * j)


def i_ratios(kmax, z):
    """``I_{k+1}(z)/I_k(z)`` for k = 0..kmax, shape (kmax+1, len(z))."""
    z = _as_args(z)
    out = np.empty((kmax + 1, z.size), dtype=complex)
    small = np.abs(z) <= _TUNING["recurrence_radius"]
    out[:, small] = _i_ratios_backward(kmax, z[small])
    out[:, ~small] = _i_ratios_direct(kmax, z[~small])
    return out


def k_ratios(kmax, z):
    """``K_{k+1}(z)/K_k(z)`` for k = 0..kmax by forward recurrence."""
    z = _as_args(z)
    out = np.empty((kmax + 1, z.size), dtype=complex)
    q = sp.kve(1, z) / sp.kve(0, z)
    out[0] = q
    for k in range(1, kmax + 1):
        q = 1.0 / q + 2.0 * k / z
        out[k] = q
    return out


def _logs_from_ratios(log0, ratios):
    out = np.empty(ratios.shape, dtype=complex)
    out[0] = log0
    out[1:] = log0 + np.cumsum(np.log(ratios[:-1]), axis=0)
    return out


def log_i_with_derivs(kmax, z):
    """``(log I_k(z), I'_k(z)/I_k(z))`` for k = 0..kmax from one ratio sweep."""
    z = _as_args(z)
    r = i_ratios(kmax, z)
    logs = _logs_from_ratios(np.log(sp.ive(0, z)) + np.abs(z.real), r)
    return logs, np.arange(kmax + 1)[:, None] / z + r


def log_k_with_derivs(kmax, z):
    """``(log K_k(z), K'_k(z)/K_k(z))`` for k = 0..kmax."""
    z = _as_args(z)
    q = k_ratios(kmax, z)
    logs = _logs_from_ratios(np.log(sp.kve(0, z)) - z, q)
    return logs, np.arange(kmax + 1)[:, None] / z - q


def log_bessel_i(kmax, z):
    """Complex logarithms of ``I_k(z)``, k = 0..kmax (any branch)."""
    return log_i_with_derivs(kmax, z)[0]


def log_bessel_k(kmax, z):
    """Complex logarithms of ``K_k(z)``, k = 0..kmax (any branch)."""
    return log_k_with_derivs(kmax, z)[0]


def i_log_derivs(kmax, z):
    """``I'_k(z)/I_k(z)`` for k = 0..kmax."""
    z = _as_args(z)
    k = np.arange(kmax + 1)[:, None]
    return k / z + i_ratios(kmax, z)


def k_log_derivs(kmax, z):
    """``K'_k(z)/K_k(z)`` for k = 0..kmax."""
    z = _as_args(z)
    k = np.arange(kmax + 1)[:, None]
    return k / z - k_ratios(kmax, z)


def _exp_checked(logv):
    if logv.real > 709.0:
        raise RangeError("value overflows double precision")
    return complex(np.exp(logv))


def bessel_i(order, z):
    """Modified Bessel function ``I_order(z)``."""
    order = _check_order(order, MAX_ORDER)
    zz = _as_args(z)
    v = complex(sp.ive(order, zz[0]))
    if np.isfinite(v) and abs(v) > 1e-280:
        shift = abs(zz[0].real)
        if math.log(abs(v)) + shift > 709.0:
            raise RangeError("I_k(z) overflows double precision")
        return v * math.exp(shift)
    return _exp_checked(log_bessel_i(order, zz)[order, 0])


def bessel_k(order, z):
    """Modified Bessel function ``K_order(z)``."""
    order = _check_order(order, MAX_ORDER)
    zz = _as_args(z)
    v = complex(sp.kve(order, zz[0]))
    if np.isfinite(v) and 1e-280 < abs(v) < 1e280:
        return v * complex(np.exp(-zz[0]))
    return _exp_checked(log_bessel_k(order, zz)[order, 0])


def log_deriv_i(order, z):
    """``I'_order(z)/I_order(z)``."""
    order = _check_order(order, MAX_ORDER)
    return complex(i_log_derivs(order, z)[order, 0])


def log_deriv_k(order, z):
    """``K'_order(z)/K_order(z)``."""
    order = _check_order(order, MAX_ORDER)
    return complex(k_log_derivs(order, z)[order, 0])


def bessel_i_prime(order, z):
    order = _check_order(order, MAX_ORDER)
    if order == 0:
        return bessel_i(1, z)
    return bessel_i(order - 1, z) - order / complex(z) * bessel_i(order, z)


def bessel_k_prime(order, z):
    order = _check_order(order, MAX_ORDER)
    if order == 0:
        return -bessel_k(1, z)
    return -bessel_k(order - 1, z) - order / complex(z) * bessel_k(order, z)


def scaled_wronskian_residual(order, z):
    """Relative residual of ``I'_k K_k - I_k K'_k = 1/z``.

    Evaluated with exponentially scaled values; the scale factors multiply to
    ``exp(|Re z| - z)``, which has modulus one, so no overflow can occur.
    """
    order = _check_order(order, MAX_ORDER)
    zz = _as_args(z)[0]
    k = order
    iv = sp.ive([k, k + 1], zz)
    kv = sp.kve([k, k + 1], zz)
    ip = iv[1] + k / zz * iv[0]
    kp = -kv[1] + k / zz * kv[0]
    phase = np.exp(abs(zz.real) - zz)
    w = (ip * kv[0] - iv[0] * kp) * phase
    return abs(w - 1.0 / zz) * abs(zz)


# spherical: i_l(z) = sqrt(pi/(2z)) I_{l+1/2}(z), k_l(z) = sqrt(pi/(2z)) K_{l+1/2}(z)

def _sph_i_ratios(lmax, z):
    out = np.empty((lmax + 1, z.size), dtype=complex)
    small = np.abs(z) <= _TUNING["recurrence_radius"]
    out[:, small] = _backward_ratios(lmax, z[small], lambda j: 2.0 * j + 1.0)
    out[:, ~small] = _seeded_ratios(lmax, z[~small], lmax + 0.5, lambda j: 2.0 * j + 1.0)
    return out


def _sph_k_ratios(lmax, z):
    out = np.empty((lmax + 1, z.size), dtype=complex)
    p = 1.0 + 1.0 / z
    out[0] = p
    for l in range(1, lmax + 1):
        p = 1.0 / p + (2.0 * l + 1.0) / z
        out[l] = p
    return out


def sph_i_log_derivs(lmax, z):
    z = _as_args(z)
    l = np.arange(lmax + 1)[:, None]
    return l / z + _sph_i_ratios(lmax, z)


def sph_k_log_derivs(lmax, z):
    z = _as_args(z)
    l = np.arange(lmax + 1)[:, None]
    return l / z - _sph_k_ratios(lmax, z)


def sph_i(l, z):
    """Modified spherical Bessel function of the first kind."""
    l = _check_order(l, MAX_DEGREE)
    zz = _as_args(z)
    # sinh(z)/z = exp(z) * (1 - exp(-2z)) / (2z)
    log0 = zz + np.log(-np.expm1(-2.0 * zz)) - np.log(2.0 * zz)
    logv = log0[0] + np.sum(np.log(_sph_i_ratios(l, zz)[:l, 0]))
    return _exp_checked(logv)


def sph_k(l, z):
    """Modified spherical Bessel function of the second kind,
    ``k_0(z) = pi/(2z) exp(-z)``."""
    l = _check_order(l, MAX_DEGREE)
    zz = _as_args(z)
    log0 = np.log(np.pi / (2.0 * zz)) - zz
    logv = log0[0] + np.sum(np.log(_sph_k_ratios(l, zz)[:l, 0]))
    return _exp_checked(logv)


def sph_log_deriv_i(l, z):
    l = _check_order(l, MAX_DEGREE)
    return complex(sph_i_log_derivs(l, z)[l, 0])


def sph_log_deriv_k(l, z):
    l = _check_order(l, MAX_DEGREE)
    return complex(sph_k_log_derivs(l, z)[l, 0])
