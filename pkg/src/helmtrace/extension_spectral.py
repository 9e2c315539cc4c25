"""Minimal extension norms on radial model geometries.

On the unit disk, its exterior, an annulus with the unit circle as outer
boundary, and the unit ball and its exterior, the minimal weighted H^1
extension of a single boundary mode solves ``-Lap u + sigma^2 u = 0`` by
separation of variables.  Its energy is the Dirichlet-to-Neumann eigenvalue
times the squared basis norm (2 pi on the circle, 1 on the sphere).

The volume-energy routines integrate the same extensions radially for a
complex wavenumber, which gives an independent check of the DtN formulas
for real ``s`` and the field energies needed by :mod:`helmtrace.layer_ops`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import special_fn as sf
from .trace_spaces import (
    TWO_PI,
    DiagonalNormProfile,
    QuadratureError,
    Weight,
)

GEOMETRIES = ("disk", "disk_exterior", "annulus", "ball", "ball_exterior", "halfspace")
VARIANTS = ("standard", "alternative")
RHO_MIN, RHO_MAX = 0.05, 0.95


class SingularSystemError(ArithmeticError):
    pass


class TruncationError(ValueError):
    pass


@dataclass(frozen=True)
class Geometry:
    """Model extension set; Gamma is always the unit circle or sphere.

    For ``annulus`` the inner circle has radius ``inner_radius`` and carries
    the complementary boundary condition.
    """

    kind: str
    inner_radius: float | None = None

    def __post_init__(self):
        if self.kind not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.kind!r}")
        if self.kind == "annulus":
            if self.inner_radius is None or not (RHO_MIN <= self.inner_radius <= RHO_MAX):
                raise ValueError(f"annulus needs inner_radius in [{RHO_MIN}, {RHO_MAX}]")

    @property
    def trace_kind(self):
        return "sphere" if self.kind.startswith("ball") else "circle"

    @property
    def label(self):
        if self.kind == "annulus":
            return f"annulus(rho={self.inner_radius:g})"
        return self.kind


def _sigma(sigma):
    return Weight(float(sigma)).sigma


# --- DtN eigenvalues, vectorised over modes 0..kmax ---------------------------

def dtn_disk_modes(kmax, sigma):
    """``sigma I'_k(sigma)/I_k(sigma)`` for k = 0..kmax."""
    sigma = _sigma(sigma)
    return (sigma * sf.i_log_derivs(kmax, sigma)[:, 0]).real


def dtn_exterior_disk_modes(kmax, sigma):
    """``-sigma K'_k(sigma)/K_k(sigma)`` for k = 0..kmax."""
    sigma = _sigma(sigma)
    return (-sigma * sf.k_log_derivs(kmax, sigma)[:, 0]).real


def dtn_ball_modes(lmax, sigma):
    sigma = _sigma(sigma)
    return (sigma * sf.sph_i_log_derivs(lmax, sigma)[:, 0]).real


def dtn_exterior_ball_modes(lmax, sigma):
    sigma = _sigma(sigma)
    return (-sigma * sf.sph_k_log_derivs(lmax, sigma)[:, 0]).real


def annulus_modes(kmax, sigma, rho, variant):
    """Per-mode weights ``2 pi sigma (a I'_k(sigma) + b K'_k(sigma))`` on the
    annulus ``rho < r < 1`` with ``u(1) = 1`` and, at ``r = rho``, ``u = 0``
    (alternative) or ``u' = 0`` (standard).

    Eliminating ``b`` gives ``sigma (A - t B)/(1 - t)`` with ``A = I'/I(sigma)``,
    ``B = K'/K(sigma)`` and ``t = b K_k(sigma) / (a I_k(sigma))``; ``t`` is
    formed from log-Bessel differences so nothing overflows.
    """
    sigma = _sigma(sigma)
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if not (RHO_MIN <= rho <= RHO_MAX):
        raise ValueError(f"rho must lie in [{RHO_MIN}, {RHO_MAX}]")
    z = np.array([sigma, sigma * rho])
    li, lk = sf.log_bessel_i(kmax, z).real, sf.log_bessel_k(kmax, z).real
    A = sf.i_log_derivs(kmax, sigma)[:, 0].real
    B = sf.k_log_derivs(kmax, sigma)[:, 0].real
    t = np.exp(lk[:, 0] + li[:, 1] - li[:, 0] - lk[:, 1])
    if variant == "standard":
        a_r = sf.i_log_derivs(kmax, sigma * rho)[:, 0].real
        b_r = sf.k_log_derivs(kmax, sigma * rho)[:, 0].real
        t = t * a_r / b_r
    det = 1.0 - t
    if np.any(np.abs(det) < 1e-300):
        raise SingularSystemError("annulus 2x2 system is singular")
    return TWO_PI * sigma * (A - t * B) / det


def _scalar(k, cap):
    k = abs(int(k))
    if k > cap:
        raise sf.DomainError(f"mode {k} exceeds {cap}")
    return k


def dtn_disk(k, sigma):
    k = _scalar(k, sf.MAX_ORDER)
    return float(dtn_disk_modes(k, sigma)[k])


def dtn_exterior_disk(k, sigma):
    k = _scalar(k, sf.MAX_ORDER)
    return float(dtn_exterior_disk_modes(k, sigma)[k])


def dtn_ball(l, sigma):
    l = _scalar(l, sf.MAX_DEGREE)
    return float(dtn_ball_modes(l, sigma)[l])


def dtn_exterior_ball(l, sigma):
    l = _scalar(l, sf.MAX_DEGREE)
    return float(dtn_exterior_ball_modes(l, sigma)[l])


def annulus_mode(k, sigma, rho, variant):
    k = _scalar(k, sf.MAX_ORDER)
    return float(annulus_modes(k, sigma, rho, variant)[k])


# --- profiles -------------------------------------------------------------------

def extension_weights(geometry, max_mode, sigma, variant="standard"):
    """Per-mode squared-norm weights of the minimal extension norm."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    kind = geometry.kind
    if kind == "disk":
        return TWO_PI * dtn_disk_modes(max_mode, sigma)
    if kind == "disk_exterior":
        return TWO_PI * dtn_exterior_disk_modes(max_mode, sigma)
    if kind == "annulus":
        return annulus_modes(max_mode, sigma, geometry.inner_radius, variant)
    if kind == "ball":
        return dtn_ball_modes(max_mode, sigma)
    if kind == "ball_exterior":
        return dtn_exterior_ball_modes(max_mode, sigma)
    raise ValueError(f"{kind} has no discrete mode profile")


def extension_profile(geometry, max_mode, sigma, variant="standard"):
    """HD (standard) or HD-alt (alternative) profile on a model geometry.

    Without a complementary boundary (disk, exterior, ball) both variants
    coincide; ``label`` still records which one was asked for.
    """
    w = extension_weights(geometry, max_mode, sigma, variant)
    if geometry.kind in ("disk", "ball") and w[0] <= 0.0:
        # sigma^2/2 underflows nowhere in the supported window; guard anyway
        raise QuadratureError("nonpositive zero-mode weight")
    label = "HD" if variant == "standard" else "HD-alt"
    return DiagonalNormProfile(w, kind=geometry.trace_kind, label=label,
                               geometry=geometry.label, sigma=float(sigma),
                               meta={"variant": variant})


def min_ext_norm(g, profile):
    """``sqrt(sum h_k |c_k|^2)``; the trace type must match the profile."""
    return profile.norm(g)


def halfspace_norm(xi, ghat_sq, sigma):
    """``sqrt(2 pi int (sigma^2 + xi^2)^(1/2) |ghat|^2 dxi)`` on a xi-grid.

    ``ghat_sq`` are samples of ``|ghat(xi)|^2`` with
    ``ghat(xi) = int g(x) exp(-i x xi) dx``.  ``sigma = 0`` is allowed and
    gives the homogeneous seminorm limit.
    """
    xi = np.asarray(xi, dtype=float)
    ghat_sq = np.asarray(ghat_sq, dtype=float)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if xi.shape != ghat_sq.shape or xi.size < 3:
        raise ValueError("grid and spectrum must match")
    peak = float(np.max(ghat_sq))
    if peak == 0.0:
        return 0.0
    if max(ghat_sq[0], ghat_sq[-1]) > 1e-16 * max(peak, 1.0):
        raise TruncationError("spectrum has not decayed at the grid edge")
    val = np.trapezoid(np.sqrt(sigma ** 2 + xi ** 2) * ghat_sq, xi)
    return math.sqrt(TWO_PI * val)


# --- radial volume energies ---------------------------------------------------

_GL_CACHE = {}


def _gauss(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _panel_nodes(edges, n):
    x, w = _gauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    half = (b - a) / 2
    return ((a + b) / 2 + half * x).ravel(), (half * w).ravel()


_TINY = 1e-6


def _log_i_and_deriv(kmax, z):
    """log I_k(z) and I'_k/I_k(z) for all k, with a two-term series where
    ``|z|`` falls below the special-function window."""
    logv = np.empty((kmax + 1, z.size), dtype=complex)
    der = np.empty_like(logv)
    small = np.abs(z) < _TINY
    big = ~small
    if np.any(big):
        logv[:, big], der[:, big] = sf.log_i_with_derivs(kmax, z[big])
    if np.any(small):
        k = np.arange(kmax + 1)[:, None]
        zs = z[small][None, :]
        q = (zs / 2) ** 2 / (k + 1)
        logv[:, small] = k * np.log(zs / 2) - gammaln(k + 1) + np.log1p(q)
        with np.errstate(divide="ignore", invalid="ignore"):
            der[:, small] = np.where(k == 0, zs / 2, k / zs + zs / (2 * (k + 1)))
    return logv, der


def _edges_interior(s, kmax):
    s = complex(s)
    depth = min(1.0, 40.0 / s.real)
    width = min(0.05, 2.0 / abs(s), 2.0 / (kmax + 1))
    n = max(2, int(math.ceil(depth / width)))
    return 1.0 - np.linspace(depth, 0.0, n + 1)


def _edges_exterior(s, kmax, R=None):
    s = complex(s)
    if R is None:
        R = 1.0 + max(20.0 / s.real, 10.0)
    top = 1.0 + min(R - 1.0, 40.0 / s.real)
    cap = 2.0 / abs(s)
    edges = [1.0]
    r = 1.0
    while r < top:
        r = min(r + min(0.05 * r, cap), top)
        edges.append(r)
    return np.array(edges)


def _radial_parts(r, w, logu, dlog, s, kmax):
    """``(int |grad u|^2, int |u|^2)`` over the annular region for every mode."""
    k = np.arange(kmax + 1)[:, None]
    mag2 = np.exp(2.0 * logu.real)
    grad = (abs(s) ** 2 * np.abs(dlog) ** 2 + k ** 2 / r ** 2) * mag2
    rw = r * w
    return TWO_PI * (grad * rw).sum(axis=1), TWO_PI * (mag2 * rw).sum(axis=1)


def _check_converged(a, b, tol, what):
    scale = np.maximum(np.abs(a), 1e-300)
    bad = np.abs(a - b) > tol * scale
    if np.any(bad):
        raise QuadratureError(f"{what}: quadrature did not converge")


def _field_parts(side, kmax, s, R, order, check):
    s = complex(s)
    if s.real <= 0:
        raise ValueError("Re s must be positive")
    if side == "interior":
        edges = _edges_interior(s, kmax)
        log1 = sf.log_bessel_i(kmax, s)
        radial = _log_i_and_deriv
    else:
        edges = _edges_exterior(s, kmax, R)
        log1 = sf.log_bessel_k(kmax, s)
        radial = sf.log_k_with_derivs

    def run(n):
        r, w = _panel_nodes(edges, n)
        logv, der = radial(kmax, s * r)
        return _radial_parts(r, w, logv - log1, der, s, kmax)

    grad, mass = run(order)
    if check:
        g2, m2 = run(order + 8)
        _check_converged(grad + abs(s) ** 2 * mass, g2 + abs(s) ** 2 * m2, 1e-10,
                         f"{side} field energy")
    return grad, mass


def field_parts_disk(kmax, s, order=20, check=True):
    """Gradient and mass integrals of ``u_k = I_k(s r)/I_k(s) e^{ik theta}``
    over the unit disk, k = 0..kmax."""
    return _field_parts("interior", kmax, s, None, order, check)


def field_parts_exterior_disk(kmax, s, R=None, order=20, check=True):
    """Same for ``u_k = K_k(s r)/K_k(s) e^{ik theta}`` on ``1 < r < R``; past
    ``1 + 40/Re s`` the integrand is below ``e^{-80}`` of its boundary value
    and is dropped."""
    return _field_parts("exterior", kmax, s, R, order, check)


def field_energies_disk(kmax, s, sigma=None, order=20, check=True):
    """``||u_k||^2_{H^1(disk, sigma)}`` for ``u_k = I_k(s r)/I_k(s) e^{ik theta}``,
    k = 0..kmax.  ``sigma`` defaults to ``|s|``."""
    sigma = abs(complex(s)) if sigma is None else float(sigma)
    grad, mass = field_parts_disk(kmax, s, order, check)
    return grad + sigma ** 2 * mass


def field_energies_exterior_disk(kmax, s, sigma=None, R=None, order=20, check=True):
    """Exterior counterpart of :func:`field_energies_disk` with
    ``u_k = K_k(s r)/K_k(s) e^{ik theta}``."""
    sigma = abs(complex(s)) if sigma is None else float(sigma)
    grad, mass = field_parts_exterior_disk(kmax, s, R, order, check)
    return grad + sigma ** 2 * mass


def field_energy_disk(k, s, sigma=None):
    k = _scalar(k, sf.MAX_ORDER)
    return float(field_energies_disk(k, s, sigma)[k])


def field_energy_exterior_disk(k, s, sigma=None, R=None):
    k = _scalar(k, sf.MAX_ORDER)
    return float(field_energies_exterior_disk(k, s, sigma, R)[k])
