"""Boundary data in Fourier / zonal harmonic coefficients and diagonal norms.

Circle basis: ``e_k(theta) = exp(i k theta)`` with ``||e_k||^2 = 2 pi``.
Sphere basis: zonal harmonics ``Y_l0``, orthonormal on the unit sphere.
Every norm in this package is diagonal in these bases, so a norm is just a
vector of per-mode weights ``lam`` with ``||g||^2 = sum lam_k |c_k|^2``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import eval_legendre

TWO_PI = 2.0 * np.pi
SIGMA_MIN = 1e-6
SIGMA_MAX = 1e6


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class Weight:
    """Real weight ``sigma > 0`` with ``low = min(1, sigma)`` and
    ``high = max(1, 1/sigma) = 1/low``."""

    sigma: float

    def __post_init__(self):
        if not (SIGMA_MIN <= self.sigma <= SIGMA_MAX):
            raise ValueError(f"sigma={self.sigma!r} outside [{SIGMA_MIN:g}, {SIGMA_MAX:g}]")

    @property
    def low(self):
        return min(1.0, self.sigma)

    @property
    def high(self):
        return max(1.0, 1.0 / self.sigma)


@dataclass(frozen=True)
class Wavenumber:
    s: complex

    def __post_init__(self):
        if complex(self.s).real <= 0:
            raise ValueError("Re s must be positive")

    @property
    def sigma(self):
        return abs(complex(self.s))

    @property
    def rho(self):
        """Coercivity ratio ``Re s / |s|``."""
        s = complex(self.s)
        return s.real / abs(s)

    @classmethod
    def polar(cls, sigma, phase):
        return cls(sigma * np.exp(1j * phase))


@dataclass
class FourierTrace:
    """Coefficients ``c_k`` for ``k = -K..K``; ``coeffs[k + K] = c_k``."""

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim != 1 or self.coeffs.size % 2 != 1:
            raise ValueError("need 2K+1 coefficients")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite coefficient")

    @property
    def max_mode(self):
        return (self.coeffs.size - 1) // 2

    @property
    def modes(self):
        K = self.max_mode
        return np.arange(-K, K + 1)

    def __getitem__(self, k):
        K = self.max_mode
        return self.coeffs[k + K] if abs(k) <= K else 0j

    @classmethod
    def zeros(cls, K):
        return cls(np.zeros(2 * K + 1, dtype=complex))

    @classmethod
    def mode(cls, k, K=None, value=1.0):
        K = abs(k) if K is None else K
        g = cls.zeros(K)
        g.coeffs[k + K] = value
        return g

    @classmethod
    def from_samples(cls, samples, K):
        """Coefficients of a band-limited function from N equispaced samples."""
        samples = np.asarray(samples, dtype=complex)
        N = samples.size
        if 2 * K + 1 > N:
            raise ValueError("too few samples for the requested band")
        c = np.fft.fft(samples) / N
        return cls(np.concatenate([c[N - K:], c[:K + 1]]))

    def padded(self, K):
        if K < self.max_mode:
            raise ValueError("cannot truncate by padding")
        out = FourierTrace.zeros(K)
        out.coeffs[K - self.max_mode:K + self.max_mode + 1] = self.coeffs
        return out

    def evaluate(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.exp(1j * np.multiply.outer(theta, self.modes)) @ self.coeffs

    def l2_norm_sq(self):
        return TWO_PI * float(np.sum(np.abs(self.coeffs) ** 2))


@dataclass
class SphericalTrace:
    """Zonal coefficients ``c_l`` for ``l = 0..L``."""

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim != 1 or self.coeffs.size == 0:
            raise ValueError("need L+1 coefficients")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite coefficient")

    @property
    def max_degree(self):
        return self.coeffs.size - 1

    @classmethod
    def degree(cls, l, L=None, value=1.0):
        L = l if L is None else L
        c = np.zeros(L + 1, dtype=complex)
        c[l] = value
        return cls(c)

    def l2_norm_sq(self):
        return float(np.sum(np.abs(self.coeffs) ** 2))


@dataclass
class DiagonalNormProfile:
    """Per-mode weights of a diagonal norm.

    ``weights[j]`` belongs to ``|k| = j`` on the circle and to degree ``l = j``
    on the sphere.  ``label`` is one of HD, HD-alt, GD, HN, HN-alt.
    """

    weights: np.ndarray
    kind: str = "circle"
    label: str = "HD"
    geometry: str = ""
    sigma: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.kind not in ("circle", "sphere"):
            raise ValueError("kind must be 'circle' or 'sphere'")
        if np.any(~np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise ValueError("weights must be positive and finite")

    @property
    def max_mode(self):
        return self.weights.size - 1

    def weight(self, k):
        return self.weights[abs(k)]

    def norm(self, g):
        return _diag_norm(self, g)


def _check_kind(profile, g):
    if isinstance(g, FourierTrace):
        if profile.kind != "circle":
            raise ValueError("circle trace needs a circle profile")
        if g.max_mode > profile.max_mode:
            raise ValueError("profile does not cover all modes of the trace")
    elif isinstance(g, SphericalTrace):
        if profile.kind != "sphere":
            raise ValueError("sphere trace needs a sphere profile")
        if g.max_degree > profile.max_mode:
            raise ValueError("profile does not cover all degrees of the trace")
    else:
        raise TypeError(f"unsupported trace type {type(g).__name__}")


def _diag_norm(profile, g):
    _check_kind(profile, g)
    if isinstance(g, FourierTrace):
        lam = profile.weights[np.abs(g.modes)]
    else:
        lam = profile.weights[: g.max_degree + 1]
    return float(np.sqrt(np.sum(lam * np.abs(g.coeffs) ** 2)))


def gagliardo_eigen_circle(k):
    """Gagliardo seminorm squared of ``e_k`` on the unit circle: ``4 pi^2 |k|``."""
    if abs(k) > 4096:
        raise ValueError("|k| must not exceed 4096")
    return 4.0 * np.pi ** 2 * abs(k)


def _sphere_integrand(gamma, l):
    t = np.sin(gamma / 2) ** 2
    if t * l * (l + 1.0) < 0.1:
        # P_l(1 - 2t) = 2F1(-l, l+1; 1; t); (1 - P_l)/t summed without cancellation
        term, acc = 1.0, 0.0
        for j in range(1, l + 1):
            term *= -(l - j + 1.0) * (l + j) / (j * j) * (t if j > 1 else 1.0)
            acc -= term
            if abs(term) < 1e-17 * abs(acc):
                break
        return acc * np.cos(gamma / 2)
    return (1.0 - eval_legendre(l, np.cos(gamma))) * np.cos(gamma / 2) / t


_SPHERE_CACHE: dict[int, float] = {}


def gagliardo_eigen_sphere(l, tol=1e-10):
    """Gagliardo seminorm squared (kernel ``|x-y|^{-3}``) of ``Y_l0`` on S^2.

    Reduced by rotational invariance to
    ``pi * int_0^pi (1 - P_l(cos g)) cos(g/2) / sin(g/2)^2 dg``.
    """
    if int(l) != l or not (0 <= l <= 128):
        raise ValueError("degree must be an integer in [0, 128]")
    l = int(l)
    if l == 0:
        return 0.0
    if l in _SPHERE_CACHE:
        return _SPHERE_CACHE[l]
    # one panel per half-oscillation of P_l keeps quad well inside its limit
    edges = np.linspace(0.0, np.pi, l + 2)
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(_sphere_integrand, a, b, args=(l,), epsabs=0.0, epsrel=tol * 1e-1, limit=200)
        total += v
        err += e
    if err > tol * abs(total):
        raise QuadratureError(f"sphere eigenvalue l={l}: error {err:.2e} exceeds tolerance")
    _SPHERE_CACHE[l] = np.pi * total
    return _SPHERE_CACHE[l]


def gd_profile(kind, max_mode, sigma):
    """Weighted Sobolev-Slobodeckij norm: seminorm + sigma*min(1, sigma)*L^2."""
    w = Weight(sigma)
    lam_l2 = sigma * w.low
    j = np.arange(max_mode + 1)
    if kind == "circle":
        weights = 4.0 * np.pi ** 2 * j + TWO_PI * lam_l2
    elif kind == "sphere":
        weights = np.array([gagliardo_eigen_sphere(l) for l in j]) + lam_l2
    else:
        raise ValueError("kind must be 'circle' or 'sphere'")
    return DiagonalNormProfile(weights, kind=kind, label="GD", geometry=kind, sigma=sigma,
                               meta={"l2_weight": lam_l2})


def sobolev_weighted_norm(g, sigma):
    """``sqrt(|g|_{1/2}^2 + sigma*min(1, sigma)*||g||_{L2}^2)``."""
    if isinstance(g, FourierTrace):
        return gd_profile("circle", g.max_mode, sigma).norm(g)
    if isinstance(g, SphericalTrace):
        return gd_profile("sphere", g.max_degree, sigma).norm(g)
    raise TypeError(f"unsupported trace type {type(g).__name__}")


def pairing(g_n, g_d):
    """Bilinear L^2(circle) pairing ``sum_k 2 pi d_k c_{-k}`` (no conjugation)."""
    K = max(g_n.max_mode, g_d.max_mode)
    d = g_n.padded(K).coeffs
    c = g_d.padded(K).coeffs
    return complex(TWO_PI * np.sum(d * c[::-1]))


def dual_norm(primal, g_n):
    """Operator norm of ``g_n`` with respect to a diagonal primal norm.

    The supremum of ``|<g_n, g_d>| / ||g_d||`` is attained mode by mode, which
    gives ``sqrt(sum (2 pi)^2 |d_k|^2 / lam_k)`` on the circle and
    ``sqrt(sum |d_l|^2 / lam_l)`` on the sphere.
    """
    if primal.label not in ("HD", "HD-alt", "GD"):
        raise ValueError(f"dual norm needs a primal (HD-type) profile, got {primal.label}")
    _check_kind(primal, g_n)
    if isinstance(g_n, FourierTrace):
        lam = primal.weights[np.abs(g_n.modes)]
        return float(np.sqrt(np.sum(TWO_PI ** 2 * np.abs(g_n.coeffs) ** 2 / lam)))
    lam = primal.weights[: g_n.max_degree + 1]
    return float(np.sqrt(np.sum(np.abs(g_n.coeffs) ** 2 / lam)))


def dual_profile(primal):
    """Profile of the dual norm, with weights ``(2 pi)^2 / lam`` on the circle."""
    factor = TWO_PI ** 2 if primal.kind == "circle" else 1.0
    label = {"HD": "HN", "HD-alt": "HN-alt", "GD": "GD*"}[primal.label]
    return DiagonalNormProfile(factor / primal.weights, kind=primal.kind, label=label,
                               geometry=primal.geometry, sigma=primal.sigma)


def riesz_image(primal, g):
    """Functional ``d`` with ``dual_norm(primal, d) == primal.norm(g)``."""
    if isinstance(g, FourierTrace):
        return FourierTrace(primal.weights[np.abs(g.modes)] * g.coeffs / TWO_PI)
    return SphericalTrace(primal.weights[: g.max_degree + 1] * g.coeffs)


def decompose_union(profiles, traces):
    """Norm on a disjoint union: square root of the summed squared norms."""
    if len(profiles) != len(traces):
        raise ValueError("one trace per component")
    return float(np.sqrt(sum(p.norm(g) ** 2 for p, g in zip(profiles, traces))))


def trace_to_text(g):
    """Columnar text, one line ``k re im`` per mode (degree for the sphere)."""
    buf = io.StringIO()
    index = g.modes if isinstance(g, FourierTrace) else range(g.max_degree + 1)
    for k, c in zip(index, g.coeffs):
        buf.write(f"{k} {c.real:.17g} {c.imag:.17g}\n")
    return buf.getvalue()


def trace_from_text(text, kind="circle"):
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    data = {int(k): complex(float(re), float(im)) for k, re, im in rows}
    if kind == "sphere":
        L = max(data)
        return SphericalTrace([data.get(l, 0j) for l in range(L + 1)])
    K = max(abs(k) for k in data)
    return FourierTrace([data.get(k, 0j) for k in range(-K, K + 1)])
