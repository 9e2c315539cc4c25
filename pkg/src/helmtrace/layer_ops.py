"""Layer potentials and boundary integral operators on the unit circle.

For ``Re s > 0`` the kernel ``K_0(s|x - y|)/(2 pi)`` diagonalises on the
circle.  Mode ``k`` of the single layer potential is ``I_k(s r) K_k(s)``
inside and ``I_k(s) K_k(s r)`` outside, and the double layer follows by
differentiating in the source radius.  Everything is written in terms of
``a = I'_k/I_k``, ``b = K'_k/K_k`` and the product
``P = I_k K_k = 1/(s (a - b))`` (Wronskian), so no Bessel value is formed.

Sign convention: the normal points out of the disk and a jump is interior
minus exterior, which gives ``[d_n S] = +1`` and ``[D] = -1`` per mode.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy import special as sp

from . import special_fn as sf
from .extension_spectral import (
    dtn_disk_modes,
    field_parts_disk,
    field_parts_exterior_disk,
)
from .trace_spaces import TWO_PI, QuadratureError, Wavenumber

S_MIN, S_MAX = 1e-3, 1e3
MAX_MODE = 128
BOUND_NAMES = ("S_potential", "V", "Kdual", "D_potential", "K", "W")


def _wavenumber(s):
    s = s.s if isinstance(s, Wavenumber) else s
    s = complex(s)
    if s.real <= 0:
        raise ValueError("Re s must be positive")
    if not (S_MIN * (1 - 1e-12) <= abs(s) <= S_MAX * (1 + 1e-12)):
        raise sf.DomainError(f"|s| outside [{S_MIN:g}, {S_MAX:g}]")
    return s


@dataclass
class LayerSpectrum:
    """Per-mode values for ``k = 0..K`` (all quantities are even in ``k``).

    ``traces`` maps ``(potential, side, kind)`` with potential in {S, D},
    side in {int, ext} and kind in {dir, neu} to an array over modes.
    """

    s: complex
    V: np.ndarray
    K: np.ndarray
    Kdual: np.ndarray
    W: np.ndarray
    traces: dict
    a: np.ndarray
    b: np.ndarray

    @property
    def max_mode(self):
        return self.V.size - 1

    @property
    def rho(self):
        return self.s.real / abs(self.s)

    def jump(self, potential, kind):
        return self.traces[(potential, "int", kind)] - self.traces[(potential, "ext", kind)]

    def apply(self, op, coeffs):
        """Apply V, K, Kdual or W to circle coefficients ``c_{-K..K}``."""
        c = np.asarray(coeffs, dtype=complex)
        kk = (c.size - 1) // 2
        if kk > self.max_mode:
            raise ValueError("trace has modes beyond the spectrum")
        vals = getattr(self, op)
        return vals[np.abs(np.arange(-kk, kk + 1))] * c


def layer_spectrum(s, K):
    """Per-mode traces and boundary operators for wavenumber ``s``."""
    s = _wavenumber(s)
    if not (0 <= K <= MAX_MODE):
        raise sf.DomainError(f"K must lie in [0, {MAX_MODE}]")
    a = sf.i_log_derivs(K, s)[:, 0]
    b = sf.k_log_derivs(K, s)[:, 0]
    P = 1.0 / (s * (a - b))
    traces = {
        ("S", "int", "dir"): P,
        ("S", "ext", "dir"): P,
        ("S", "int", "neu"): s * P * a,
        ("S", "ext", "neu"): s * P * b,
        ("D", "int", "dir"): s * P * b,
        ("D", "ext", "dir"): s * P * a,
        ("D", "int", "neu"): s * s * P * a * b,
        ("D", "ext", "neu"): s * s * P * a * b,
    }
    # a + b cancels for k >> |s|; the ratio form only subtracts two O(s/k) terms
    r = sf.i_ratios(K, s)[:, 0]
    q = sf.k_ratios(K, s)[:, 0]
    a_plus_b = r.copy()
    a_plus_b[0] -= q[0]
    a_plus_b[1:] -= 1.0 / q[:-1]
    Kk = s * P * a_plus_b / 2.0
    return LayerSpectrum(s=s, V=P, K=Kk, Kdual=Kk.copy(), W=s * s * P * a * b,
                         traces=traces, a=a, b=b)


# --- independent single-layer oracle ------------------------------------------

def _quad_complex(f, a, b, **kw):
    opts = dict(limit=400, epsabs=0.0, epsrel=1e-13)
    opts.update(kw)
    # roundoff warnings at this tolerance are expected; the error estimate is checked
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re, er = integrate.quad(lambda x: f(x).real, a, b, **opts)
        im, ei = integrate.quad(lambda x: f(x).imag, a, b, **opts)
    return complex(re, im), math.hypot(er, ei)


def v_quadrature_oracle(k, s):
    """``(1/2pi) int_0^{2pi} K_0(2 s |sin(phi/2)|) e^{ik phi} dphi``.

    By symmetry this is ``(1/pi) int_0^pi K_0(z) cos(k phi) dphi``.  On
    ``[0, delta]`` the kernel is split as ``-log(phi) I_0(z) + smooth`` and
    the log part goes to the QUADPACK product rule for the weight
    ``log(phi)``; the window is short enough that ``I_0(z)`` stays moderate,
    so the split loses no digits.  The rest is plain adaptive quadrature.
    """
    s = _wavenumber(s)
    if abs(k) > 32:
        raise sf.DomainError("oracle supports |k| <= 32")
    delta = min(1.0, 1.0 / abs(s))

    def z(phi):
        return 2.0 * s * math.sin(phi / 2)

    def log_coef(phi):
        return -sp.iv(0, z(phi)) * math.cos(k * phi)

    def smooth(phi):
        if phi == 0.0:
            return (math.log(2.0) - np.log(s) - np.euler_gamma) + 0j
        zz = z(phi)
        # K_0(z) + log(phi) I_0(z); log(z/phi) is smooth
        return (sp.kv(0, zz) + math.log(phi) * sp.iv(0, zz)) * math.cos(k * phi)

    def full(phi):
        return sp.kv(0, z(phi)) * math.cos(k * phi)

    part_log, e1 = _quad_complex(log_coef, 0.0, delta, weight="alg-loga", wvar=(0.0, 0.0))
    part_smooth, e2 = _quad_complex(smooth, 0.0, delta)
    part_far, e3 = _quad_complex(full, delta, math.pi)
    val = (part_log + part_smooth + part_far) / math.pi
    err = (e1 + e2 + e3) / math.pi
    if not np.isfinite(val) or err > 1e-9 * max(abs(val), 1e-300):
        raise QuadratureError(f"single-layer oracle did not converge for k={k}, s={s}")
    return complex(val)


def _zk1_minus_one(z):
    """``z K_1(z) - 1`` without cancellation for small ``|z|``."""
    if abs(z) >= 2.0:
        return z * sp.kv(1, z) - 1.0
    q = z * z / 4.0
    term, total, m = q, 0j, 0
    while True:
        inc = (sp.digamma(m + 1) + sp.digamma(m + 2)) * term
        total += inc
        if abs(inc) <= 1e-17 * abs(total):
            break
        m += 1
        term *= q / (m * (m + 1))
    return z * sp.iv(1, z) * np.log(z / 2.0) - total


def k_quadrature_oracle(k, s):
    """Double-layer eigenvalue by direct quadrature of its kernel.

    On the unit circle ``d/dn_y K_0(s|x-y|)`` reduces to
    ``-s K_1(z) sin(phi/2)`` with ``z = 2 s sin(phi/2)``, which tends to
    ``-1/2`` as ``phi -> 0``.  That constant is subtracted (it only feeds the
    zero mode) so the remaining integrand is small for small ``|s|``.
    """
    s = _wavenumber(s)
    if abs(k) > 32:
        raise sf.DomainError("oracle supports |k| <= 32")

    def f(phi):
        if phi == 0.0:
            return 0j
        return 0.5 * _zk1_minus_one(2.0 * s * math.sin(phi / 2))

    # the cosine factor goes to QUADPACK's oscillatory-weight rule
    val, err = _quad_complex(f, 0.0, math.pi, weight="cos", wvar=float(k))
    val = -val / math.pi - (0.5 if k == 0 else 0.0)
    err /= math.pi
    if not np.isfinite(val) or err > 1e-9 * max(abs(val), 1e-300):
        raise QuadratureError(f"double-layer oracle did not converge for k={k}, s={s}")
    return complex(val)


# --- bound checks ------------------------------------------------------------

@dataclass
class BoundReport:
    rows: list = field(default_factory=list)

    COLUMNS = ("re_s", "im_s", "k", "bound_name", "lhs", "rhs", "margin", "pass")

    def add(self, s, k, name, lhs, rhs, tol=0.0):
        lhs, rhs = float(lhs), float(rhs)
        margin = (rhs - lhs) / rhs if rhs > 0 else (0.0 if lhs <= 0 else -math.inf)
        self.rows.append((s.real, s.imag, int(k), name, lhs, rhs, margin, margin >= -tol))

    def extend(self, other):
        self.rows.extend(other.rows)
        return self

    @property
    def violations(self):
        return [r for r in self.rows if not r[7]]

    def worst(self, name=None):
        rows = [r for r in self.rows if name is None or r[3] == name]
        return min(rows, key=lambda r: r[6]) if rows else None

    def to_csv(self, fh=None):
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow([f"{r[0]:.17g}", f"{r[1]:.17g}", r[2], r[3],
                        f"{r[4]:.17g}", f"{r[5]:.17g}", f"{r[6]:.17g}", int(r[7])])
        return fh.getvalue() if own else None


def check_continuity_bounds(spec, h=None, energies=None, tol=1e-12):
    """Per-mode continuity estimates in the weighted trace norms.

    ``h`` are the disk extension weights at ``sigma = |s|`` (computed when
    omitted); ``energies`` may pass precomputed ``(E_int, E_ext)`` of the
    normalised interior and exterior fields.  ``tol`` absorbs rounding in the
    relative margin only.
    """
    s = spec.s
    K = spec.max_mode
    sigma = abs(s)
    rho = spec.rho
    inv = 1.0 / rho
    if h is None:
        h = TWO_PI * dtn_disk_modes(K, sigma)
    if energies is None:
        gi, mi = field_parts_disk(K, s)
        ge, me = field_parts_exterior_disk(K, s)
        energies = (gi + sigma ** 2 * mi, ge + sigma ** 2 * me)
    e_int, e_ext = energies
    report = BoundReport()
    Pabs2 = np.abs(spec.V) ** 2
    s_pot = Pabs2 * (e_int + e_ext)
    d_pot = (np.abs(spec.traces[("D", "int", "dir")]) ** 2 * e_int
             + np.abs(spec.traces[("D", "ext", "dir")]) ** 2 * e_ext)
    for k in range(K + 1):
        report.add(s, k, "S_potential", s_pot[k], inv ** 2 * TWO_PI ** 2 / h[k], tol)
        report.add(s, k, "V", h[k] * abs(spec.V[k]), TWO_PI * inv, tol)
        report.add(s, k, "Kdual", abs(spec.Kdual[k]), 0.5 + inv, tol)
        report.add(s, k, "D_potential", d_pot[k], inv ** 2 * h[k], tol)
        report.add(s, k, "K", abs(spec.K[k]), 0.5 + inv, tol)
        report.add(s, k, "W", TWO_PI * abs(spec.W[k]) / h[k], inv, tol)
    return report


def check_normal_derivative_bound(k, s, e_int=None):
    """Ratio of the squared dual norm of ``d_n v`` to ``||v||^2_{H^1(disk,|s|)}``
    for ``v = I_k(s r)/I_k(s) e^{ik theta}``; the estimate says it is <= 1."""
    s = _wavenumber(s)
    k = abs(int(k))
    sigma = abs(s)
    h = TWO_PI * dtn_disk_modes(k, sigma)[k]
    dn = s * sf.i_log_derivs(k, s)[k, 0]
    if e_int is None:
        gi, mi = field_parts_disk(k, s)
        e_int = gi[k] + sigma ** 2 * mi[k]
    return float(TWO_PI ** 2 * abs(dn) ** 2 / h / e_int)


@dataclass
class CoercivityResult:
    form: complex
    lhs: float
    rhs: float

    @property
    def margin(self):
        """Relative margin ``(lhs - rhs)/rhs``."""
        return (self.lhs - self.rhs) / self.rhs if self.rhs > 0 else 0.0

    @property
    def modulus_margin(self):
        """Relative margin of ``|l(v,v)|`` over ``rho ||v||^2``."""
        return (abs(self.form) - self.rhs) / self.rhs if self.rhs > 0 else 0.0


def check_coercivity(k, s, parts=None):
    """``l(v,v) = int |grad v|^2 + s^2 |v|^2`` for the mode-``k`` single layer
    field on both sides of the circle, against ``rho ||v||^2_{H^1(R^2 \\ Gamma, |s|)}``."""
    s = _wavenumber(s)
    k = abs(int(k))
    sigma = abs(s)
    if parts is None:
        gi, mi = field_parts_disk(k, s)
        ge, me = field_parts_exterior_disk(k, s)
        parts = (gi[k], mi[k], ge[k], me[k])
    gi, mi, ge, me = parts
    P2 = abs(layer_spectrum(s, k).V[k]) ** 2
    grad, mass = P2 * (gi + ge), P2 * (mi + me)
    form = grad + s * s * mass
    lhs = (np.conj(s) / sigma * form).real
    rhs = (s.real / sigma) * (grad + sigma ** 2 * mass)
    return CoercivityResult(complex(form), float(lhs), float(rhs))


def sweep_bounds(sigmas, phases, K, tol=1e-12):
    """Continuity, normal-derivative and coercivity checks over an ``s``-grid.

    Returns ``(BoundReport, normal_rows, coercivity_rows)``; the last two are
    lists of ``(s, k, value)``.
    """
    report = BoundReport()
    normal_rows, coer = [], []
    for sigma in sigmas:
        h = TWO_PI * dtn_disk_modes(K, sigma)
        for ph in phases:
            s = complex(sigma * np.exp(1j * ph))
            spec = layer_spectrum(s, K)
            gi, mi = field_parts_disk(K, s)
            ge, me = field_parts_exterior_disk(K, s)
            e_int, e_ext = gi + sigma ** 2 * mi, ge + sigma ** 2 * me
            report.extend(check_continuity_bounds(spec, h, (e_int, e_ext), tol))
            dn = s * spec.a
            ratio = TWO_PI ** 2 * np.abs(dn) ** 2 / h / e_int
            P2 = np.abs(spec.V) ** 2
            grad, mass = P2 * (gi + ge), P2 * (mi + me)
            lhs = (np.conj(s) / sigma * (grad + s * s * mass)).real
            rhs = (s.real / sigma) * (grad + sigma ** 2 * mass)
            for k in range(K + 1):
                normal_rows.append((s, k, float(ratio[k])))
                coer.append((s, k, float((lhs[k] - rhs[k]) / rhs[k])))
    return report, normal_rows, coer
