"""Direct quadrature of the Gagliardo double integral on the circle and line.

Nothing here uses the Fourier eigenvalues of the seminorm; the routines
only see samples, which makes them an independent check of the spectral
formulas in :mod:`helmtrace.trace_spaces`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class BandLimitError(ValueError):
    pass


class SupportError(ValueError):
    pass


def _check_circle_samples(g):
    g = np.asarray(g, dtype=complex)
    N = g.size
    if N < 64 or N & (N - 1):
        raise ValueError("sample count must be a power of two >= 64")
    c = np.fft.fft(g) / N
    k = np.fft.fftfreq(N, 1.0 / N)
    scale = max(np.max(np.abs(c)), 1e-300)
    if np.max(np.abs(c[np.abs(k) >= N // 4]), initial=0.0) > 1e-12 * scale:
        raise BandLimitError("samples are not band-limited below N/4")
    return g, c, k


def gagliardo_circle(g):
    """Seminorm squared of equispaced samples ``g_j = g(2 pi j / N)``.

    Periodic trapezoid rule on the torus for the kernel
    ``1 / (4 sin^2((theta - phi)/2))``; the diagonal carries the removable
    limit ``|g'(theta)|^2``.
    """
    g, c, k = _check_circle_samples(g)
    N = g.size
    dg = np.fft.ifft(1j * k * c) * N
    total = np.sum(np.abs(dg) ** 2)
    for m in range(1, N):
        w = 1.0 / (4.0 * np.sin(np.pi * m / N) ** 2)
        total += w * np.sum(np.abs(g - np.roll(g, -m)) ** 2)
    h = 2.0 * np.pi / N
    return float(h * h * total)


def gagliardo_line(x, g, chunk=512):
    """Seminorm squared ``int int |g(x)-g(y)|^2 / |x-y|^2`` on the real line.

    ``x`` is a uniform grid and ``g`` must vanish at both ends.  The part of
    the integral with one point outside the grid is added in closed form,
    ``2 int |g(x)|^2 (1/(b - x) + 1/(x - a)) dx``.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=complex)
    if x.size != g.size or x.size < 3:
        raise ValueError("grid and samples must match")
    h = x[1] - x[0]
    if not np.allclose(np.diff(x), h, rtol=1e-10, atol=0.0):
        raise ValueError("grid must be uniform")
    scale = max(np.max(np.abs(g)), 1e-300)
    if abs(g[0]) > 1e-14 * scale or abs(g[-1]) > 1e-14 * scale:
        raise SupportError("samples must vanish at both grid ends")
    n = x.size
    wts = np.full(n, h)
    wts[0] = wts[-1] = h / 2
    dg = np.gradient(g, h)
    total = np.sum(wts * wts * np.abs(dg) ** 2)
    for start in range(0, n, chunk):
        xi = x[start:start + chunk, None]
        gi = g[start:start + chunk, None]
        d = xi - x[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.abs(gi - g[None, :]) ** 2 / d ** 2
        q[d == 0] = 0.0
        total += np.sum(wts[start:start + chunk, None] * wts[None, :] * q)
    a, b = x[0], x[-1]
    inner = slice(1, n - 1)
    tail = np.abs(g[inner]) ** 2 * (1.0 / (b - x[inner]) + 1.0 / (x[inner] - a))
    total += 2.0 * h * np.sum(tail)
    return float(total)


def fourier_line_energy(xi, ghat):
    """``int |xi| |ghat(xi)|^2 dxi`` by the trapezoid rule on the given grid."""
    return float(np.trapezoid(np.abs(xi) * np.abs(ghat) ** 2, xi))


@dataclass
class SplitReport:
    arc_seminorms: list
    union_seminorm: float
    l2_sq: float
    cross_term: float
    lower_holds: bool
    c_spl: float
    notes: dict = field(default_factory=dict)


def _arc_nodes(a, b, n):
    h = (b - a) / n
    return a + h * (np.arange(n) + 0.5), h


def split_inequality_check(func, arcs, n_per_arc=400):
    """Seminorms on a union of disjoint circle arcs versus the arcs alone.

    The union seminorm exceeds the sum of the arc seminorms by the cross
    integral between distinct arcs; ``c_spl`` is that cross term divided by
    ``||g||^2_{L2(union)}`` (infinite for a nonzero cross term on zero data).
    """
    pieces = []
    for a, b in arcs:
        t, h = _arc_nodes(a, b, n_per_arc)
        gv = np.asarray(func(t), dtype=complex)
        pieces.append((t, h, gv))
    for i, (a, b) in enumerate(arcs):
        for c, d in arcs[i + 1:]:
            if not (b <= c or d <= a):
                raise ValueError("arcs overlap")

    def block(p, q, same):
        t1, h1, g1 = p
        t2, h2, g2 = q
        dtheta = t1[:, None] - t2[None, :]
        dist2 = 4.0 * np.sin(dtheta / 2) ** 2
        diff = np.abs(g1[:, None] - g2[None, :]) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            val = diff / dist2
        if same:
            dg = np.gradient(g1, h1)
            np.fill_diagonal(val, np.abs(dg) ** 2)
        return float(np.sum(val) * h1 * h2)

    arc_semi = [block(p, p, True) for p in pieces]
    cross = 0.0
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            cross += 2.0 * block(pieces[i], pieces[j], False)
    l2 = sum(float(np.sum(np.abs(gv) ** 2) * h) for _, h, gv in pieces)
    union = sum(arc_semi) + cross
    if l2 > 0:
        c_spl = cross / l2
    else:
        c_spl = 0.0 if cross == 0 else float("inf")
    return SplitReport(arc_semi, union, l2, cross, union >= sum(arc_semi) - 1e-12 * max(union, 1.0), c_spl)
