"""Piecewise-linear finite elements for the minimal extension problem.

Elements are straight triangles in polar coordinates ``(r, theta)`` mapped
onto the exact disk or annulus, so every discrete function is an H^1
function on the true domain and the discrete minimum is a genuine upper
bound for the minimal energy of its own boundary data.  A function that is
linear in ``(r, theta)`` on a reference triangle has ``|grad v|^2 = v_r^2 +
v_theta^2/r^2``, and with ``dA = r dr dtheta`` every element integral is
exact: ``int r`` and the mass matrix are polynomial, and ``int dr dtheta/r``
reduces to edge integrals of ``log r``.

The disk centre is covered by a fan of collapsed sectors
``v = v0 (1 - r/r1) + (r/r1) (v_j (1 - t) + v_{j+1} t)``, integrated exactly
by a tensor Gauss rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .extension_spectral import RHO_MAX, RHO_MIN, annulus_modes, dtn_disk_modes
from .trace_spaces import TWO_PI, FourierTrace

INTERIOR, GAMMA, GAMMA_C = 0, 1, 2
TAG_NAMES = {INTERIOR: "Interior", GAMMA: "Gamma", GAMMA_C: "GammaC"}
H_MIN, H_MAX = 0.005, 0.3


class SolverError(RuntimeError):
    pass


class BandLimitError(ValueError):
    pass


def _chord_areas(p):
    u, v = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    return 0.5 * np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


@dataclass
class Mesh:
    """Polar-mapped triangulation.

    ``polar`` holds ``(r, theta)`` per vertex.  ``triangles`` index into the
    vertices; ``sector`` marks the collapsed centre elements, whose first
    vertex is the centre.  ``ref_theta`` stores unwrapped element angles so
    elements crossing ``theta = 0`` stay straight in the reference plane.
    """

    polar: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    sector: np.ndarray
    ref_theta: np.ndarray
    inner_radius: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def vertices(self):
        r, t = self.polar[:, 0], self.polar[:, 1]
        return np.column_stack([r * np.cos(t), r * np.sin(t)])

    @property
    def n_vertices(self):
        return self.polar.shape[0]

    @property
    def gamma_nodes(self):
        return np.flatnonzero(self.tags == GAMMA)

    @property
    def gamma_c_nodes(self):
        return np.flatnonzero(self.tags == GAMMA_C)

    def area(self):
        """Exact area of the mapped elements."""
        return float(fem_energy(FemField(self, np.ones(self.n_vertices)), 1.0))

    def chord_triangles(self):
        return self.vertices[self.triangles]

    def size(self):
        """Largest circumscribed diameter of the straight-chord triangles."""
        p = self.chord_triangles()
        a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
        b = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
        c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
        area = _chord_areas(p)
        return float(np.max(a * b * c / (2.0 * area)))

    def aspect_ratios(self):
        """Circumradius over twice the inradius (1 for equilateral)."""
        p = self.chord_triangles()
        a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
        b = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
        c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
        area = _chord_areas(p)
        R = a * b * c / (4.0 * area)
        rin = 2.0 * area / (a + b + c)
        return R / (2.0 * rin)

    def export_text(self):
        """Plain text: ``x y tag`` per vertex, a blank line, ``i j k`` per triangle."""
        lines = [f"{x:.17g} {y:.17g} {TAG_NAMES[int(t)]}"
                 for (x, y), t in zip(self.vertices, self.tags)]
        lines.append("")
        lines += [f"{i} {j} {k}" for i, j, k in self.triangles]
        return "\n".join(lines) + "\n"


@dataclass
class FemField:
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.mesh.n_vertices,):
            raise ValueError("one value per mesh vertex required")


# --- meshing ---------------------------------------------------------------------

def _radial_nodes(h, r_in, sigma):
    """Ring radii from ``1`` inward.  Near ``r = 1`` the spacing is refined to
    resolve the ``exp(-sigma (1 - r))`` layer and grows geometrically to ``h``."""
    d0 = h / max(1.0, 0.4 * sigma)
    radii = [1.0]
    step = d0
    while True:
        r = radii[-1] - step
        if r <= r_in + 0.5 * min(step, h):
            break
        radii.append(r)
        step = min(h, step * 1.2)
    if r_in > 0:
        radii.append(r_in)
        # spread the last gap so no ring is squeezed against the inner circle
        if len(radii) >= 3:
            radii[-2] = 0.5 * (radii[-3] + radii[-1]) if radii[-2] - r_in < 0.5 * step else radii[-2]
    return np.array(radii[::-1])


def _ring_count(r, dr, h, minimum):
    return max(minimum, int(math.ceil(TWO_PI * r / min(h, 2.5 * dr))))


def _build(h, r_in, sigma, min_boundary):
    if not (H_MIN <= h <= H_MAX):
        raise ValueError(f"h must lie in [{H_MIN}, {H_MAX}]")
    radii = _radial_nodes(h, r_in, sigma)
    if r_in == 0.0:
        radii = np.concatenate([[0.0], radii[radii > 0.5 * h]]) if radii[0] != 0.0 else radii
        if radii[1] < 0.5 * h:
            radii = np.delete(radii, 1)
    n = radii.size
    dr = np.diff(radii)
    counts = []
    for i, r in enumerate(radii):
        if r == 0.0:
            counts.append(1)
            continue
        local = min(dr[max(i - 1, 0)], dr[min(i, n - 2)])
        m = _ring_count(r, local, h, 6)
        if i == n - 1:
            m = max(m, min_boundary)
        counts.append(m)
    polar, tags, rings = [], [], []
    for i, (r, m) in enumerate(zip(radii, counts)):
        idx = len(polar)
        theta = TWO_PI * np.arange(m) / m if m > 1 else np.zeros(1)
        for t in theta:
            polar.append((r, t))
        tag = GAMMA if i == n - 1 else (GAMMA_C if (i == 0 and r_in > 0) else INTERIOR)
        tags += [tag] * m
        rings.append((idx, m, theta))
    polar = np.array(polar)
    tris, sector, ref = [], [], []
    for i in range(n - 1):
        (ia, ma, ta), (ib, mb, tb) = rings[i], rings[i + 1]
        if ma == 1:
            for j in range(mb):
                jn = (j + 1) % mb
                t0 = tb[j]
                t1 = tb[jn] if jn else TWO_PI
                tris.append((ia, ib + j, ib + jn))
                sector.append(True)
                ref.append((t0, t0, t1))
            continue
        # zipper: walk both rings in angle, always advancing the lagging one
        a = b = 0
        while a < ma or b < mb:
            ta_next = ta[a + 1] if a + 1 < ma else TWO_PI
            tb_next = tb[b + 1] if b + 1 < mb else TWO_PI
            ang_a = ta[a] if a < ma else TWO_PI
            ang_b = tb[b] if b < mb else TWO_PI
            if b >= mb or (a < ma and ta_next <= tb_next):
                tris.append((ia + a, ia + (a + 1) % ma, ib + b % mb))
                ref.append((ang_a, ta_next, ang_b))
                a += 1
            else:
                tris.append((ia + a % ma, ib + b, ib + (b + 1) % mb))
                ref.append((ang_a, ang_b, tb_next))
                b += 1
            sector.append(False)
    tris = np.array(tris, dtype=np.int64)
    ref = np.array(ref)
    sector = np.array(sector)
    # orient counterclockwise in the (r, theta) reference plane
    r_ref = polar[tris, 0]
    det = ((r_ref[:, 1] - r_ref[:, 0]) * (ref[:, 2] - ref[:, 0])
           - (r_ref[:, 2] - r_ref[:, 0]) * (ref[:, 1] - ref[:, 0]))
    flip = (det < 0) & ~sector
    tris[flip] = tris[flip][:, [0, 2, 1]]
    ref[flip] = ref[flip][:, [0, 2, 1]]
    return Mesh(polar, tris, np.array(tags), sector, ref, inner_radius=r_in,
                meta={"h": h, "sigma_grading": sigma, "rings": n})


def mesh_disk(h, sigma=0.0, min_boundary=0):
    """Structured polar mesh of the unit disk.  ``sigma`` refines radially
    towards the boundary; ``min_boundary`` forces a minimum count of Gamma
    vertices."""
    return _build(h, 0.0, sigma, min_boundary)


def mesh_annulus(rho, h, sigma=0.0, min_boundary=0):
    """Structured polar mesh of ``rho < r < 1``; Gamma is the outer circle."""
    if not (RHO_MIN <= rho <= RHO_MAX):
        raise ValueError(f"rho must lie in [{RHO_MIN}, {RHO_MAX}]")
    return _build(h, rho, sigma, min_boundary)


# --- assembly ---------------------------------------------------------------------

_G3 = np.polynomial.legendre.leggauss(3)


def _mean_log(r0, r1):
    """Mean of ``log r`` over the segment ``[r0, r1]``."""
    out = np.log(np.maximum(r0, 1e-300))
    d = r1 - r0
    big = np.abs(d) > 1e-12 * np.maximum(r0, r1)
    a, b = r0[big], r1[big]
    out[big] = ((b * np.log(b) - b) - (a * np.log(a) - a)) / (b - a)
    small = ~big
    out[small] = np.log(0.5 * (r0[small] + r1[small]))
    return out


def _triangle_blocks(mesh):
    tri = ~mesh.sector
    T = mesh.triangles[tri]
    r = mesh.polar[T, 0]
    t = mesh.ref_theta[tri]
    x1, x2, x3 = r[:, 0], r[:, 1], r[:, 2]
    y1, y2, y3 = t[:, 0], t[:, 1], t[:, 2]
    det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
    area = 0.5 * det
    # gradients of barycentric functions in (r, theta)
    b = np.stack([y2 - y3, y3 - y1, y1 - y2], axis=1) / det[:, None]
    c = np.stack([x3 - x2, x1 - x3, x2 - x1], axis=1) / det[:, None]
    int_r = area * r.mean(axis=1)
    # int dr dtheta / r = boundary integral of log r dtheta, counterclockwise
    inv_r = np.zeros_like(area)
    for p, q in ((0, 1), (1, 2), (2, 0)):
        inv_r += (t[:, q] - t[:, p]) * _mean_log(r[:, p], r[:, q])
    stiff = b[:, :, None] * b[:, None, :] * int_r[:, None, None] \
        + c[:, :, None] * c[:, None, :] * inv_r[:, None, None]
    # int phi_i phi_j phi_k = 2|T| a!b!c!/(a+b+c+2)!
    mass = np.empty_like(stiff)
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                e = np.bincount([i, j, k], minlength=3)
                coef = 2.0 * np.prod([math.factorial(x) for x in e]) / math.factorial(5)
                acc = acc + coef * r[:, k]
            mass[:, i, j] = area * acc
    return T, stiff, mass


def _sector_blocks(mesh):
    S = mesh.triangles[mesh.sector]
    if S.size == 0:
        return S, np.zeros((0, 3, 3)), np.zeros((0, 3, 3))
    r1 = mesh.polar[S[:, 1], 0]
    t = mesh.ref_theta[mesh.sector]
    dth = t[:, 2] - t[:, 1]
    x, w = _G3
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    stiff = np.zeros((S.shape[0], 3, 3))
    mass = np.zeros((S.shape[0], 3, 3))
    for ui, wi in zip(u, wu):          # r = ui * r1
        for tj, wj in zip(u, wu):      # theta = t1 + tj * dth
            phi = np.array([1.0 - ui, ui * (1.0 - tj), ui * tj])
            d_r = np.array([-1.0, 1.0 - tj, tj])          # times 1/r1
            d_t = np.array([0.0, -1.0, 1.0])              # v_theta / r = d_t / (r1 dth)
            jac = wi * wj * ui * r1 * r1 * dth            # r dr dtheta
            grad = (np.outer(d_r, d_r)[None] / r1[:, None, None] ** 2
                    + np.outer(d_t, d_t)[None] / (r1 * dth)[:, None, None] ** 2)
            stiff += grad * jac[:, None, None]
            mass += np.outer(phi, phi)[None] * jac[:, None, None]
    return S, stiff, mass


def assemble(mesh):
    """Global stiffness and mass matrices (real, symmetric)."""
    n = mesh.n_vertices
    A = sparse.csr_matrix((n, n))
    M = sparse.csr_matrix((n, n))
    for T, st, ma in (_triangle_blocks(mesh), _sector_blocks(mesh)):
        if T.size == 0:
            continue
        rows = np.repeat(T, 3, axis=1).ravel()
        cols = np.tile(T, (1, 3)).ravel()
        A = A + sparse.csr_matrix((st.ravel(), (rows, cols)), shape=(n, n))
        M = M + sparse.csr_matrix((ma.ravel(), (rows, cols)), shape=(n, n))
    return A, M


def fem_energy(field, sigma):
    """``||grad v||^2 + sigma^2 ||v||^2`` of a P1 field, integrated exactly."""
    A, M = assemble(field.mesh)
    v = field.values
    return float(np.real(np.vdot(v, A @ v) + sigma ** 2 * np.vdot(v, M @ v)))


@dataclass
class ExtensionSolution:
    field: FemField
    energy: float
    residual: float
    gamma_trace: np.ndarray


def _dirichlet_nodes(mesh, variant):
    if variant not in ("standard", "alternative"):
        raise ValueError("variant must be 'standard' or 'alternative'")
    fixed = mesh.gamma_nodes
    if variant == "alternative":
        fixed = np.concatenate([fixed, mesh.gamma_c_nodes])
    return fixed


def solve_min_extension(mesh, traces, sigma, variant="standard", tol=1e-10):
    """Minimise the weighted energy with nodal interpolation of each trace.

    ``traces`` is a FourierTrace or a list of them (one factorisation serves
    all).  Returns one :class:`ExtensionSolution` per trace (a single object
    for a single trace).
    """
    single = isinstance(traces, FourierTrace)
    traces = [traces] if single else list(traces)
    gam = mesh.gamma_nodes
    for g in traces:
        if g.max_mode > gam.size // 8:
            raise BandLimitError("trace band exceeds Gamma vertex count / 8")
    fixed = _dirichlet_nodes(mesh, variant)
    free = np.setdiff1d(np.arange(mesh.n_vertices), fixed)
    A, M = assemble(mesh)
    S = (A + sigma ** 2 * M).tocsr()
    Sff = S[free][:, free].tocsc()
    Sfb = S[free][:, fixed]
    lu = spla.splu(Sff)
    out = []
    for g in traces:
        vals = np.zeros(mesh.n_vertices, dtype=complex)
        vals[gam] = g.evaluate(mesh.polar[gam, 1])
        rhs = -(Sfb @ vals[fixed])
        sol = lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)
        vals[free] = sol
        res = np.linalg.norm(Sff @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if not np.isfinite(res) or res > tol:
            raise SolverError(f"relative residual {res:.2e} exceeds {tol:g}")
        energy = float(np.real(np.vdot(vals, S @ vals)))
        out.append(ExtensionSolution(FemField(mesh, vals), energy, float(res), vals[gam]))
    return out[0] if single else out


# --- spectral reference for the interpolated trace -----------------------------

def interpolated_trace_energy(mesh, g, sigma, variant="standard", aliases=8):
    """Minimal energy of the boundary function the FEM actually sees.

    On Gamma a discrete field is the piecewise-linear interpolant of the
    nodal values in theta.  Its Fourier coefficient at mode ``m`` is
    ``sinc^2(m dtheta / 2)`` times the discrete transform of the nodal
    values (periodic in ``m`` with period equal to the node count), so the
    energy is a positive alias sum.  Truncating at ``aliases`` periods gives
    a lower bound of the exact value.
    """
    gam = mesh.gamma_nodes
    N = gam.size
    theta = mesh.polar[gam, 1]
    order = np.argsort(theta)
    vals = g.evaluate(theta[order])
    dft = np.fft.fft(vals) / N
    base = np.fft.fftfreq(N, 1.0 / N).astype(int)
    m = (base[None, :] + N * np.arange(-aliases, aliases + 1)[:, None]).ravel()
    coef = np.tile(dft, 2 * aliases + 1) * np.sinc(m / N) ** 2
    mmax = int(np.max(np.abs(m)))
    if mesh.inner_radius > 0:
        w = annulus_modes(mmax, sigma, mesh.inner_radius, variant)
    else:
        w = TWO_PI * dtn_disk_modes(mmax, sigma)
    return float(np.sum(w[np.abs(m)] * np.abs(coef) ** 2))
