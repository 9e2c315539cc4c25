"""Command-line experiments: sweeps over the weight, CSV reports, exit codes.

Every command builds a :class:`SweepReport` whose rows carry one checked
relation each.  A row either asserts an inequality (its ``passed`` flag
counts towards the exit code) or only records a measured ratio.  Measured
constants are derived from the rows as extrema, so the summary can never
disagree with the data, and are written to ``constants.csv``.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import special_fn as sf
from .extension_spectral import (
    Geometry,
    annulus_modes,
    dtn_disk_modes,
    dtn_exterior_ball_modes,
    dtn_exterior_disk,
    dtn_exterior_disk_modes,
    extension_weights,
    field_energies_disk,
    field_energies_exterior_disk,
)
from .fem_oracle import (
    FemField,
    fem_energy,
    interpolated_trace_energy,
    mesh_annulus,
    mesh_disk,
    solve_min_extension,
)
from .gagliardo_quad import gagliardo_circle
from .layer_ops import BOUND_NAMES, S_MAX, S_MIN, sweep_bounds
from .trace_spaces import SIGMA_MAX, SIGMA_MIN, TWO_PI, FourierTrace, gd_profile

COMMANDS = ("selftest", "characterize", "scaling", "compare", "extension-sets",
            "trace", "bio", "fem-validate")
REL_TOL = 1e-12


class ConfigError(ValueError):
    pass


# --- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    sigma_min: float = 1e-4
    sigma_max: float = 1e4
    sigma_points: int = 25
    kmax: int = 64
    phases: tuple = (0.0, math.pi / 8, -math.pi / 8, math.pi / 4, -math.pi / 4, 1.45, -1.45)
    h: float = 0.05
    rho: float = 0.5
    out: str = "results"
    s_min: float = S_MIN
    s_max: float = S_MAX
    s_points: int = 25
    fem_sigmas: tuple = (1e-2, 1e-1, 1.0, 10.0, 100.0)
    fem_kmax: int = 4
    seed: int = 20240601

    def validate(self):
        if self.sigma_points < 1 or self.s_points < 1:
            raise ConfigError("grids must be nonempty")
        if not (SIGMA_MIN <= self.sigma_min <= self.sigma_max <= SIGMA_MAX):
            raise ConfigError(f"sigma range must lie in [{SIGMA_MIN:g}, {SIGMA_MAX:g}]")
        if not (S_MIN <= self.s_min <= self.s_max <= S_MAX):
            raise ConfigError(f"|s| range must lie in [{S_MIN:g}, {S_MAX:g}]")
        if not self.phases or any(abs(p) >= math.pi / 2 for p in self.phases):
            raise ConfigError("phases must be nonempty and strictly inside (-pi/2, pi/2)")
        if not (0 <= self.kmax <= 128):
            raise ConfigError("kmax must lie in [0, 128]")
        if not (0.05 <= self.rho <= 0.95):
            raise ConfigError("rho must lie in [0.05, 0.95]")
        if not (0.005 <= self.h <= 0.3):
            raise ConfigError("h must lie in [0.005, 0.3]")
        if not self.fem_sigmas or not (0 <= self.fem_kmax <= 16):
            raise ConfigError("fem grid must be nonempty and fem_kmax in [0, 16]")
        return self

    @property
    def sigma_grid(self):
        return _log_grid(self.sigma_min, self.sigma_max, self.sigma_points)

    @property
    def s_grid(self):
        return _log_grid(self.s_min, self.s_max, self.s_points)


def _log_grid(lo, hi, n):
    if n == 1:
        return np.array([lo])
    g = np.logspace(math.log10(lo), math.log10(hi), n)
    g[0], g[-1] = lo, hi
    return g


_TUPLE_KEYS = {"phases", "fem_sigmas"}


def parse_config_text(text, base=None):
    """Parse ``key = value`` lines (``#`` starts a comment)."""
    cfg = base or SweepConfig()
    types = {f.name: f.type for f in fields(SweepConfig)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _TUPLE_KEYS:
                items = [v for v in val.replace(",", " ").split() if v]
                updates[key] = tuple(float(v) for v in items)
            elif types[key] in ("int", int):
                updates[key] = int(val)
            elif types[key] in ("float", float):
                updates[key] = float(val)
            else:
                updates[key] = val
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from exc
    return replace(cfg, **updates)


def load_config(path=None, **overrides):
    cfg = SweepConfig()
    if path:
        with open(path, encoding="utf-8") as fh:
            cfg = parse_config_text(fh.read(), cfg)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **overrides).validate()


# --- reports ----------------------------------------------------------------------

ROW_COLUMNS = ("check", "geometry", "variant", "sigma", "re_s", "im_s", "k",
               "lhs", "rhs", "value", "asserted", "pass")


@dataclass
class Row:
    check: str
    geometry: str = ""
    variant: str = ""
    sigma: float = math.nan
    re_s: float = math.nan
    im_s: float = math.nan
    k: int = -1
    lhs: float = math.nan
    rhs: float = math.nan
    value: float = math.nan
    asserted: bool = True
    passed: bool = True


@dataclass
class Constant:
    name: str
    geometry: str
    value: float
    grid: str
    note: str = ""


@dataclass
class SweepReport:
    name: str
    rows: list = field(default_factory=list)
    constants: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def check_le(self, check, lhs, rhs, rel_tol=REL_TOL, **params):
        """Assert ``lhs <= rhs`` up to a relative rounding tolerance."""
        lhs, rhs = float(lhs), float(rhs)
        ok = bool(np.isfinite(lhs) and np.isfinite(rhs) and lhs <= rhs + rel_tol * abs(rhs))
        value = lhs / rhs if rhs != 0 else math.inf
        self.rows.append(Row(check, lhs=lhs, rhs=rhs, value=value, passed=ok, **params))
        return ok

    def check_true(self, check, ok, value=math.nan, **params):
        self.rows.append(Row(check, value=float(value), passed=bool(ok), **params))
        return bool(ok)

    def record(self, check, value, lhs=math.nan, rhs=math.nan, finite=True, **params):
        """Record a measured quantity; only finiteness/positivity is asserted."""
        value = float(value)
        ok = bool(np.isfinite(value) and value > 0) if finite else True
        self.rows.append(Row(check, lhs=float(lhs), rhs=float(rhs), value=value,
                             asserted=finite, passed=ok, **params))
        return value

    def derive_constant(self, name, check, grid, geometry=None, reduce="max", transform=None,
                        note="", column="value"):
        vals = [getattr(r, column) for r in self.rows
                if r.check == check and (geometry is None or r.geometry == geometry)]
        if not vals:
            return math.nan
        v = max(vals) if reduce == "max" else min(vals)
        if transform is not None:
            v = transform(v)
        self.constants.append(Constant(name, geometry or "", float(v), grid, note))
        return v

    @property
    def violations(self):
        return [r for r in self.rows if r.asserted and not r.passed]

    def worst_margin(self):
        m = [(r.rhs - r.lhs) / abs(r.rhs) for r in self.rows
             if r.asserted and np.isfinite(r.lhs) and np.isfinite(r.rhs) and r.rhs != 0]
        return min(m) if m else math.nan

    def summary(self):
        return {"experiment": self.name, "rows": len(self.rows),
                "violations": len(self.violations), "worst_margin": self.worst_margin(),
                "constants": {f"{c.name}[{c.geometry}]": c.value for c in self.constants}}

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ROW_COLUMNS)
            for r in self.rows:
                w.writerow([r.check, r.geometry, r.variant, _fmt(r.sigma), _fmt(r.re_s),
                            _fmt(r.im_s), r.k if r.k >= 0 else "", _fmt(r.lhs), _fmt(r.rhs),
                            _fmt(r.value), int(r.asserted), int(r.passed)])


def _fmt(x):
    if isinstance(x, float) and math.isnan(x):
        return ""
    return f"{x:.17g}"


CONSTANT_COLUMNS = ("experiment", "name", "geometry", "value", "grid", "note")


def write_constants(path, report):
    """Merge this report's constants into ``constants.csv`` (one row per
    experiment/name/geometry, sorted)."""
    rows = {}
    if os.path.exists(path):
        with open(path, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                rows[(rec["experiment"], rec["name"], rec["geometry"])] = rec
    rows = {k: v for k, v in rows.items() if k[0] != report.name}
    for c in report.constants:
        rows[(report.name, c.name, c.geometry)] = {
            "experiment": report.name, "name": c.name, "geometry": c.geometry,
            "value": _fmt(c.value), "grid": c.grid, "note": c.note}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CONSTANT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for key in sorted(rows):
            w.writerow(rows[key])


def _grid_label(cfg):
    return (f"sigma in [{cfg.sigma_min:g}, {cfg.sigma_max:g}] x {cfg.sigma_points}, "
            f"modes <= {cfg.kmax}")


# --- shared weight tables ---------------------------------------------------------

def _gd_weights(kind, kmax, tau):
    return gd_profile(kind, kmax, tau).weights


def _profile_table(geom, kmax, sigmas, variant="standard"):
    return np.array([extension_weights(geom, kmax, s, variant) for s in sigmas])


# --- selftest ------------------------------------------------------------------------

def selftest_checks(cfg, report=None):
    rep = report or SweepReport("selftest")
    rng = np.random.default_rng(cfg.seed)
    # Wronskian on random points
    ks = rng.integers(0, 65, 1000)
    mags = 10 ** rng.uniform(-3, 3, 1000)
    phs = rng.uniform(-1.5, 1.5, 1000)
    worst = max(sf.scaled_wronskian_residual(int(k), m * np.exp(1j * p))
                for k, m, p in zip(ks, mags, phs))
    rep.check_le("wronskian_residual", worst, 1e-11, rel_tol=0.0)
    # production ratio path against scaled values computed independently
    kk = 32
    z = 10 ** rng.uniform(-2, 3, 200) * np.exp(1j * rng.uniform(-1.5, 1.5, 200))
    from scipy import special as sp
    ref = sp.ive(np.arange(1, kk + 2)[:, None], z[None, :]) / sp.ive(np.arange(kk + 1)[:, None], z[None, :])
    err = np.max(np.abs(sf.i_ratios(kk, z) - ref) / np.abs(ref))
    rep.check_le("i_ratio_recurrence", err, 1e-10, rel_tol=0.0)
    # both ratio methods agree across the switchover radius
    rad = sf._TUNING["recurrence_radius"]
    zz = rad * np.exp(1j * np.linspace(-1.5, 1.5, 31))
    a = sf._i_ratios_backward(sf.MAX_ORDER, zz)
    b = sf._i_ratios_direct(sf.MAX_ORDER, zz)
    rep.check_le("switchover_agreement", float(np.max(np.abs(a - b) / np.abs(b))), 1e-10, rel_tol=0.0)
    # variational energy equals the DtN value
    for sigma in np.logspace(-3, 3, 7):
        e_i = field_energies_disk(16, sigma)
        e_e = field_energies_exterior_disk(16, sigma)
        d_i = TWO_PI * dtn_disk_modes(16, sigma)
        d_e = TWO_PI * dtn_exterior_disk_modes(16, sigma)
        rep.check_le("energy_vs_dtn_interior", float(np.max(np.abs(e_i - d_i) / d_i)), 1e-8,
                     rel_tol=0.0, sigma=sigma, geometry="disk")
        rep.check_le("energy_vs_dtn_exterior", float(np.max(np.abs(e_e - d_e) / d_e)), 1e-8,
                     rel_tol=0.0, sigma=sigma, geometry="disk_exterior")
    # Gagliardo quadrature against eigenvalues
    N = 512
    theta = TWO_PI * np.arange(N) / N
    for k in range(1, 17):
        q = gagliardo_circle(np.exp(1j * k * theta))
        rep.check_le("gagliardo_mode", abs(q / (4 * math.pi ** 2 * k) - 1), 1e-8, rel_tol=0.0, k=k)
    for _ in range(20):
        c = rng.normal(size=33) + 1j * rng.normal(size=33)
        g = FourierTrace(c)
        q = gagliardo_circle(g.evaluate(theta))
        exact = float(np.sum(4 * math.pi ** 2 * np.abs(g.modes) * np.abs(c) ** 2))
        rep.check_le("gagliardo_random", abs(q / exact - 1), 1e-8, rel_tol=0.0)
    return rep


def cmd_selftest(cfg, inject_fault=False):
    if inject_fault:
        with sf.corrupted_tuning(recurrence_radius=1e7, growth=0.0, start_pad=2):
            return selftest_checks(cfg)
    return selftest_checks(cfg)


# --- characterisation against the intrinsic norm ---------------------------------------

EXTERIOR_DISK_SIGMAS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


def cmd_characterize(cfg):
    rep = SweepReport("characterize")
    sig = cfg.sigma_grid
    K = cfg.kmax
    ann = Geometry("annulus", cfg.rho)
    cases = [
        ("disk", Geometry("disk"), "standard", "circle"),
        (ann.label, ann, "standard", "circle"),
        ("ball", Geometry("ball"), "standard", "sphere"),
    ]
    for name, geom, variant, kind in cases:
        for s in sig:
            h = extension_weights(geom, K, s, variant)
            gd = _gd_weights(kind, K, s)
            gd_hi = _gd_weights(kind, K, max(1.0, s))
            for k in range(K + 1):
                rep.record("intrinsic_lower", math.sqrt(gd[k] / h[k]), geometry=name, sigma=s, k=k)
                rep.record("intrinsic_upper", math.sqrt(h[k] / gd_hi[k]), geometry=name, sigma=s, k=k)
        rep.derive_constant("C_rel_lower", "intrinsic_lower", _grid_label(cfg), name,
                            note="max GD(sigma)/HD(sigma)")
        rep.derive_constant("C_rel_upper", "intrinsic_upper", _grid_label(cfg), name,
                            note="max HD(sigma)/GD(max(1,sigma))")
    # alternative norm on the annulus, GD(max(1, sigma)) on both sides
    for s in sig:
        h = extension_weights(ann, K, s, "alternative")
        gd_hi = _gd_weights("circle", K, max(1.0, s))
        for k in range(K + 1):
            rep.record("intrinsic_alt", math.sqrt(h[k] / gd_hi[k]), geometry=ann.label,
                       variant="alternative", sigma=s, k=k)
    rep.derive_constant("C_rel_alt_upper", "intrinsic_alt", _grid_label(cfg), ann.label)
    rep.derive_constant("C_rel_alt_lower", "intrinsic_alt", _grid_label(cfg), ann.label,
                        reduce="min", transform=lambda v: 1.0 / v)
    # bounded disk: HD(sigma) ~ GD(sigma) uniformly
    for s in sig:
        h = TWO_PI * dtn_disk_modes(K, s)
        gd = _gd_weights("circle", K, s)
        for k in range(K + 1):
            rep.record("char_disk", h[k] / gd[k], geometry="disk", sigma=s, k=k)
    rep.derive_constant("char_disk_sup", "char_disk", _grid_label(cfg), "disk",
                        note="weight ratio h_k/GD_k")
    rep.derive_constant("char_disk_inf", "char_disk", _grid_label(cfg), "disk", reduce="min")
    # exterior ball: HD(sigma) ~ GD(max(1, sigma))
    for s in sig:
        h = dtn_exterior_ball_modes(K, s)
        gd_hi = _gd_weights("sphere", K, max(1.0, s))
        for k in range(K + 1):
            rep.record("char_ball_exterior", h[k] / gd_hi[k], geometry="ball_exterior", sigma=s, k=k)
        exact = (1.0 + s) / max(1.0, s)
        rep.check_le("ball_exterior_l0_identity", abs(h[0] / gd_hi[0] - exact), 1e-10 * exact,
                     rel_tol=0.0, geometry="ball_exterior", sigma=s, k=0)
        rep.check_true("ball_exterior_l0_range", 1.0 <= exact <= 2.0, exact,
                       geometry="ball_exterior", sigma=s, k=0)
    rep.derive_constant("char_ball_ext_sup", "char_ball_exterior", _grid_label(cfg), "ball_exterior")
    rep.derive_constant("char_ball_ext_inf", "char_ball_exterior", _grid_label(cfg), "ball_exterior",
                        reduce="min")
    # two-dimensional exterior disk: the zero mode degenerates as sigma -> 0
    vals = [dtn_exterior_disk(0, s) for s in EXTERIOR_DISK_SIGMAS]
    for s, v in zip(EXTERIOR_DISK_SIGMAS, vals):
        rep.record("exterior_disk_k0", v, geometry="disk_exterior", sigma=s, k=0)
    for (s0, v0), (s1, v1) in zip(zip(EXTERIOR_DISK_SIGMAS, vals), zip(EXTERIOR_DISK_SIGMAS[1:], vals[1:])):
        rep.check_le("exterior_disk_k0_decreasing", v1, v0, rel_tol=0.0, geometry="disk_exterior",
                     sigma=s1, k=0)
    rep.check_le("exterior_disk_k0_halving", vals[-1], 0.5 * vals[0], rel_tol=0.0,
                 geometry="disk_exterior", sigma=EXTERIOR_DISK_SIGMAS[-1], k=0)
    return rep


# --- scaling in the weight --------------------------------------------------------------

def cmd_scaling(cfg):
    rep = SweepReport("scaling")
    sig = cfg.sigma_grid
    K = cfg.kmax
    ann = Geometry("annulus", cfg.rho)
    bounded = [("disk", Geometry("disk"), "standard"), (ann.label, ann, "standard"),
               (ann.label, ann, "alternative")]
    for name, geom, variant in bounded:
        h1 = extension_weights(geom, K, 1.0, variant)
        for s in sig:
            h = extension_weights(geom, K, s, variant)
            low = min(1.0, s)
            for k in range(K + 1):
                p = dict(geometry=name, variant=variant, sigma=s, k=k)
                rep.check_le("scaling_lower", low ** 2 * h1[k], h[k], **p)
                rep.check_le("scaling_upper_trivial", h[k], max(1.0, s) ** 2 * h1[k], **p)
                if s >= 1.0:
                    rep.record("scaling_sqrt", h[k] / (s * h1[k]), **p)
                if s == 1.0:
                    rep.check_le("scaling_identity_at_one", abs(h[k] - h1[k]), 1e-12 * h1[k],
                                 rel_tol=0.0, **p)
        rep.derive_constant("C_sc", "scaling_sqrt", _grid_label(cfg), name, transform=math.sqrt,
                            note=f"{variant}: h(sigma) <= C^2 sigma h(1) for sigma >= 1")
    # weight-free lower scaling: exterior ball and alternative annulus
    for name, geom, variant, kind in [("ball_exterior", Geometry("ball_exterior"), "standard", "sphere"),
                                      (ann.label, ann, "alternative", "circle")]:
        h1 = extension_weights(geom, K, 1.0, variant)
        for s in sig:
            h = extension_weights(geom, K, s, variant)
            for k in range(K + 1):
                rep.record("scaling_reverse", h1[k] / h[k], geometry=name, variant=variant, sigma=s, k=k)
        rep.derive_constant("C_sc_reverse", "scaling_reverse", _grid_label(cfg), name,
                            transform=math.sqrt, note=f"{variant}: h(1) <= C^2 h(sigma)")
    return rep


# --- standard versus alternative norm ---------------------------------------------------

def cmd_compare(cfg):
    rep = SweepReport("compare")
    sig = cfg.sigma_grid
    K = cfg.kmax
    ann = Geometry("annulus", cfg.rho)
    name = ann.label
    for s in sig:
        std = annulus_modes(K, s, cfg.rho, "standard")
        alt = annulus_modes(K, s, cfg.rho, "alternative")
        std_hi = annulus_modes(K, max(1.0, s), cfg.rho, "standard")
        high = max(1.0, 1.0 / s)
        for k in range(K + 1):
            p = dict(geometry=name, sigma=s, k=k)
            rep.check_le("std_le_alt", std[k], alt[k], **p)
            rep.record("alt_over_std_hi", math.sqrt(alt[k] / std_hi[k]), **p)
            rep.check_le("std_hi_le_high_std", std_hi[k], high ** 2 * std[k], **p)
    rep.derive_constant("C_cmp", "alt_over_std_hi", _grid_label(cfg), name)
    # sharpness for g = 1 along sigma <= 1
    low_grid = sig[sig <= 1.0]
    ratios = []
    for s in low_grid:
        r = math.sqrt(annulus_modes(0, s, cfg.rho, "standard")[0]
                      / annulus_modes(0, s, cfg.rho, "alternative")[0])
        ratios.append(r)
        rep.record("sharpness_ratio", r / min(1.0, s), lhs=r, sigma=s, k=0, geometry=name)
    rep.derive_constant("C_rev", "sharpness_ratio", f"sigma in [{cfg.sigma_min:g}, 1]", name)
    lin = linear_decay_check(low_grid, np.array(ratios))
    if lin is not None:
        rep.check_le("sharpness_linear_deviation", lin["max_rel_dev"], 0.2, rel_tol=0.0,
                     geometry=name)
        rep.notes.append(f"linear fit slope {lin['slope']:.6g} over sigma <= 0.1")
    return rep


def linear_decay_check(sigmas, ratios, cutoff=0.1):
    """Least-squares fit ``ratio ~ c sigma`` on ``sigma <= cutoff``; returns the
    slope and the largest relative deviation from the fit."""
    sigmas = np.asarray(sigmas)
    ratios = np.asarray(ratios)
    m = sigmas <= cutoff
    if m.sum() < 2:
        return None
    x, y = sigmas[m], ratios[m]
    # fit in relative terms so every decade counts equally
    c = float(np.sum(y / x) / m.sum())
    dev = float(np.max(np.abs(y / (c * x) - 1.0)))
    return {"slope": c, "max_rel_dev": dev}


# --- different extension sets -------------------------------------------------------------

def cmd_extension_sets(cfg):
    rep = SweepReport("extension-sets")
    sig = cfg.sigma_grid
    K = cfg.kmax
    ann = Geometry("annulus", cfg.rho)
    disk, ext = Geometry("disk"), Geometry("disk_exterior")
    planar = {"disk": disk, ann.label: ann, "disk_exterior": ext}

    def table(geom, variant, shift=False):
        return np.array([extension_weights(geom, K, max(1.0, s) if shift else s, variant) for s in sig])

    std = {n: table(g, "standard") for n, g in planar.items()}
    alt = {n: table(g, "alternative") for n, g in planar.items()}
    std_hi = {n: table(g, "standard", shift=True) for n, g in planar.items()}

    def ratio_rows(check, num, den, label):
        for i, s in enumerate(sig):
            for k in range(K + 1):
                rep.record(check, math.sqrt(num[i, k] / den[i, k]), geometry=label, sigma=s, k=k)
        rep.derive_constant(f"C_{check}", check, _grid_label(cfg), label)

    for wt in planar:
        for om in planar:
            label = f"{wt}|{om}"
            ratio_rows("general", alt[wt], std_hi[om], label)
            for i, s in enumerate(sig):
                high = max(1.0, 1.0 / s)
                for k in range(K + 1):
                    rep.check_le("general_shift", std_hi[om][i, k], high ** 2 * std[om][i, k],
                                 geometry=label, sigma=s, k=k)
    # (i) connected Omega, bounded tilde-omega
    for wt in ("disk", ann.label):
        for om in planar:
            ratio_rows("item_i", std[wt], std[om], f"{wt}|{om}")
    # (ii) exterior Omega in three dimensions
    ball = _profile_table(Geometry("ball"), K, sig)
    ball_ext = _profile_table(Geometry("ball_exterior"), K, sig)
    ratio_rows("item_ii", ball, ball_ext, "ball|ball_exterior")
    # (iii) Omega connected with a complementary boundary (annulus)
    for wt in planar:
        ratio_rows("item_iii", alt[wt], alt[ann.label], f"{wt}|{ann.label}")
    # two-dimensional analogue of (ii), reported only
    for i, s in enumerate(sig):
        for k in range(K + 1):
            rep.record("item_ii_planar", math.sqrt(std["disk"][i, k] / std["disk_exterior"][i, k]),
                       finite=False, geometry="disk|disk_exterior", sigma=s, k=k)
    rep.derive_constant("C_eq_planar_exterior", "item_ii_planar", _grid_label(cfg),
                        "disk|disk_exterior", note="reported only")
    return rep


# --- trace inequality --------------------------------------------------------------------

def cmd_trace(cfg):
    rep = SweepReport("trace")
    sig = cfg.sigma_grid
    K = cfg.kmax
    ann = Geometry("annulus", cfg.rho)
    for s in sig:
        hd = TWO_PI * dtn_disk_modes(K, s)
        ha = annulus_modes(K, s, cfg.rho, "standard")
        he = TWO_PI * dtn_exterior_disk_modes(K, s)
        for k in range(K + 1):
            rep.record("trace_ii_b", math.sqrt(hd[k] / ha[k]), geometry=f"disk|{ann.label}", sigma=s, k=k)
            rep.record("interface_exterior", math.sqrt(hd[k] / he[k]), finite=False,
                       geometry="disk|disk_exterior", sigma=s, k=k)
    rep.derive_constant("C_tr", "trace_ii_b", _grid_label(cfg), f"disk|{ann.label}")
    c_ext = rep.derive_constant("C_tr_planar_exterior", "interface_exterior", _grid_label(cfg),
                                "disk|disk_exterior", note="reported only")
    # does the exterior ratio grow towards small sigma?
    k0 = [r.value for r in rep.rows if r.check == "interface_exterior" and r.k == 0]
    rep.notes.append(f"planar exterior ratio at k=0 from sigma_min to sigma_max: "
                     f"{k0[0]:.6g} .. {k0[-1]:.6g}; sup {c_ext:.6g}")
    # item (i): any extension has energy at least the minimal one
    mesh = mesh_disk(max(cfg.h, 0.1))
    for s in (1e-2, 1.0, 10.0):
        traces = [FourierTrace.mode(k) for k in range(3)]
        sols = solve_min_extension(mesh, traces, s)
        other = solve_min_extension(mesh, traces, 3.0 * s)
        r, th = mesh.polar[:, 0], mesh.polar[:, 1]
        for k, (sol, alt_sol, g) in enumerate(zip(sols, other, traces)):
            lower = interpolated_trace_energy(mesh, g, s)
            p = dict(geometry="disk", sigma=s, k=k)
            rep.check_le("trace_i_fem_minimal", lower, sol.energy, **p)
            rep.check_le("trace_i_fem_other_sigma", lower, fem_energy(alt_sol.field, s), **p)
            poly = FemField(mesh, r ** k * np.exp(1j * k * th))
            rep.check_le("trace_i_fem_polynomial", lower, fem_energy(poly, s), **p)
    return rep


# --- boundary integral operators ---------------------------------------------------------

def cmd_bio(cfg):
    rep = SweepReport("bio")
    report, normal_rows, coer = sweep_bounds(cfg.s_grid, cfg.phases, cfg.kmax)
    for r in report.rows:
        re_s, im_s, k, name, lhs, rhs, margin, ok = r
        rep.rows.append(Row(name, geometry="disk", sigma=math.hypot(re_s, im_s), re_s=re_s,
                            im_s=im_s, k=k, lhs=lhs, rhs=rhs, value=lhs / rhs, passed=ok))
    for s, k, ratio in normal_rows:
        p = dict(geometry="disk", sigma=abs(s), re_s=s.real, im_s=s.imag, k=k)
        rep.check_le("normal_derivative", ratio, 1.0, rel_tol=1e-9, **p)
        if s.imag == 0.0:
            rep.check_le("normal_derivative_equality", abs(ratio - 1.0), 1e-9, rel_tol=0.0, **p)
    for s, k, margin in coer:
        p = dict(geometry="disk", sigma=abs(s), re_s=s.real, im_s=s.imag, k=k)
        rep.check_le("coercivity", -margin, 1e-12, rel_tol=0.0, **p)
    grid = (f"|s| in [{cfg.s_min:g}, {cfg.s_max:g}] x {cfg.s_points}, "
            f"{len(cfg.phases)} phases, modes <= {cfg.kmax}")
    for name in BOUND_NAMES:
        rep.derive_constant(f"max_lhs_over_rhs_{name}", name, grid, "disk")
    rep.derive_constant("max_normal_derivative_ratio", "normal_derivative", grid, "disk")
    return rep


# --- finite element validation -----------------------------------------------------------



BOUNDARY_LAYER_SIGMA = 1e3


def fem_levels(h):
    """Three mesh levels ending at ``h``, each halving the previous one."""
    return (min(4 * h, 0.3), 2 * h, h)


def cmd_fem_validate(cfg):
    rep = SweepReport("fem-validate")
    K = cfg.fem_kmax
    traces = [FourierTrace.mode(k) for k in range(K + 1)]
    levels = fem_levels(cfg.h)
    for s in cfg.fem_sigmas:
        exact = TWO_PI * dtn_disk_modes(K, s)
        disc = {}
        for h in levels:
            mesh = mesh_disk(h, sigma=s)
            sols = solve_min_extension(mesh, traces, s)
            for k, (sol, g) in enumerate(zip(sols, traces)):
                gh = interpolated_trace_energy(mesh, g, s)
                p = dict(geometry="disk", sigma=s, k=k, variant=f"h={h:g}")
                rep.check_le("fem_upper_bound", gh, sol.energy, **p)
                rep.record("fem_upper_bound_exact_trace", sol.energy / exact[k], finite=False, **p)
                gap = abs(sol.energy - exact[k]) / exact[k]
                if h == cfg.h:
                    rep.check_le("fem_gap", gap, 0.02, rel_tol=0.0, **p)
                else:
                    rep.record("fem_gap_coarse", gap, finite=False, **p)
                rep.check_le("fem_residual", sol.residual, 1e-9, rel_tol=0.0, **p)
                disc[(h, k)] = (sol.energy - gh) / exact[k]
        for k in range(K + 1):
            for coarse, fine in zip(levels, levels[1:]):
                factor = disc[(coarse, k)] / disc[(fine, k)] if disc[(fine, k)] > 0 else math.inf
                p = dict(geometry="disk", sigma=s, k=k, variant=f"h={coarse:g}->{fine:g}")
                if fine == cfg.h:
                    rep.check_le("fem_contraction", 1.5, factor, rel_tol=0.0, **p)
                else:
                    rep.record("fem_contraction_coarse", factor, finite=False, **p)
    # boundary-layer regime, looser gap budget
    s = BOUNDARY_LAYER_SIGMA
    mesh = mesh_disk(cfg.h, sigma=s)
    exact = TWO_PI * dtn_disk_modes(K, s)
    for k, (sol, g) in enumerate(zip(solve_min_extension(mesh, traces, s), traces)):
        p = dict(geometry="disk", sigma=s, k=k, variant=f"h={cfg.h:g}")
        rep.check_le("fem_upper_bound", interpolated_trace_energy(mesh, g, s), sol.energy, **p)
        rep.check_le("fem_gap_boundary_layer", abs(sol.energy - exact[k]) / exact[k], 0.08,
                     rel_tol=0.0, **p)
    # zero data
    mesh = mesh_disk(cfg.h)
    zero = solve_min_extension(mesh, FourierTrace.zeros(0), 1.0)
    rep.check_le("fem_zero_data", zero.energy, 0.0, rel_tol=0.0, geometry="disk", sigma=1.0)
    # annulus capacity row
    s = 1e-2
    amesh = mesh_annulus(cfg.rho, cfg.h)
    sol = solve_min_extension(amesh, FourierTrace.mode(0), s, "alternative")
    ref = annulus_modes(0, s, cfg.rho, "alternative")[0]
    p = dict(geometry=f"annulus(rho={cfg.rho:g})", variant="alternative", sigma=s, k=0)
    rep.check_le("fem_annulus_gap", abs(sol.energy / ref - 1.0), 0.02, rel_tol=0.0, **p)
    rep.check_le("fem_annulus_upper", ref, sol.energy, **p)
    rep.derive_constant("max_gap_h", "fem_gap", f"h = {cfg.h:g}, k <= {K}", "disk", column="lhs")
    rep.derive_constant("min_contraction", "fem_contraction", f"h = {2 * cfg.h:g} -> {cfg.h:g}",
                        "disk", reduce="min", column="rhs", note="discretisation gap FEM - E(g_h)")
    return rep


# --- CLI ------------------------------------------------------------------------------------

RUNNERS = {
    "characterize": cmd_characterize,
    "scaling": cmd_scaling,
    "compare": cmd_compare,
    "extension-sets": cmd_extension_sets,
    "trace": cmd_trace,
    "bio": cmd_bio,
    "fem-validate": cmd_fem_validate,
}


def build_parser():
    p = argparse.ArgumentParser(prog="helmtrace",
                                description="Weighted trace norm verification sweeps.")
    p.add_argument("command", choices=COMMANDS + ("all",))
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--sigma-min", type=float)
    p.add_argument("--sigma-max", type=float)
    p.add_argument("--sigma-points", type=int)
    p.add_argument("--kmax", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--out", help="output directory")
    p.add_argument("--inject-fault", action="store_true",
                   help="selftest only: corrupt the recurrence tuning constants")
    return p


def run(command, cfg, inject_fault=False, stream=None):
    stream = stream or sys.stdout
    if command == "selftest":
        rep = cmd_selftest(cfg, inject_fault=inject_fault)
    else:
        rep = RUNNERS[command](cfg)
    os.makedirs(cfg.out, exist_ok=True)
    rep.write_csv(os.path.join(cfg.out, f"{command}.csv"))
    write_constants(os.path.join(cfg.out, "constants.csv"), rep)
    for v in rep.violations:
        stream.write(f"VIOLATION {command}: {v.check} geometry={v.geometry} sigma={v.sigma:g} "
                     f"k={v.k} lhs={v.lhs:.6g} rhs={v.rhs:.6g} value={v.value:.6g}\n")
    return rep


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, sigma_min=args.sigma_min, sigma_max=args.sigma_max,
                          sigma_points=args.sigma_points, kmax=args.kmax, h=args.h,
                          rho=args.rho, out=args.out)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    commands = COMMANDS if args.command == "all" else (args.command,)
    failed = False
    for command in commands:
        t0 = time.perf_counter()
        rep = run(command, cfg, inject_fault=args.inject_fault)
        summ = rep.summary()
        status = "FAIL" if summ["violations"] else "ok"
        print(f"{command}: {status}  rows={summ['rows']} violations={summ['violations']} "
              f"worst_margin={summ['worst_margin']:.3g} ({time.perf_counter() - t0:.1f}s)")
        for key, val in summ["constants"].items():
            print(f"  {key} = {val:.6g}")
        for note in rep.notes:
            print(f"  note: {note}")
        failed |= bool(summ["violations"])
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
