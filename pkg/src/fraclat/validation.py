"""End-to-end invariant suite behind `fraclat validate`.

Each check evaluates one library invariant on seeded data at desk scale and
reports the measured error against its threshold.  The suite is the
runnable form of the package's correctness contract; the CLI exits nonzero
if any check fails.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import model as md
from . import nehari as nh
from . import semigroup as sg
from . import spectral as sp
from .lattice import (Boundary, Field, LatticeGeometry, interpolation_check,
                      norm, shift)

__all__ = ["CheckResult", "run_checks", "MODULES"]

MODULES = ("lattice", "spectral", "semigroup", "model", "nehari")


@dataclass(frozen=True)
class CheckResult:
    module: str
    name: str
    passed: bool
    measured: float
    threshold: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.module}/{self.name}: measured={self.measured:.3e} threshold={self.threshold:.3e}"


def _random_fields(geom, count, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return [Field(geom, scale * rng.standard_normal(geom.shape)) for _ in range(count)]


def _bounded(module, name, measured, threshold):
    return CheckResult(module, name, measured <= threshold, float(measured), float(threshold))


# ---------------------------------------------------------------------------


def lattice_checks():
    out = []
    geom = LatticeGeometry(2, 6, Boundary.PERIODIC_WRAP)
    fields = _random_fields(geom, 100, seed=11)

    worst = -math.inf
    orders = [2.0, 3.0, 4.0, math.inf]
    for u in fields:
        for s1, s2 in zip(orders, orders[1:]):
            worst = max(worst, norm(u, s2) - norm(u, s1))
    out.append(_bounded("lattice", "lq-monotonicity", worst, 0.0))

    worst = -math.inf
    for u in fields:
        for q in (3.0, 4.0, 6.0):
            lhs, rhs = interpolation_check(u, q)
            worst = max(worst, (lhs - rhs) / max(rhs, 1e-300))
    out.append(_bounded("lattice", "interpolation-inequality", worst, 0.0))

    worst = 0.0
    rng = np.random.default_rng(13)
    for u in fields[:20]:
        y = tuple(int(c) for c in rng.integers(-2 * geom.L, 2 * geom.L + 1, geom.d))
        moved = shift(u, y)
        if sorted(moved.flat()) != sorted(u.flat()):
            worst = math.inf
        back = shift(moved, tuple(-c for c in y))
        if not np.array_equal(back.values, u.values):
            worst = math.inf
    out.append(_bounded("lattice", "periodic-shift-bijection", worst, 0.0))

    u = fields[0]
    rep = abs(norm(u, 2) - norm(u, 2))
    out.append(_bounded("lattice", "norm-determinism", rep, 0.0))
    return out


def spectral_checks(fault: str | None = None):
    out = []
    geom = LatticeGeometry(1, 16, Boundary.PERIODIC_WRAP)
    kernel = sp.kernel_table(0.5, 1, 24, sp.SpectralConfig(M=4096), doubling_check=False)
    if fault == "wrong-sign-kernel":
        kernel = sp.wrong_sign_kernel(kernel)

    try:
        sp.validate_kernel(kernel)
        out.append(_bounded("spectral", "kernel-invariants", 0.0, 0.0))
    except ValueError:
        out.append(CheckResult("spectral", "kernel-invariants", False, math.inf, 0.0))

    rng = np.random.default_rng(17)
    thetas = rng.uniform(-math.pi, math.pi, size=(200, 2))
    vals = sp.symbol(thetas, 0.7)
    bound = (4 * 2) ** 0.7
    worst = max(float(np.max(vals - bound)), float(np.max(-vals)))
    out.append(_bounded("spectral", "symbol-bound", worst, 0.0))

    worst = -math.inf
    for u in _random_fields(geom, 100, seed=19):
        quad = sp.halpha_inner_spectral(u, u, 0.5, 0.0)
        worst = max(worst, quad - (4.0) ** 0.5 * norm(u, 2) ** 2)
    out.append(_bounded("spectral", "seminorm-bound", worst, 1e-10))

    worst = 0.0
    for theta in rng.uniform(-math.pi, math.pi, size=(20, 1)):
        err = abs(sp.kernel_symbol_resum(kernel, theta) - float(sp.symbol(theta, kernel.alpha)))
        worst = max(worst, err)
    out.append(_bounded("spectral", "symbol-resum-tail", worst, 1.1 * kernel.tail_bound + 1e-6))

    tk = sp.torus_kernel(0.5, geom)
    u, v = _random_fields(geom, 2, seed=23)
    sym = abs(sp.halpha_inner(u, v, tk, 1.0) - sp.halpha_inner(v, u, tk, 1.0))
    out.append(_bounded("spectral", "self-adjointness", sym, 1e-12))

    lin_l = sp.apply_kernel(2.5 * u - 1.25 * v, tk)
    lin_r = 2.5 * sp.apply_kernel(u, tk) - 1.25 * sp.apply_kernel(v, tk)
    out.append(_bounded("spectral", "linearity",
                        float(np.max(np.abs(lin_l.values - lin_r.values))), 1e-12))

    worst = -math.inf
    for w in _random_fields(geom, 20, seed=29):
        img = sp.apply_multiplier_fft(w, 0.5)
        worst = max(worst, norm(img, 2) - 4.0**0.5 * norm(w, 2))
    out.append(_bounded("spectral", "multiplier-boundedness", worst, 1e-10))

    diff = sp.apply_kernel(u, tk) - sp.apply_multiplier_fft(u, 0.5)
    out.append(_bounded("spectral", "kernel-vs-multiplier",
                        float(np.max(np.abs(diff.values))), 1e-12))
    return out


def semigroup_checks():
    out = []
    worst = 0.0
    for alpha in (0.25, 0.5, 0.75):
        scheme = sg.build_scheme(alpha)
        worst = max(worst, scheme.scalar_identity_err)
    out.append(_bounded("semigroup", "scalar-identity", worst, 1e-6))

    geom = LatticeGeometry(1, 12, Boundary.ZERO_EXTENDED)
    worst = 0.0
    for alpha in (0.25, 0.5, 0.75):
        kernel = sp.kernel_table(alpha, 1, 24, sp.SpectralConfig(M=8192), doubling_check=False)
        probes = [Field.delta(geom)] + _random_fields(geom, 10, seed=31)
        for u in probes:
            a = sp.apply_kernel(u, kernel)
            b = sg.fraclap_semigroup(u, alpha)
            rel = float(np.max(np.abs(a.values - b.values)) / np.max(np.abs(u.values)))
            worst = max(worst, rel)
    out.append(_bounded("semigroup", "definition-equivalence", worst, 1e-4))

    u = nh.gaussian_bump(geom, width=2.5)
    two = sg.heat_apply(sg.heat_apply(u, 0.35), 0.4)
    one = sg.heat_apply(u, 0.75)
    out.append(_bounded("semigroup", "semigroup-property",
                        float(np.max(np.abs(two.values - one.values))), 1e-8))
    return out


def model_checks():
    out = []
    m = md.make_model(d=1, L=12, boundary=Boundary.ZERO_EXTENDED, alpha=0.5, p=4.0,
                      spectral=sp.SpectralConfig(M=2048))
    rng = np.random.default_rng(37)
    samples = rng.uniform(-3, 3, size=200)
    samples = samples[samples != 0.0]

    growth = np.abs(samples) ** (m.nl.p - 1.0) - (np.abs(samples) + np.abs(samples) ** (m.nl.p - 1.0))
    out.append(_bounded("model", "growth-bound", float(np.max(growth)), 0.0))

    gap = m.nl.f(samples) * samples - 2.0 * m.nl.F(samples)
    expect = (1.0 - 2.0 / m.nl.p) * np.abs(samples) ** m.nl.p
    out.append(_bounded("model", "superquadratic-gap",
                        max(float(np.max(-gap)), float(np.max(np.abs(gap - expect)))), 1e-12))

    pos = np.sort(np.abs(samples))
    ratios = m.nl.f(pos) / pos
    out.append(_bounded("model", "monotone-slope", float(np.max(-np.diff(ratios))), 0.0))

    u = Field(m.geom, rng.standard_normal(m.geom.shape) * 0.5)
    v = Field(m.geom, rng.standard_normal(m.geom.shape))
    g = md.gradient(m, u)
    pair = float(np.sum(g.flat() * v.flat()))
    errs = []
    for eps in (1e-3, 1e-4):
        fd = (md.energy(m, u + eps * v) - md.energy(m, u - eps * v)) / (2 * eps)
        errs.append(abs(fd - pair))
    out.append(_bounded("model", "gradient-fd-consistency", errs[1], 1e-6))
    ratio = errs[0] / max(errs[1], 1e-300)
    out.append(CheckResult("model", "gradient-fd-richardson", 20.0 <= ratio <= 500.0,
                           float(ratio), 100.0))

    h = md.Potential.periodic(np.array([0.8, 1.0, 1.3]))
    mp = md.make_model(d=1, L=13, boundary=Boundary.PERIODIC_WRAP, alpha=0.5, p=4.0, h=h)
    u = Field(mp.geom, np.random.default_rng(41).standard_normal(mp.geom.shape))
    drift = abs(md.energy(mp, shift(u, (3,))) - md.energy(mp, u))
    out.append(_bounded("model", "periodic-energy-invariance", drift, 1e-12))
    return out


def nehari_checks():
    out = []
    m = md.make_model(d=1, L=24, boundary=Boundary.PERIODIC_WRAP, alpha=0.5, p=4.0)
    rays = _random_fields(m.geom, 100, seed=43)

    worst_scale = 0.0
    worst_res = 0.0
    min_energy = math.inf
    for w in rays:
        s_closed = nh.nehari_scale(m, w)
        s_root = nh.nehari_scale_root(m, w)
        worst_scale = max(worst_scale, abs(s_closed - s_root) / s_closed)
        u = nh.project_m(m, w)
        worst_res = max(worst_res, abs(md.nehari_residual(m, u)))
        min_energy = min(min_energy, md.energy(m, u))
    out.append(_bounded("nehari", "scale-closed-vs-root", worst_scale, 1e-10))
    out.append(_bounded("nehari", "projection-residual", worst_res, 1e-10))
    out.append(CheckResult("nehari", "projection-energy-positive", min_energy > 0.0,
                           float(min_energy), 0.0))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sset = nh.multistart(m, 10, nh.SolverConfig(seed=3))
    res = min(sset.runs, key=lambda r: r.energy)
    trace = res.energy_history
    mono = all(b <= a for a, b in zip(trace, trace[1:]))
    out.append(CheckResult("nehari", "descent-monotone-trace", mono, 0.0 if mono else math.inf, 0.0))
    out.append(_bounded("nehari", "solver-grad-residual", res.grad_residual, 1e-8))
    out.append(_bounded("nehari", "solver-nehari-residual", abs(res.nehari_residual), 1e-10))

    g = md.gradient(m, res.u)
    bound = 1e-8 * norm(res.u, 2) * math.sqrt(m.geom.site_count)
    out.append(_bounded("nehari", "pointwise-equation-residual",
                        float(np.max(np.abs(g.values))), bound))

    ident = abs(md.energy(m, res.u) - md.mountain_gap(m, res.u))
    out.append(_bounded("nehari", "critical-energy-identity",
                        ident, 1e-8 * (1.0 + abs(res.energy))))

    certs = nh.batch_certificates(m, sset)
    out.append(CheckResult("nehari", "manifold-norm-floor",
                           certs["norm_margin"] >= 1.0 - 1e-8, float(certs["norm_margin"]), 1.0))
    out.append(CheckResult("nehari", "inverse-map-lipschitz",
                           certs["lipschitz_margin"] >= 1.0 - 1e-9,
                           float(certs["lipschitz_margin"]), 1.0))
    return out


def run_checks(only: str | None = None, fault: str | None = None):
    """Run the invariant suite; returns a list of CheckResult."""
    if only is not None and only not in MODULES:
        raise ValueError(f"unknown module {only!r}; choose from {MODULES}")
    results = []
    if only in (None, "lattice"):
        results += lattice_checks()
    if only in (None, "spectral"):
        results += spectral_checks(fault=fault)
    if only in (None, "semigroup"):
        results += semigroup_checks()
    if only in (None, "model"):
        results += model_checks()
    if only in (None, "nehari"):
        results += nehari_checks()
    return results
