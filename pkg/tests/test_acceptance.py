"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.  Everything here runs at desk scale (the full file takes well under
five minutes).
"""

import functools
import itertools
import json
import math

import numpy as np
import pytest
from scipy.optimize import minimize as scipy_minimize

from fraclat import (Boundary, Field, LatticeGeometry, SolverConfig,
                     apply_kernel, batch_certificates, decay_check, energy,
                     fraclap_semigroup, gaussian_bump, halpha_inner,
                     halpha_inner_spectral, interpolation_check, kernel_table,
                     make_model, minimize, mountain_gap, multistart,
                     nehari_residual, nehari_scale, nehari_scale_root, norm,
                     orbit_distance, project_m, shift, torus_kernel)
from fraclat.cli import main as cli_main
from fraclat.nehari import _project_arr
from fraclat.semigroup import build_scheme, gamma_negative
from fraclat.spectral import SpectralConfig
from conftest import random_fields

# regression anchor: converged ground-state energy of the canonical problem
# (d=1, alpha=0.5, h=1, p=4, L=64, periodic), confirmed against the
# independent generic-optimizer oracle below before freezing
CANONICAL_ENERGY = 1.0611784092685688


def criterion(number, name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE {number:2d} {name}: FAIL")
                raise
            print(f"ACCEPTANCE {number:2d} {name}: PASS ({detail})")
        return run
    return wrap


@pytest.fixture(scope="module")
def canonical_model():
    return make_model(d=1, L=64, boundary=Boundary.PERIODIC_WRAP, alpha=0.5, p=4.0)


@pytest.fixture(scope="module")
def canonical_solve(canonical_model):
    w0 = gaussian_bump(canonical_model.geom, width=4.0)
    return w0, minimize(canonical_model, w0)


@criterion(1, "stencil exactness")
def test_criterion_1_stencil_exactness():
    worst = 0.0
    for d in (1, 2):
        kernel = kernel_table(1.0, d, 3, SpectralConfig(M=256), doubling_check=False)
        for offset in np.ndindex(*kernel.values.shape):
            z = tuple(int(c) - kernel.R for c in offset)
            expected = 0.0
            if all(c == 0 for c in z):
                expected = 2.0 * d
            elif sum(abs(c) for c in z) == 1:
                expected = -1.0
            worst = max(worst, abs(kernel.values[offset] - expected))
    assert worst <= 1e-12
    return f"max err {worst:.2e}"


@criterion(2, "half-Laplacian closed form")
def test_criterion_2_half_laplacian():
    kernel = kernel_table(0.5, 1, 20, SpectralConfig(M=8192), doubling_check=False)
    worst = abs(kernel.value_at((0,)) - 4.0 / math.pi)
    for x in range(1, 21):
        closed = -4.0 / (math.pi * (4.0 * x * x - 1.0))
        worst = max(worst, abs(kernel.value_at((x,)) - closed),
                    abs(kernel.value_at((-x,)) - closed))
    assert worst <= 1e-6
    return f"max err {worst:.2e}"


@criterion(3, "definition equivalence (multiplier vs semigroup)")
def test_criterion_3_definition_equivalence():
    geom = LatticeGeometry(1, 16)
    worst_field = 0.0
    worst_scalar = 0.0
    lambdas = np.linspace(0.2, 4.0, 20)
    for alpha in (0.25, 0.5, 0.75):
        kernel = kernel_table(alpha, 1, 32, SpectralConfig(M=8192), doubling_check=False)
        probes = [Field.delta(geom)] + random_fields(geom, 10, seed=300)
        for u in probes:
            a = apply_kernel(u, kernel)
            b = fraclap_semigroup(u, alpha)
            rel = float(np.max(np.abs(a.values - b.values)) / np.max(np.abs(u.values)))
            worst_field = max(worst_field, rel)
        scheme = build_scheme(alpha)
        g = gamma_negative(alpha)
        near = np.expm1(-np.outer(lambdas, scheme.t_near)) @ scheme.w_near
        tail = np.exp(-np.outer(lambdas, scheme.t_tail)) @ scheme.w_tail
        approx = (near + tail + scheme.c_const) / g
        worst_scalar = max(worst_scalar, float(np.max(np.abs(approx - lambdas**alpha) / lambdas**alpha)))
    assert worst_field <= 1e-4
    assert worst_scalar <= 1e-6
    return f"field rel {worst_field:.2e}, scalar identity {worst_scalar:.2e}"


@criterion(4, "Plancherel and self-adjointness")
def test_criterion_4_plancherel():
    geom = LatticeGeometry(1, 16, Boundary.PERIODIC_WRAP)
    kernel = torus_kernel(0.5, geom)
    fields = random_fields(geom, 100, seed=400)
    worst_forms = 0.0
    worst_sym = 0.0
    worst_bound = -math.inf
    bound = 4.0**0.5
    for i, u in enumerate(fields):
        v = fields[(i + 1) % len(fields)]
        kernel_form = halpha_inner(u, v, kernel, 1.0)
        spectral_form = halpha_inner_spectral(u, v, 0.5, 1.0)
        worst_forms = max(worst_forms, abs(kernel_form - spectral_form))
        worst_sym = max(worst_sym, abs(kernel_form - halpha_inner(v, u, kernel, 1.0)))
        semi = halpha_inner_spectral(u, u, 0.5, 0.0)
        worst_bound = max(worst_bound, semi - bound * norm(u, 2) ** 2)
    assert worst_forms <= 1e-8
    assert worst_sym <= 1e-12
    assert worst_bound <= 1e-10
    return f"forms {worst_forms:.2e}, symmetry {worst_sym:.2e}, bound slack {worst_bound:.2e}"


@criterion(5, "interpolation inequality")
def test_criterion_5_interpolation():
    geom = LatticeGeometry(2, 6, Boundary.PERIODIC_WRAP)
    worst = -math.inf
    for u in random_fields(geom, 100, seed=500):
        for q in (3.0, 4.0, 6.0):
            lhs, rhs = interpolation_check(u, q)
            worst = max(worst, (lhs - rhs) / rhs)
    assert worst <= 1e-13
    return f"max relative slack {worst:.2e}"


@criterion(6, "Nehari mechanics")
def test_criterion_6_nehari_mechanics(canonical_model):
    m = canonical_model
    worst_scale = 0.0
    worst_res = 0.0
    min_energy = math.inf
    worst_grid = 0.0
    for w in random_fields(m.geom, 100, seed=600):
        closed = nehari_scale(m, w)
        root = nehari_scale_root(m, w)
        worst_scale = max(worst_scale, abs(closed - root) / closed)
        u = project_m(m, w)
        worst_res = max(worst_res, abs(nehari_residual(m, u)))
        e_u = energy(m, u)
        min_energy = min(min_energy, e_u)
        grid_top = max(energy(m, float(s) * w)
                       for s in np.geomspace(closed / 10, 10 * closed, 100))
        worst_grid = max(worst_grid, grid_top - e_u)
    assert worst_scale <= 1e-10
    assert worst_res <= 1e-10
    assert min_energy > 0.0
    assert worst_grid <= 1e-12 * (1 + abs(min_energy))
    return (f"scale err {worst_scale:.2e}, residual {worst_res:.2e}, "
            f"min ray energy {min_energy:.3e}")


@criterion(7, "ground-state solve vs independent oracle")
def test_criterion_7_ground_state(canonical_model, canonical_solve):
    m = canonical_model
    w0, res = canonical_solve
    assert res.iterations <= 5000
    assert res.grad_residual <= 1e-8
    assert abs(res.nehari_residual) <= 1e-10
    assert res.energy == pytest.approx(CANONICAL_ENERGY, rel=1e-9)

    def psi(warr):
        arr, _ = _project_arr(m, warr)
        return m.energy_arr(arr)

    def psi_grad(warr):
        norm_a = m.norm_alpha_arr(warr)
        hat = warr / norm_a
        quad = m.quad_alpha(hat)
        p_mass = float(np.sum(m.nl.f(hat, m.a_arr) * hat))
        s = float((quad / p_mass) ** (1.0 / (m.nl.p - 2.0)))
        return (s / norm_a) * m.gradient_arr(s * hat)

    oracle = scipy_minimize(psi, w0.flat(), jac=psi_grad, method="L-BFGS-B",
                            options={"maxiter": 5000, "ftol": 1e-16, "gtol": 1e-12})
    rel = abs(oracle.fun - res.energy) / abs(res.energy)
    assert rel <= 1e-6
    ident = abs(res.energy - mountain_gap(m, res.u))
    assert ident <= 1e-8 * (1 + abs(res.energy))
    return (f"{res.iterations} iters, grad {res.grad_residual:.2e}, "
            f"oracle rel diff {rel:.2e}")


@criterion(8, "symmetry, orbits, multistart")
def test_criterion_8_orbits(canonical_model, canonical_solve):
    m = canonical_model
    w0, res = canonical_solve
    res_neg = minimize(m, -1.0 * w0)
    assert abs(res_neg.energy - res.energy) <= 1e-10
    od = orbit_distance(m, res.u, res_neg.u)
    assert od.distance <= 1e-6
    assert od.best_sign == -1

    res_moved = minimize(m, shift(w0, (17,)))
    assert abs(res_moved.energy - res.energy) <= 1e-10
    assert orbit_distance(m, res.u, res_moved.u).distance <= 1e-4

    sset = multistart(m, 40, SolverConfig(seed=7))
    assert len(sset.orbits) >= 2
    certs = batch_certificates(m, sset)
    assert certs["norm_margin"] >= 1.0 - 1e-8
    assert certs["lipschitz_margin"] >= 1.0 - 1e-9
    return (f"sign dist {od.distance:.1e}, {len(sset.orbits)} orbits from 40 starts, "
            f"energies {[round(e, 6) for e in sset.energies]}")


@criterion(9, "kernel decay rate")
def test_criterion_9_decay():
    kernel = kernel_table(0.5, 1, 50, SpectralConfig(M=8192), doubling_check=False)
    table = decay_check(kernel)
    xs = table[:, 0]
    window = table[(xs >= 5) & (xs <= 50), 1]
    lo, hi = float(np.min(window)), float(np.max(window))
    assert lo >= 0.9 / math.pi
    assert hi <= 1.1 / math.pi
    return f"scaled magnitudes in [{lo:.5f}, {hi:.5f}], 1/pi = {1/math.pi:.5f}"


@criterion(10, "seeded determinism")
def test_criterion_10_determinism(tmp_path, monkeypatch):
    cfg = {
        "d": 1, "L": 24, "boundary": "periodic_wrap", "alpha": 0.5,
        "h": {"kind": "constant", "c": 1.0},
        "f": {"kind": "pure_power", "p": 4.0},
    }
    cfg_path = tmp_path / "model.json"
    cfg_path.write_text(json.dumps(cfg))
    payloads = []
    for name in ("a", "b"):
        workdir = tmp_path / name
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        assert cli_main(["multistart", "--config", str(cfg_path), "--starts", "8",
                         "--seed", "7", "--out", "set.json"]) == 0
        payloads.append((workdir / "set.json").read_bytes())
    assert payloads[0] == payloads[1]
    return f"{len(payloads[0])} identical bytes"
