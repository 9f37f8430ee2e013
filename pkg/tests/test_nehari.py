import itertools
import math
import warnings

import numpy as np
import pytest

from fraclat import (Boundary, Field, LatticeGeometry, NonConvergenceError,
                     SolverConfig, batch_certificates, energy, gaussian_bump,
                     gradient, make_model, minimize, mountain_gap, multistart,
                     nehari_residual, nehari_scale, nehari_scale_root, norm,
                     orbit_distance, project_m, shift)
from fraclat.nehari import initial_fields
from fraclat.spectral import SpectralConfig
from conftest import random_fields


@pytest.fixture(scope="module")
def model_alpha1():
    return make_model(d=1, L=8, alpha=1.0, p=4.0, spectral=SpectralConfig(M=256))


@pytest.fixture(scope="module")
def model_torus():
    return make_model(d=1, L=24, boundary=Boundary.PERIODIC_WRAP, alpha=0.5, p=4.0)


@pytest.fixture(scope="module")
def ground_state(model_torus):
    return minimize(model_torus, gaussian_bump(model_torus.geom, width=3.0))


def test_scale_delta_hand_value(model_alpha1):
    d0 = Field.delta(model_alpha1.geom)
    s = nehari_scale(model_alpha1, d0)
    assert s == pytest.approx(math.sqrt(3.0), rel=1e-12)
    u = project_m(model_alpha1, d0)
    assert energy(model_alpha1, u) == pytest.approx(2.25, rel=1e-12)


def test_scale_homogeneity(model_torus):
    w = random_fields(model_torus.geom, 1, seed=3)[0]
    s = nehari_scale(model_torus, w)
    assert nehari_scale(model_torus, 5.0 * w) == pytest.approx(s / 5.0, rel=1e-12)


def test_scale_maximizes_ray_energy(model_torus):
    for w in random_fields(model_torus.geom, 10, seed=5):
        s = nehari_scale(model_torus, w)
        top = energy(model_torus, s * w)
        for scale in np.geomspace(s / 10, 10 * s, 100):
            assert energy(model_torus, float(scale) * w) <= top * (1 + 1e-12)


def test_scale_closed_form_vs_root(model_torus):
    for w in random_fields(model_torus.geom, 100, seed=7):
        closed = nehari_scale(model_torus, w)
        root = nehari_scale_root(model_torus, w)
        assert abs(closed - root) / closed <= 1e-10


def test_scale_zero_field(model_torus):
    with pytest.raises(ValueError):
        nehari_scale(model_torus, Field.zeros(model_torus.geom))
    with pytest.raises(ValueError):
        project_m(model_torus, Field.zeros(model_torus.geom))


def test_projection_residual_and_energy(model_torus):
    for w in random_fields(model_torus.geom, 100, seed=11):
        u = project_m(model_torus, w)
        assert abs(nehari_residual(model_torus, u)) <= 1e-10
        assert energy(model_torus, u) > 0.0


def test_projection_idempotent(model_torus):
    w = random_fields(model_torus.geom, 1, seed=13)[0]
    u = project_m(model_torus, w)
    again = project_m(model_torus, u)
    assert abs(nehari_residual(model_torus, again)) <= 1e-10
    diff = model_torus.norm_alpha_arr(again.flat() - u.flat())
    assert diff <= 1e-8 * model_torus.norm_alpha(u)


def test_projection_scale_and_sign_invariance(model_torus):
    w = random_fields(model_torus.geom, 1, seed=17)[0]
    u = project_m(model_torus, w)
    u_scaled = project_m(model_torus, 7.3 * w)
    assert np.max(np.abs(u_scaled.values - u.values)) <= 1e-10
    u_neg = project_m(model_torus, -1.0 * w)
    assert np.array_equal(u_neg.values, -u.values)


def test_projection_inverse_map(model_torus):
    # m^-1(u) = u / ||u||_alpha recovers the normalized direction
    w = random_fields(model_torus.geom, 1, seed=18)[0]
    hat = (1.0 / model_torus.norm_alpha(w)) * w
    u = project_m(model_torus, w)
    m_inv = u.flat() / model_torus.norm_alpha(u)
    assert model_torus.norm_alpha_arr(m_inv - hat.flat()) <= 1e-12


def test_minimize_converges(ground_state, model_torus):
    res = ground_state
    assert res.grad_residual <= 1e-8
    assert abs(res.nehari_residual) <= 1e-10
    assert res.energy > 0
    assert res.iterations <= 5000
    trace = res.energy_history
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert len(res.s_history) == len(trace)


def test_minimize_certified_energy_matches_direct(ground_state, model_torus):
    assert energy(model_torus, ground_state.u) == pytest.approx(ground_state.energy, abs=1e-12)


def test_minimize_solves_equation_pointwise(ground_state, model_torus):
    g = gradient(model_torus, ground_state.u)
    bound = 1e-8 * norm(ground_state.u, 2) * math.sqrt(model_torus.geom.site_count)
    assert np.max(np.abs(g.values)) <= bound


def test_energy_identity_at_critical_point(ground_state, model_torus):
    gap = mountain_gap(model_torus, ground_state.u)
    assert abs(ground_state.energy - gap) <= 1e-8 * (1 + abs(ground_state.energy))


def test_minimize_sign_equivariant(ground_state, model_torus):
    res_neg = minimize(model_torus, -1.0 * gaussian_bump(model_torus.geom, width=3.0))
    assert abs(res_neg.energy - ground_state.energy) <= 1e-10
    od = orbit_distance(model_torus, ground_state.u, res_neg.u)
    assert od.distance <= 1e-6
    assert od.best_sign == -1


def test_minimize_translation_equivariant(ground_state, model_torus):
    res_moved = minimize(model_torus, shift(gaussian_bump(model_torus.geom, width=3.0), (9,)))
    assert abs(res_moved.energy - ground_state.energy) <= 1e-10
    od = orbit_distance(model_torus, ground_state.u, res_moved.u)
    assert od.distance <= 1e-6


def test_minimize_nonconvergence_carries_best(model_torus):
    with pytest.raises(NonConvergenceError) as excinfo:
        minimize(model_torus, gaussian_bump(model_torus.geom, width=3.0),
                 SolverConfig(max_iter=3))
    res = excinfo.value.result
    assert res is not None
    assert res.energy > 0
    assert abs(nehari_residual(model_torus, res.u)) <= 1e-10


def test_minimize_boundary_mass_warning():
    # fractional tails decay algebraically, so a tiny zero-extended box
    # leaves visible mass on the outer shell
    m = make_model(d=1, L=8, alpha=0.5, p=4.0, spectral=SpectralConfig(M=1024))
    with pytest.warns(RuntimeWarning, match="larger box"):
        res = minimize(m, gaussian_bump(m.geom, width=2.0))
    assert res.boundary_mass > 1e-6


def test_orbit_distance_shift_recovery(model_torus):
    u = random_fields(model_torus.geom, 1, seed=19)[0]
    moved = shift(u, (11,))
    od = orbit_distance(model_torus, u, moved)
    assert od.distance <= 1e-12
    assert od.best_shift == (-11,)
    assert od.best_sign == 1


def test_orbit_distance_sign_recovery(model_torus):
    u = random_fields(model_torus.geom, 1, seed=23)[0]
    od = orbit_distance(model_torus, u, -1.0 * u)
    assert od.distance <= 1e-12
    assert od.best_sign == -1
    od_blind = orbit_distance(model_torus, u, -1.0 * u, sign_aware=False)
    assert od_blind.distance > 0.1


def test_orbit_distance_matches_bruteforce():
    m = make_model(d=1, L=6, boundary=Boundary.PERIODIC_WRAP, alpha=0.5, p=4.0)
    u1, u2 = random_fields(m.geom, 2, seed=29)
    fast = orbit_distance(m, u1, u2)
    denom = max(m.norm_alpha(u1), m.norm_alpha(u2))
    brute = min(
        m.norm_alpha_arr(u1.flat() - sign * shift(u2, (y,)).flat()) / denom
        for y in range(-m.geom.L, m.geom.L + 1)
        for sign in (1, -1)
    )
    assert fast.distance == pytest.approx(brute, rel=1e-12)


def test_orbit_distance_two_bump_separation(model_torus):
    one = gaussian_bump(model_torus.geom, width=2.0)
    two = one + shift(one, (12,))
    od = orbit_distance(model_torus, project_m(model_torus, one), project_m(model_torus, two))
    assert od.distance > 0.1


def test_multistart_single_start(model_torus):
    sset = multistart(model_torus, 1, SolverConfig(seed=1))
    assert len(sset.orbits) == 1
    assert sset.orbits[0].multiplicity == 1


def test_multistart_dedupes_shifted_starts(model_torus):
    base = gaussian_bump(model_torus.geom, width=3.0)
    r1 = minimize(model_torus, base)
    r2 = minimize(model_torus, shift(base, (7,)))
    od = orbit_distance(model_torus, r1.u, r2.u)
    assert od.distance <= 1e-4


def test_multistart_finds_distinct_orbits(model_torus):
    sset = multistart(model_torus, 10, SolverConfig(seed=3))
    assert len(sset.orbits) >= 2
    assert not sset.failures
    assert sset.energies == sorted(sset.energies)
    for a, b in itertools.combinations(sset.orbits, 2):
        assert orbit_distance(model_torus, a.representative, b.representative).distance > sset.dedupe_tol
    assert sum(o.multiplicity for o in sset.orbits) == 10


def test_batch_certificates(model_torus):
    sset = multistart(model_torus, 8, SolverConfig(seed=5))
    certs = batch_certificates(model_torus, sset)
    assert certs["norm_margin"] >= 1.0 - 1e-8
    assert certs["lipschitz_margin"] >= 1.0 - 1e-9
    assert certs["c_batch"] > 0


def test_multistart_reports_failed_starts(model_torus):
    sset = multistart(model_torus, 3, SolverConfig(seed=1, max_iter=1))
    assert not sset.orbits
    assert len(sset.failures) == 3
    assert all("no convergence" in msg for _, msg in sset.failures)


def test_multistart_threaded_matches_serial(model_torus):
    serial = multistart(model_torus, 6, SolverConfig(seed=13))
    threaded = multistart(model_torus, 6, SolverConfig(seed=13), threads=4)
    assert serial.energies == threaded.energies
    for a, b in zip(serial.orbits, threaded.orbits):
        assert np.array_equal(a.representative.values, b.representative.values)
        assert a.multiplicity == b.multiplicity


def test_initial_fields_deterministic(model_torus):
    a = initial_fields(model_torus.geom, 6, seed=9)
    b = initial_fields(model_torus.geom, 6, seed=9)
    for x, y in zip(a, b):
        assert np.array_equal(x.values, y.values)
    styles = initial_fields(model_torus.geom, 5, seed=11)
    odd = styles[1]
    assert np.any(odd.values > 0) and np.any(odd.values < 0)
