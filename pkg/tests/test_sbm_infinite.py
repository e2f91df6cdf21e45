"""Infinite-rate simulators: Trotter scheme and truncated jump process."""

import numpy as np
import pytest

from symbranch import rng as rngmod
from symbranch.config import build_graph
from symbranch.exitlaw import ExitLawParams, atomic_swap_measure, truncate_nu
from symbranch.lattice import SiteGraph, heat_semigroup
from symbranch.sbm_infinite import (BoundaryField, NegativeIntensity,
                                    apply_jump, intensity,
                                    martingale_functional_check,
                                    pdmp_simulate, project_to_boundary,
                                    trotter_simulate, trotter_step)


@pytest.fixture(scope="module")
def ring8():
    return build_graph({"kind": "torus", "d": 1, "L": 8})


def _efield(n, u_at=(), v_at=()):
    u = np.zeros(n)
    v = np.zeros(n)
    for k, val in u_at:
        u[k] = val
    for k, val in v_at:
        v[k] = val
    return BoundaryField(u, v)


def test_boundary_field_validation():
    BoundaryField(np.array([1.0, 0.0]), np.array([0.0, 2.0]))
    with pytest.raises(ValueError):
        BoundaryField(np.array([1.0, 0.5]), np.array([0.0, 2.0]))
    with pytest.raises(ValueError):
        BoundaryField(np.array([-1.0, 0.0]), np.array([0.0, 2.0]))


def test_intensity_worked_example(ring8):
    # ring with rates 1/2: U(0)=2, opposite neighbors V=(4,0) -> rate 1
    state = _efield(8, u_at=[(0, 2.0)], v_at=[(1, 4.0)])
    assert intensity(ring8, state, 0) == pytest.approx(1.0)


def test_intensity_island_and_zero(ring8):
    island = _efield(8, u_at=[(k, 1.0) for k in range(8)])
    assert intensity(ring8, island, 3) == 0.0
    assert intensity(ring8, _efield(8), 5) == 0.0


def test_intensity_vector_and_negative(ring8):
    state = _efield(8, u_at=[(0, 2.0)], v_at=[(1, 4.0)])
    rates = intensity(ring8, state)
    assert rates.shape == (8,)
    assert rates[0] == pytest.approx(1.0)
    off_e = BoundaryField(np.zeros(8), np.zeros(8))
    off_e.u[0] = 1.0  # mutate past validation to emulate an off-E bug
    off_e.v[0] = 1.0
    with pytest.raises(NegativeIntensity):
        intensity(ring8, off_e, 0)


def test_apply_jump_examples(ring8):
    state = _efield(8, u_at=[(2, 3.0)])
    kept = apply_jump(state, 2, swapped=False, factor=2.0)
    assert kept.u[2] == 6.0 and kept.v[2] == 0.0
    swapped = apply_jump(state, 2, swapped=True, factor=0.5)
    assert swapped.u[2] == 0.0 and swapped.v[2] == 1.5
    null = apply_jump(_efield(8), 4, swapped=True, factor=2.0)
    assert null.u[4] == 0.0 and null.v[4] == 0.0


def test_project_to_boundary_logs_mass():
    u = np.array([1.0, 0.2, 0.0])
    v = np.array([0.1, 0.3, 2.0])
    pu, pv, zeroed = project_to_boundary(u.copy(), v.copy())
    assert np.all(pu * pv == 0.0)
    assert np.allclose(pu, [1.0, 0.0, 0.0]) and np.allclose(pv, [0.0, 0.3, 2.0])
    assert zeroed == pytest.approx(0.3)  # min coordinate zeroed per off-E site


def test_trotter_zero_state_fixed(ring8):
    res = trotter_simulate(ring8, 0.3, _efield(8), horizon=0.5, eps=0.1,
                           replicas=4, seed=0)
    assert np.all(res["u"] == 0.0) and np.all(res["v"] == 0.0)


def test_trotter_single_site_frozen():
    g = SiteGraph(rates=np.array([[0.0]]), beta=np.ones(1))
    init = BoundaryField(np.array([2.0]), np.array([0.0]))
    res = trotter_simulate(g, 0.3, init, horizon=1.0, eps=0.1,
                           replicas=8, seed=1)
    assert np.all(res["u"] == 2.0) and np.all(res["v"] == 0.0)


def test_trotter_boundary_constraint_exact(ring8):
    init = _efield(8, u_at=[(0, 1.0), (2, 0.5)], v_at=[(1, 0.8), (5, 0.3)])
    res = trotter_simulate(ring8, 0.3, init, horizon=0.5, eps=0.05,
                           replicas=64, seed=2, times=[0.25, 0.5])
    assert np.max(res["u"] * res["v"]) == 0.0
    assert np.max(res["snapshots_u"] * res["snapshots_v"]) == 0.0
    assert res["effective_horizon"] == pytest.approx(0.5)


def test_trotter_rho_minus_one_flip_probability(ring8):
    # one step from a pure-opinion state: site k swaps axis with probability
    # equal to the heat-mixed opposite fraction at k
    eps = 0.2
    u0 = np.array([1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0])
    init = BoundaryField(u0, 1.0 - u0)
    P = heat_semigroup(ring8, eps)
    mu = u0 @ P.T
    mv = (1.0 - u0) @ P.T
    flip_expected = mv[0] / (mu[0] + mv[0])
    params = ExitLawParams(-1.0)
    n = 20000
    rng = rngmod.stream(3, "t-flip")
    u_rep = np.tile(init.u, (n, 1))
    v_rep = np.tile(init.v, (n, 1))
    nu, nv = trotter_step(ring8, params, u_rep, v_rep, eps, rng)
    flips = float((nv[:, 0] > 0).mean())
    se = np.sqrt(flip_expected * (1 - flip_expected) / n)
    assert abs(flips - flip_expected) < 3 * se
    # magnitudes stay at the heat-mixed sum, which is 1 up to fp roundoff
    assert np.allclose(nu[:, 0] + nv[:, 0], 1.0, atol=1e-12)


def test_pdmp_zero_state_fixed(ring8):
    res = pdmp_simulate(ring8, 0.0, _efield(8), horizon=0.5, eps=0.1,
                        replicas=4, seed=4)
    assert np.all(res["u"] == 0.0) and np.all(res["v"] == 0.0)
    assert np.all(res["n_jumps"] == 0)


def test_pdmp_single_site_frozen():
    g = SiteGraph(rates=np.array([[0.0]]), beta=np.ones(1))
    init = BoundaryField(np.array([0.0]), np.array([3.0]))
    res = pdmp_simulate(g, 0.0, init, horizon=1.0, eps=0.1, replicas=8,
                        seed=5)
    assert np.all(res["v"] == 3.0) and np.all(res["n_jumps"] == 0)


def test_pdmp_boundary_constraint_and_diagnostics(ring8):
    init = _efield(8, u_at=[(0, 1.0), (1, 0.5)], v_at=[(4, 1.0), (5, 0.5)])
    res = pdmp_simulate(ring8, 0.0, init, horizon=0.4, eps=0.15,
                        replicas=48, seed=6)
    assert np.max(res["u"] * res["v"]) == 0.0
    assert res["n_jumps"].sum() > 0
    assert res["zeroed_mass"].max() < 1e-10  # flow leakage is fp-roundoff only
    assert res["measure"].m2 == 1.0


def test_pdmp_compensator_cancellation(ring8):
    # on E the flow keeps the zero coordinate at zero: I(k)*m2*U(k) = AV(k)
    state = _efield(8, u_at=[(0, 2.0), (3, 1.0)], v_at=[(1, 4.0), (6, 0.5)])
    meas = truncate_nu(0.0, 0.1)
    rates = intensity(ring8, state)
    av = state.v @ ring8.rates.T
    on_u = state.u > 0
    assert np.allclose(rates[on_u] * meas.m2 * state.u[on_u], av[on_u],
                       atol=1e-12)


def test_pdmp_rho_minus_one_exactness(ring8):
    u0 = np.array([1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0])
    init = BoundaryField(u0, 1.0 - u0)
    res = pdmp_simulate(ring8, -1.0, init, horizon=0.5,
                        eps=0.1, replicas=64, seed=7,
                        measure=atomic_swap_measure())
    s = res["u"] + res["v"]
    assert np.all(s == 1.0)  # exact unit magnitudes, dyadic arithmetic
    assert np.all(res["u"] * res["v"] == 0.0)
    assert np.all(res["zeroed_mass"] == 0.0)
    assert np.all(res["n_swaps"] == res["n_jumps"])  # every mark swaps


def test_pdmp_event_record(ring8):
    init = _efield(8, u_at=[(0, 1.0)], v_at=[(4, 1.0)])
    res = pdmp_simulate(ring8, 0.0, init, horizon=0.5, eps=0.15, replicas=2,
                        seed=8, record_events=True)
    for ev in res["events"]:
        assert 0 <= ev.site < 8
        assert ev.time <= 0.5
        assert ev.factor > 0


def test_martingale_check_null_cases(ring8):
    init = _efield(8, u_at=[(0, 1.0)], v_at=[(4, 1.0)])
    y_zero = (np.zeros(8), np.zeros(8))
    out = martingale_functional_check(ring8, 0.3, init, y_zero[0], y_zero[1],
                                      horizon=0.3, eps=0.1, replicas=16,
                                      seed=9)
    assert out["mean"] == 0.0
    out0 = martingale_functional_check(ring8, 0.3, init,
                                       np.eye(8)[0] * 0.5, np.eye(8)[2] * 0.8,
                                       horizon=0.0, eps=0.1, replicas=16,
                                       seed=9)
    assert out0["mean"] == 0.0


def test_martingale_check_rejects_overlapping_pair(ring8):
    init = _efield(8, u_at=[(0, 1.0)])
    y1 = np.eye(8)[0]
    y2 = np.eye(8)[0]
    with pytest.raises(ValueError):
        martingale_functional_check(ring8, 0.3, init, y1, y2, horizon=0.2,
                                    eps=0.1, replicas=8, seed=10)
