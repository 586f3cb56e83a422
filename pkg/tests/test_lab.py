import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matchkit.baselines import balance_run
from matchkit.core import ArrivalEvent, GraphInstance, RunError
from matchkit.lab import LabState, lab_certify, lab_run, lab_step, solve_level
from matchkit.numerics import BALANCE_RATIO, PenaltyParams, c_lab, f, invert_level_lab, r_lab
from matchkit.offline import NoiseModel, gen_er, gen_ut, gen_weights, generate_advice, opt_matching

from oracles import discrete_lab, random_instance


def _dense(res, g):
    D = np.zeros((g.n_online, g.n_offline))
    for v, (nb, x) in enumerate(res.allocation.rows):
        D[v, nb] = x
    return D


def test_lambda_zero_splits_evenly():
    for advice in ({}, {0: 1.0}, {1: 0.3}):
        g = GraphInstance(2, (1.0, 1.0), (ArrivalEvent((0, 1), advice),))
        x = lab_run(g, 0.0).allocation.rows[0][1]
        assert np.allclose(x, [0.5, 0.5], atol=1e-12)


def test_lambda_one_follows_advice():
    g = GraphInstance(2, (1.0, 1.0), (ArrivalEvent((0, 1), {0: 1.0}),))
    x = lab_run(g, 1.0).allocation.rows[0][1]
    assert np.allclose(x, [1.0, 0.0], atol=1e-12)


def test_single_fresh_neighbour_saturates():
    g = GraphInstance(1, (1.0,), (ArrivalEvent((0,)),))
    x = lab_run(g, 0.3).allocation.rows[0][1]
    assert x[0] == pytest.approx(1.0, abs=1e-12)


def test_advice_overfill_is_a_run_error():
    g = GraphInstance(1, (1.0,), (ArrivalEvent((0,), {0: 0.8}), ArrivalEvent((0,), {0: 0.8})))
    with pytest.raises(RunError):
        lab_run(g, 0.5)


def test_level_solution_matches_bisection_inverse():
    rng = np.random.default_rng(0)
    for _ in range(300):
        k = int(rng.integers(1, 6))
        lam = float(rng.choice([0.0, rng.random(), 1.0]))
        p = PenaltyParams(lam)
        w = rng.uniform(0.5, 3.0, k)
        X0 = rng.random(k) * 0.9
        A = np.where(rng.random(k) < 0.5, rng.random(k), 0.0)
        sol = solve_level(w, A, X0, p)
        room = np.maximum(1.0 - X0, 0.0)
        assert sol.x.sum() == pytest.approx(min(1.0, room.sum()), abs=1e-10)
        assert np.all(sol.x >= -1e-15) and np.all(sol.x <= room + 1e-12)
        if sol.level > 0:
            # on a plateau of the potential the fill is set-valued at the
            # level; the split must lie between the two one-sided inverses
            at = np.array([invert_level_lab(wi, ai, xi, sol.level, p) for wi, ai, xi in zip(w, A, X0)])
            below = np.array([invert_level_lab(wi, ai, xi, sol.level - 1e-9, p)
                              for wi, ai, xi in zip(w, A, X0)])
            assert np.all(sol.x >= at - 1e-9) and np.all(sol.x <= below + 1e-9)
            # every receiving neighbour ends at or below the level; only a
            # vertex that crossed its advice level can land strictly below
            for wi, ai, xi, zi in zip(w, A, X0, sol.x):
                if zi > 1e-12:
                    # X0 + z may round just short of a jump at X = A
                    pot = wi * (1.0 - f(ai, min(1.0, xi + zi + 1e-12), p))
                    assert pot <= sol.level + 1e-9
                    if pot < sol.level - 1e-9:
                        assert xi < ai <= xi + zi + 1e-9


def test_sends_one_unit_or_fills_every_neighbour():
    rng = np.random.default_rng(1)
    for i in range(50):
        g = random_instance(rng, 5, 9, 0.5, weighted=True, advice="fractional")
        res = lab_run(g, [0.2, 0.5, 0.8][i % 3])
        levels = np.zeros(g.n_offline)
        for ev, (nb, x) in zip(g.arrivals, res.allocation.rows):
            if nb.size:
                room = np.maximum(1.0 - levels[nb], 0.0).sum()
                assert x.sum() == pytest.approx(min(1.0, room), abs=1e-9)
            levels[nb] += x


def test_equality_at_every_prefix():
    rng = np.random.default_rng(2)
    for _ in range(20):
        g = random_instance(rng, 6, 8, 0.5, weighted=True, advice="fractional")
        state = LabState.fresh(g.weight_array(), 0.4)
        value = 0.0
        for ev in g.arrivals:
            nb = np.array(ev.neighborhood, dtype=int)
            x = lab_step(state, nb, ev.advice)
            value += float(x @ g.weight_array()[nb]) if nb.size else 0.0
            assert state.alpha.sum() + sum(state.beta) == pytest.approx(value, rel=1e-12, abs=1e-12)
            assert np.all(state.alpha >= -1e-12)


def test_alpha_nondecreasing():
    rng = np.random.default_rng(3)
    g = random_instance(rng, 6, 10, 0.6, weighted=True, advice="fractional")
    state = LabState.fresh(g.weight_array(), 0.6)
    prev = state.alpha.copy()
    for ev in g.arrivals:
        lab_step(state, np.array(ev.neighborhood, dtype=int), ev.advice)
        assert np.all(state.alpha >= prev - 1e-15)
        prev = state.alpha.copy()


def test_lambda_zero_equals_balance():
    rng = np.random.default_rng(4)
    for i in range(100):
        g = random_instance(rng, 6, 7, 0.5, weighted=bool(i % 2), advice="fractional")
        assert np.max(np.abs(_dense(lab_run(g, 0.0), g) - _dense(balance_run(g), g))) <= 1e-9


def test_upper_triangular_balance_ratio():
    g = gen_ut(50)
    opt, _ = opt_matching(g)
    ratio = lab_run(g, 0.0).value / opt
    assert BALANCE_RATIO - 0.01 <= ratio <= BALANCE_RATIO + 0.02


def test_perfect_advice_lambda_one_recovers_advice_value():
    g = gen_er(60, 0.1, seed=3)
    h = g.with_advice(generate_advice(g, NoiseModel(0.0, 1)))
    res = lab_run(h, 1.0)
    assert res.value == pytest.approx(h.advice_value(), abs=1e-9)
    rep = lab_certify(res, h, 1.0)
    assert rep.consistency_min >= 1.0 - 1e-6


def test_certificates_on_er_with_noisy_advice():
    for seed in range(10):
        g = gen_er(30, 0.15, seed=seed)
        if seed % 2:
            g = gen_weights(g, seed)
        h = g.with_advice(generate_advice(g, NoiseModel(0.5, seed)))
        for lam in (0.1, 0.3, 0.5, 0.9):
            res = lab_run(h, lam)
            rep = lab_certify(res, h, lam)
            assert rep.passed, rep.as_dict()
            assert rep.edge_min_final >= rep.edge_min - 1e-12
            assert res.value >= (c_lab(lam) - 1e-4) * h.advice_value()


def test_lambda_zero_edge_bound():
    rng = np.random.default_rng(5)
    for _ in range(20):
        g = random_instance(rng, 6, 8, 0.5, weighted=True, advice="fractional")
        assert lab_certify(lab_run(g, 0.0), g, 0.0).edge_min >= BALANCE_RATIO - 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 0.3, 0.5, 0.9]))
def test_certificate_property(seed, lam):
    rng = np.random.default_rng(seed)
    g = random_instance(rng, 6, 8, 0.5, weighted=True, advice="fractional")
    rep = lab_certify(lab_run(g, lam), g, lam)
    assert rep.relative_gap <= 1e-8
    assert rep.edge_min >= r_lab(lam) - 1e-6
    assert rep.consistency_min >= c_lab(lam) - 1e-6


def test_certify_requires_certificate():
    g = gen_ut(3)
    res = balance_run(g)
    res.certificate = None
    with pytest.raises(ValueError):
        lab_certify(res, g, 0.0)


def test_matches_coarse_discrete_simulation():
    rng = np.random.default_rng(6)
    insts = [random_instance(rng, 4, 4, 0.6, weighted=bool(i % 2), advice="fractional") for i in range(10)]
    lams = [0.2, 0.6] * 5
    sims = discrete_lab(insts, lams, step=1e-4)
    for g, lam, sim in zip(insts, lams, sims):
        assert np.max(np.abs(_dense(lab_run(g, lam), g) - sim)) <= 1e-3
