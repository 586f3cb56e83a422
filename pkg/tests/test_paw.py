import numpy as np
import pytest

from matchkit.adversary import run_adversary_R
from matchkit.core import ArrivalEvent, GraphInstance, RunError
from matchkit.numerics import BALANCE_RATIO, PenaltyParams, c_paw, g_c_integral, g_r_integral, r_paw
from matchkit.offline import NoiseModel, gen_er, gen_weights, generate_advice
from matchkit.paw import PawPolicy, PawState, paw_certify, paw_run, paw_step, waterfill

from oracles import random_instance


def test_hand_trace_push_then_waterfill():
    g = GraphInstance(2, (1.0, 1.0), (ArrivalEvent((0, 1), {0: 1.0}),))
    res = paw_run(g, 0.6)
    assert np.allclose(res.allocation.rows[0][1], [0.6, 0.4], atol=1e-12)
    assert np.allclose(res.allocation.levels, [0.6, 0.4], atol=1e-12)


def test_saturated_neighbourhood_gets_nothing():
    state = PawState(0.5, np.ones(3))
    x = paw_step(state, [0, 1, 2], {})
    assert np.all(x == 0.0)


def _plain_waterfilling(g):
    d = np.zeros(g.n_offline)
    value = 0.0
    for ev in g.arrivals:
        nb = np.array(ev.neighborhood, dtype=int)
        if nb.size == 0:
            continue
        # bisection on the common level, independent of the sorted closed form
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.maximum(mid - d[nb], 0.0).sum() <= 1.0:
                lo = mid
            else:
                hi = mid
        z = np.maximum(lo - d[nb], 0.0)
        d[nb] += z
        value += z.sum()
    return d, value


def test_lambda_zero_and_empty_advice_are_waterfilling():
    rng = np.random.default_rng(0)
    for i in range(50):
        g = random_instance(rng, 6, 8, 0.5, advice="integral" if i % 2 else "none")
        lam = 0.0 if i % 2 else 0.7
        res = paw_run(g, lam)
        d, value = _plain_waterfilling(g)
        assert np.allclose(res.allocation.levels, d, atol=1e-9)
        assert res.value == pytest.approx(value, abs=1e-9)


def test_waterfill_common_level():
    rng = np.random.default_rng(1)
    for _ in range(500):
        d = rng.random(int(rng.integers(1, 8)))
        amount = float(rng.random())
        z, level = waterfill(d, amount)
        got = z > 0
        assert z.sum() == pytest.approx(min(amount, np.maximum(1.0 - d, 0).sum()), abs=1e-12)
        assert np.allclose(d[got] + z[got], level, atol=1e-12)
        assert np.all(d[~got] >= level - 1e-12)


def test_greedy_and_dual_mass_conservation():
    rng = np.random.default_rng(2)
    for _ in range(30):
        g = random_instance(rng, 6, 9, 0.5, advice="integral")
        policy = PawPolicy(0.45)
        policy.start(g.n_offline, None)
        st = policy.state
        for ev in g.arrivals:
            nb = np.array(ev.neighborhood, dtype=int)
            room = np.maximum(1.0 - st.d[nb], 0.0).sum() if nb.size else 0.0
            ar, ac = st.alpha_r.sum(), st.alpha_c.sum()
            x = policy.step(nb, ev.advice)
            assert x.sum() == pytest.approx(min(1.0, room), abs=1e-12)
            assert st.alpha_r.sum() - ar + st.beta_r[-1] == pytest.approx(x.sum(), abs=1e-12)
            assert st.alpha_c.sum() - ac + st.beta_c[-1] == pytest.approx(x.sum(), abs=1e-12)


def test_slab_integrals_are_additive():
    p = PenaltyParams(0.4)
    for g_int in (g_r_integral, g_c_integral):
        whole = g_int(0.1, 0.9, p)
        parts = g_int(0.1, 0.4, p) + g_int(0.4, 0.9, p)
        assert whole == pytest.approx(parts, abs=1e-14)


def test_certificates_on_random_instances():
    rng = np.random.default_rng(3)
    lams = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    for i in range(200):
        g = random_instance(rng, 6, 8, 0.5, advice="integral")
        lam = lams[i % len(lams)]
        res = paw_run(g, lam)
        rep = paw_certify(res, g, lam)
        assert rep.passed, rep.as_dict()
        assert res.value >= (c_paw(lam) - 1e-4) * g.advice_value() - 1e-12


def test_lambda_zero_robust_certificate():
    g = gen_er(40, 0.15, seed=1)
    assert paw_certify(paw_run(g, 0.0), g, 0.0).edge_min >= BALANCE_RATIO - 1e-6


def test_perfect_advice_lambda_one():
    g = gen_er(100, 0.2, seed=0)
    h = g.with_advice(generate_advice(g, NoiseModel(0.0, 0)))
    res = paw_run(h, 1.0)
    assert res.value == pytest.approx(h.advice_value(), abs=1e-9)
    assert paw_certify(res, h, 1.0).advised_min >= 1.0 - 1e-6


def test_robustness_adversary_half():
    t = run_adversary_R(PawPolicy(0.5), 200)
    assert t.ratio >= r_paw(0.5) - 1e-4


def test_rejects_weighted_and_fractional_advice():
    with pytest.raises(RunError):
        paw_run(gen_weights(gen_er(5, 0.5, seed=0), 0), 0.5)
    g = GraphInstance(2, (1.0, 1.0), (ArrivalEvent((0, 1), {0: 0.5}),))
    with pytest.raises(RunError):
        paw_run(g, 0.5)


def test_certify_requires_both_certificates():
    g = gen_er(5, 0.5, seed=0)
    res = paw_run(g, 0.5)
    res.extra.pop("certificate_c")
    with pytest.raises(ValueError):
        paw_certify(res, g, 0.5)
