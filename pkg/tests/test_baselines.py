import numpy as np
import pytest

from matchkit.baselines import (balance_run, balance_split, coinflip_run, follow_advice_run,
                                greedy_run)
from matchkit.core import ArrivalEvent, GraphInstance, validate_fractional_matching
from matchkit.lab import solve_level
from matchkit.numerics import PenaltyParams
from matchkit.offline import gen_ut, opt_matching

from oracles import brute_force_opt, random_instance


def test_single_edge():
    g = GraphInstance(1, (1.0,), (ArrivalEvent((0,)),))
    assert balance_run(g).value == pytest.approx(1.0)


def test_balance_split_matches_level_solver():
    rng = np.random.default_rng(0)
    p = PenaltyParams(0.0)
    for _ in range(500):
        k = int(rng.integers(1, 6))
        w = rng.uniform(0.1, 5.0, k)
        X0 = rng.random(k) * 0.8
        expect = solve_level(w, np.zeros(k), X0, p).x
        assert np.allclose(balance_split(w, X0), expect, atol=1e-9)


def test_upper_triangular_ratio():
    g = gen_ut(200)
    ratio = balance_run(g).value / opt_matching(g)[0]
    assert 0.628 <= ratio <= 0.64


def test_greedy_prefers_heavy_vertex():
    g = GraphInstance(2, (3.0, 1.0), (ArrivalEvent((0, 1)),))
    assert np.allclose(greedy_run(g).allocation.rows[0][1], [1.0, 0.0])


def test_greedy_ties_to_lower_index():
    g = GraphInstance(3, (1.0, 2.0, 2.0), (ArrivalEvent((2, 1, 0)),))
    nb, x = greedy_run(g).allocation.rows[0]
    assert dict(zip(nb.tolist(), x.tolist()))[1] == 1.0


def test_greedy_half_of_opt():
    rng = np.random.default_rng(1)
    for i in range(200):
        g = random_instance(rng, 6, 6, 0.4, weighted=True, advice="none")
        assert greedy_run(g).value >= brute_force_opt(g) / 2 - 1e-9


def test_follow_advice_value():
    rng = np.random.default_rng(2)
    for _ in range(50):
        g = random_instance(rng, 5, 7, 0.5, weighted=True, advice="fractional")
        res = follow_advice_run(g)
        assert res.value == pytest.approx(g.advice_value(), abs=1e-9)


def test_coinflip_endpoints_and_midpoint():
    rng = np.random.default_rng(3)
    for _ in range(50):
        g = random_instance(rng, 5, 7, 0.5, weighted=True, advice="fractional")
        b, a = balance_run(g).value, follow_advice_run(g).value
        assert coinflip_run(g, 0.0).value == pytest.approx(b, abs=1e-9)
        assert coinflip_run(g, 1.0).value == pytest.approx(a, abs=1e-9)
        mid = coinflip_run(g, 0.5)
        assert mid.value == pytest.approx(0.5 * (a + b), abs=1e-9)
        assert validate_fractional_matching(g, mid.allocation)[0]


def test_coinflip_rejects_bad_mix():
    with pytest.raises(ValueError):
        coinflip_run(gen_ut(2), 1.5)


def test_completed_advice_is_half_of_opt():
    rng = np.random.default_rng(4)
    for _ in range(200):
        g = random_instance(rng, 6, 6, 0.4, advice="integral")
        for res in (follow_advice_run(g, complete=True), coinflip_run(g, 0.3, complete=True)):
            assert validate_fractional_matching(g, res.allocation)[0]
            assert res.value >= brute_force_opt(g) / 2 - 1e-9
