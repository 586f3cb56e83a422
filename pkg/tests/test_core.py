import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matchkit.baselines import balance_run, greedy_run
from matchkit.core import (Allocation, ArrivalEvent, GraphInstance, ParseError, RunError,
                           parse_instance, serialize_instance, validate_fractional_matching)
from matchkit.lab import lab_run
from matchkit.offline import gen_er
from matchkit.paw import paw_run

from oracles import random_instance


def test_parse_single_edge_with_advice():
    g = parse_instance("MATCHKIT v1\noffline 1 unweighted\narrival 0: 0 | a: 0=1.0\n")
    assert g.n_offline == 1 and g.weights == (1.0,)
    assert g.arrivals[0].advice == {0: 1.0}
    assert g.arrivals[0].advised_vertex() == 0


def test_parse_weighted_comments_and_blank_lines():
    text = """# a comment
MATCHKIT v1
offline 3 weighted   # trailing comment
weights 1.5 0 2

arrival 0: 2 0 | a: 0=0.25 2=0.5
arrival 1:
"""
    g = parse_instance(text)
    assert g.weights == (1.5, 0.0, 2.0)
    assert g.arrivals[0].neighborhood == (0, 2)
    assert g.arrivals[0].advice == {0: 0.25, 2: 0.5}
    assert g.arrivals[1].neighborhood == () and not g.unweighted


@pytest.mark.parametrize("text, line", [
    ("", 1),
    ("MATCHKIT v2\noffline 1 unweighted\n", 1),
    ("MATCHKIT v1\noffline x unweighted\n", 2),
    ("MATCHKIT v1\noffline 2 weighted\nweights 1\n", 3),
    ("MATCHKIT v1\noffline 2 weighted\nweights 1 -1\n", 3),
    ("MATCHKIT v1\noffline 2 unweighted\narrival 0: 0 5\n", 3),
    ("MATCHKIT v1\noffline 2 unweighted\narrival 0: 0 | a: 1=1.0\n", 3),
    ("MATCHKIT v1\noffline 2 unweighted\narrival 0: 0 1 | a: 0=0.6 1=0.6\n", 3),
    ("MATCHKIT v1\noffline 2 unweighted\narrival 0: 0 | a: 0=nan\n", 3),
    ("MATCHKIT v1\noffline 2 unweighted\narrival 1: 0\n", 3),
    ("MATCHKIT v1\noffline 2 unweighted\narrival 0: 0 | b: 0=1\n", 3),
    ("MATCHKIT v1\noffline 2 unweighted\n\narrival 0: 0\narrival 1 0\n", 5),
])
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(ParseError) as err:
        parse_instance(text)
    assert err.value.lineno == line
    assert f"line {line}" in str(err.value)


def test_advice_sum_tolerance():
    ok = "MATCHKIT v1\noffline 2 unweighted\narrival 0: 0 1 | a: 0=0.5 1=0.5000000005\n"
    assert parse_instance(ok).arrivals[0].advice_total > 1.0
    bad = "MATCHKIT v1\noffline 2 unweighted\narrival 0: 0 1 | a: 0=0.5 1=0.500000002\n"
    with pytest.raises(ParseError):
        parse_instance(bad)


def test_instance_invariants_enforced():
    with pytest.raises(ValueError):
        GraphInstance(2, (1.0,), ())
    with pytest.raises(ValueError):
        GraphInstance(1, (-1.0,), ())
    with pytest.raises(ValueError):
        GraphInstance(1, (1.0,), (ArrivalEvent((0,), {1: 0.5}),))


def test_serialize_empty_and_deterministic():
    g = GraphInstance(2, (1.0, 1.0), ())
    assert serialize_instance(g) == "MATCHKIT v1\noffline 2 unweighted\n"
    h = gen_er(50, 0.2, seed=4)
    assert serialize_instance(h) == serialize_instance(h)
    assert parse_instance(serialize_instance(h)) == h


def test_roundtrip_random_instances():
    rng = np.random.default_rng(0)
    for i in range(100):
        g = random_instance(rng, int(rng.integers(0, 8)), int(rng.integers(0, 8)), 0.5,
                            weighted=bool(i % 2), advice=["none", "integral", "fractional"][i % 3])
        if i % 4 == 0:
            g = GraphInstance(g.n_offline, tuple(rng.random(g.n_offline) * 1000), g.arrivals)
        assert parse_instance(serialize_instance(g)) == g


@st.composite
def instances(draw):
    n = draw(st.integers(0, 6))
    w = draw(st.lists(st.floats(0.0, 1e6, allow_nan=False), min_size=n, max_size=n))
    arrivals = []
    for _ in range(draw(st.integers(0, 6))):
        nb = draw(st.sets(st.integers(0, max(n - 1, 0)), max_size=n)) if n else set()
        adv = {}
        if nb and draw(st.booleans()):
            u = draw(st.sampled_from(sorted(nb)))
            adv = {u: draw(st.floats(0.0, 1.0))}
        arrivals.append(ArrivalEvent(tuple(nb), adv))
    return GraphInstance(n, tuple(w), tuple(arrivals))


@given(instances())
def test_roundtrip_property(g):
    text = serialize_instance(g)
    assert parse_instance(text) == g
    assert serialize_instance(parse_instance(text)) == text


def test_advised_vertex_rejects_fractional():
    assert ArrivalEvent((0, 1), {}).advised_vertex() is None
    assert ArrivalEvent((0, 1), {1: 0.0}).advised_vertex() is None
    with pytest.raises(RunError):
        ArrivalEvent((0, 1), {0: 0.5}).advised_vertex()


def test_validate_zero_allocation():
    g = gen_er(5, 0.5, seed=1)
    x = Allocation(5)
    for ev in g.arrivals:
        x.append(ev.neighborhood, np.zeros(len(ev.neighborhood)))
    assert validate_fractional_matching(g, x) == (True, [])


def test_validate_reports_overfilled_vertex():
    g = GraphInstance(1, (1.0,), (ArrivalEvent((0,)), ArrivalEvent((0,))))
    x = Allocation(1)
    x.append([0], [0.6])
    x.append([0], [0.4000002])
    ok, problems = validate_fractional_matching(g, x)
    assert not ok
    assert any("offline vertex 0" in p for p in problems)


def test_validate_reports_non_edge_and_negative():
    g = GraphInstance(2, (1.0, 1.0), (ArrivalEvent((0,)),))
    x = Allocation(2)
    x.append([0, 1], [-0.1, 0.5])
    ok, problems = validate_fractional_matching(g, x)
    assert not ok
    assert any("negative" in p for p in problems)
    assert any("non-edge" in p for p in problems)


def test_all_algorithms_produce_valid_matchings():
    rng = np.random.default_rng(7)
    for i in range(100):
        g = random_instance(rng, 6, 8, 0.4, weighted=False, advice="integral")
        for res in (lab_run(g, 0.4), paw_run(g, 0.6), balance_run(g), greedy_run(g)):
            ok, problems = validate_fractional_matching(g, res.allocation)
            assert ok, problems
            assert res.value == pytest.approx(res.allocation.value(g.weights), abs=1e-9)
            assert np.all(res.allocation.levels <= 1.0 + 1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_lab_output_valid_property(seed, lam):
    rng = np.random.default_rng(seed)
    g = random_instance(rng, 5, 6, 0.5, weighted=True, advice="fractional")
    res = lab_run(g, lam)
    ok, problems = validate_fractional_matching(g, res.allocation)
    assert ok, problems
    assert np.all(res.certificate.alpha >= -1e-12) and np.all(res.certificate.beta >= 0)
