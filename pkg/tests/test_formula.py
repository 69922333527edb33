import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xorsat_lab.formula import (
    Clause,
    InvalidParameters,
    SubstitutionStatus,
    XorsatFormula,
    generate_random,
    neighborhood,
    substitute,
)


def test_generate_zero_degree_gives_empty_formula():
    f = generate_random(10, 0.0, 3, seed=3)
    assert f.num_clauses == 0


def test_generate_clause_count_near_mean():
    # Poisson(d n / k) with mean 80000: a fixed seed must land within 5 sigma
    f = generate_random(100_000, 2.4, 3, seed=20260810)
    mean = 2.4 * 100_000 / 3
    assert abs(f.num_clauses - mean) <= 5 * np.sqrt(mean)


def test_generate_deterministic():
    a = generate_random(10, 3.0, 3, seed=42)
    b = generate_random(10, 3.0, 3, seed=42)
    assert a == b
    c = generate_random(10, 3.0, 3, seed=43)
    assert a != c


@pytest.mark.parametrize("k", [3, 4, 5])
def test_generate_widths_and_ids(k):
    f = generate_random(50, 2.0, k, seed=11)
    widths = f.widths()
    assert np.all(widths == k)
    for cl in f.clauses:
        assert len(set(cl.vars)) == k
        assert all(1 <= v <= 50 for v in cl.vars)
        assert list(cl.vars) == sorted(cl.vars)


def test_generate_rejects_bad_params():
    with pytest.raises(InvalidParameters):
        generate_random(2, 1.0, 3, seed=1)
    with pytest.raises(InvalidParameters):
        generate_random(10, 1.0, 2, seed=1)


def test_substitute_folds_value_into_rhs():
    f = XorsatFormula.from_clauses(3, 3, [((1, 2, 3), 1)])
    out, status = substitute(f, {1: 1})
    assert status is SubstitutionStatus.CONSISTENT
    assert out.clauses == (Clause((2, 3), 0),)


def test_substitute_unit_violation():
    f = XorsatFormula.from_clauses(1, 3, [((1,), 1)])
    out, status = substitute(f, {1: 0})
    assert out.num_clauses == 0
    assert status is SubstitutionStatus.VIOLATED


def test_substitute_mixed_satisfied_and_violated():
    f = XorsatFormula.from_clauses(2, 3, [((1, 2), 1), ((1, 2), 0)])
    out, status = substitute(f, {1: 0, 2: 1})
    assert out.num_clauses == 0
    assert status is SubstitutionStatus.VIOLATED


def test_substitute_rejects_foreign_variable():
    f = XorsatFormula.from_clauses(2, 3, [((1, 2), 1)])
    with pytest.raises(InvalidParameters):
        substitute(f, {7: 1})


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.data())
def test_substitute_fold_order_irrelevant(case, data):
    f = generate_random(14, 2.2, 3, seed=500 + case)
    ids = list(range(1, 15))
    picked = data.draw(st.lists(st.sampled_from(ids), unique=True, max_size=10))
    bits = data.draw(st.lists(st.integers(0, 1), min_size=len(picked), max_size=len(picked)))
    sigma = dict(zip(picked, bits))
    split = len(picked) // 2
    first = {v: sigma[v] for v in picked[:split]}
    second = {v: sigma[v] for v in picked[split:]}
    joint, status_joint = substitute(f, sigma)
    step1, s1 = substitute(f, first)
    step2, s2 = substitute(step1, second)
    assert joint == step2
    violated = SubstitutionStatus.VIOLATED in (s1, s2)
    assert (status_joint is SubstitutionStatus.VIOLATED) == violated


def test_neighborhood_isolated_variable():
    f = XorsatFormula.from_clauses(4, 3, [((1, 2), 0)])
    rep = neighborhood(f, ("v", 4), 2)
    assert rep.ball == frozenset({("v", 4)})
    assert rep.boundary == frozenset({("v", 4)})
    assert rep.acyclic


def test_neighborhood_single_clause_layers():
    f = XorsatFormula.from_clauses(2, 3, [((1, 2), 0)])
    rep1 = neighborhood(f, ("v", 1), 1)
    assert rep1.by_distance[1] == frozenset({("c", 0)})
    rep2 = neighborhood(f, ("v", 1), 2)
    assert rep2.by_distance[2] == frozenset({("v", 2)})
    assert rep2.acyclic


def test_neighborhood_detects_four_cycle():
    # two clauses on the same variable pair form a length-4 cycle
    f = XorsatFormula.from_clauses(2, 3, [((1, 2), 0), ((1, 2), 1)])
    rep = neighborhood(f, ("v", 1), 2)
    assert not rep.acyclic
    assert rep.ball == frozenset({("v", 1), ("v", 2), ("c", 0), ("c", 1)})


def test_neighborhood_layers_partition_ball():
    f = generate_random(30, 2.0, 3, seed=77)
    rep = neighborhood(f, ("v", 1), 4)
    seen: set = set()
    for layer in rep.by_distance:
        assert not (layer & seen)
        seen |= layer
    assert seen == rep.ball


def test_neighborhood_unknown_vertex():
    f = generate_random(5, 1.0, 3, seed=1)
    with pytest.raises(InvalidParameters):
        neighborhood(f, ("v", 9), 1)
    with pytest.raises(InvalidParameters):
        neighborhood(f, ("c", 10_000), 1)


def test_duplicate_clauses_are_kept():
    # tiny universe forces repeats; the generator must not deduplicate
    f = generate_random(4, 30.0, 3, seed=5)
    seen = {}
    for cl in f.clauses:
        seen[cl] = seen.get(cl, 0) + 1
    assert max(seen.values()) >= 2


def test_is_satisfied_by():
    f = XorsatFormula.from_clauses(3, 3, [((1, 2, 3), 1)])
    assert f.is_satisfied_by(np.array([1, 0, 0], dtype=np.uint8))
    assert not f.is_satisfied_by(np.array([1, 1, 0], dtype=np.uint8))
