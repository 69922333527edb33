import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xorsat_lab.formula import XorsatFormula, generate_random, substitute
from xorsat_lab.gf2 import (
    RrefBasis,
    UnsatisfiableError,
    build_check_system,
    exact_marginal,
    null_variables,
    reduce_system,
    sample_uniform_solution,
    sparse_null_variables,
    sparse_rank,
    sparse_solve,
)
from xorsat_lab.rng import derive_rng

from conftest import brute_marginal, brute_null_set, enumerate_solutions, random_formula


def test_empty_system():
    f = XorsatFormula.from_clauses(5, 3, [])
    rep = reduce_system(build_check_system(f))
    assert rep.rank == 0 and rep.nullity == 5
    assert rep.null_set == frozenset()


def test_single_clause_row():
    f = XorsatFormula.from_clauses(4, 3, [((1, 2, 3), 1)])
    sys_ = build_check_system(f)
    assert sys_.num_rows == 1
    assert int(sys_.rows[0, 0]) == 0b0111
    assert sys_.rhs[0] == 1
    rep = reduce_system(sys_)
    assert rep.rank == 1 and rep.nullity == 3 and rep.null_set == frozenset()


def test_forced_pair():
    f = XorsatFormula.from_clauses(2, 3, [((1,), 1), ((1, 2), 1)])
    rep = reduce_system(build_check_system(f))
    assert rep.rank == 2 and rep.nullity == 0
    assert rep.null_set == frozenset({1, 2})
    assert list(rep.particular) == [1, 0]
    # brute force over all four assignments agrees
    sols = enumerate_solutions(f)
    assert len(sols) == 1 and list(sols[0]) == [1, 0]


def test_kernel_chain_no_null():
    f = XorsatFormula.from_clauses(3, 3, [((1, 2), 0), ((2, 3), 0)])
    rep = reduce_system(build_check_system(f))
    assert rep.rank == 2 and rep.nullity == 1
    assert [list(b) for b in rep.basis] == [[1, 1, 1]]
    assert rep.null_set == frozenset()


def test_inconsistent_system():
    f = XorsatFormula.from_clauses(2, 3, [((1, 2), 1), ((1, 2), 0)])
    rep = reduce_system(build_check_system(f))
    assert not rep.consistent
    assert rep.particular is None
    assert rep.solution_count() == 0
    with pytest.raises(UnsatisfiableError):
        sample_uniform_solution(rep, derive_rng(1, "x"))


@pytest.mark.parametrize("case", range(60))
def test_brute_force_oracle(case):
    # enumeration over all 2^n assignments is the ground truth
    f = random_formula(case, n_max=12, d_lo=0.4, d_hi=3.5, tag="gf2", seed=31)
    rep = reduce_system(build_check_system(f))
    sols = enumerate_solutions(f)
    assert rep.consistent == (len(sols) > 0)
    if not rep.consistent:
        assert exact_marginal(f, 1) is None
        return
    assert len(sols) == rep.solution_count()
    assert brute_null_set(sols) == rep.null_set
    for v in range(1, f.n + 1):
        assert exact_marginal(f, v) == brute_marginal(sols, v)
    for vec in rep.basis:
        packed = build_check_system(f)
        prod = np.zeros(len(packed.rhs), dtype=np.int64)
        ptr, flat = f.clause_ptr, f.clause_vars_flat
        for i in range(f.num_clauses):
            prod[i] = vec[flat[ptr[i]:ptr[i + 1]] - 1].sum() % 2
        assert not prod.any(), "kernel basis vector not in the kernel"


def test_marginal_examples():
    assert exact_marginal(XorsatFormula.from_clauses(3, 3, [((1, 2, 3), 1)]), 1) == 0.5
    assert exact_marginal(XorsatFormula.from_clauses(1, 3, [((1,), 1)]), 1) == 1.0
    assert exact_marginal(
        XorsatFormula.from_clauses(2, 3, [((1, 2), 1), ((1, 2), 0)]), 1) is None


def test_null_variables_full_rank_square():
    f = XorsatFormula.from_clauses(2, 3, [((1,), 0), ((2,), 1)])
    assert null_variables(build_check_system(f)) == frozenset({1, 2})


def test_sampler_exact_distribution(rng):
    f = XorsatFormula.from_clauses(2, 3, [((1, 2), 0)])
    rep = reduce_system(build_check_system(f))
    hits = {(0, 0): 0, (1, 1): 0}
    for _ in range(10_000):
        hits[tuple(sample_uniform_solution(rep, rng))] += 1
    assert abs(hits[(0, 0)] / 10_000 - 0.5) < 0.02


def test_sampler_full_cube(rng):
    f = XorsatFormula.from_clauses(3, 3, [])
    rep = reduce_system(build_check_system(f))
    hits: dict = {}
    for _ in range(1000):
        key = tuple(sample_uniform_solution(rep, rng))
        hits[key] = hits.get(key, 0) + 1
    assert len(hits) == 8
    for count in hits.values():
        assert abs(count / 1000 - 0.125) < 0.04


def test_push_unit_on_free_column_drops_nullity():
    f = XorsatFormula.from_clauses(3, 3, [((1, 2, 3), 0)])
    basis = RrefBasis(3)
    sys_ = build_check_system(f)
    basis.push_packed(sys_.rows[0], 0)
    before = basis.kernel_report()
    assert 2 not in before.null_set
    assert basis.push_unit(1, 1) == "added"
    after = basis.kernel_report()
    assert after.nullity == before.nullity - 1


def test_push_dependent_row_keeps_rank():
    f = XorsatFormula.from_clauses(3, 3, [((1, 2), 0), ((2, 3), 0)])
    sys_ = build_check_system(f)
    basis = RrefBasis(3)
    basis.push_packed(sys_.rows[0], 0)
    basis.push_packed(sys_.rows[1], 0)
    # sum of the two rows is in the row space
    combo = sys_.rows[0] ^ sys_.rows[1]
    assert basis.push_packed(combo, 0) == "dependent"
    assert basis.rank == 2
    assert basis.push_packed(combo, 1) == "inconsistent"


@pytest.mark.parametrize("case", range(40))
def test_push_row_matches_scratch(case):
    # random push sequences on small systems against scratch reduction
    rng = derive_rng(91, "push", case)
    n = int(rng.integers(3, 64))
    m = int(rng.integers(1, 2 * n))
    rows = rng.integers(0, 2, size=(m, n)).astype(np.uint8)
    rhs = rng.integers(0, 2, size=m).astype(np.uint8)
    clauses = []
    for i in range(m):
        vs = tuple(int(v) + 1 for v in np.nonzero(rows[i])[0])
        if not vs:
            continue
        clauses.append((vs, int(rhs[i])))
    if not clauses:
        return
    f = XorsatFormula.from_clauses(n, 3, clauses)
    sys_ = build_check_system(f)
    incremental = RrefBasis(n)
    for i in range(sys_.num_rows):
        incremental.push_packed(sys_.rows[i], int(sys_.rhs[i]))
        # prefix RREF must equal scratch reduction of the same prefix
    scratch = RrefBasis(n)
    for i in range(sys_.num_rows):
        scratch.push_packed(sys_.rows[i], int(sys_.rhs[i]))
    a, b = incremental.kernel_report(), scratch.kernel_report()
    assert a.rank == b.rank and a.null_set == b.null_set
    assert a.consistent == b.consistent
    assert [list(x) for x in a.basis] == [list(x) for x in b.basis]


def test_elimination_deterministic():
    f = generate_random(30, 2.0, 3, seed=8)
    r1 = reduce_system(build_check_system(f))
    r2 = reduce_system(build_check_system(f))
    assert r1.rank == r2.rank
    assert [list(b) for b in r1.basis] == [list(b) for b in r2.basis]
    assert list(r1.particular) == list(r2.particular)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_nullity_counts_solutions(case):
    f = generate_random(10, 2.0, 3, seed=case)
    rep = reduce_system(build_check_system(f))
    assert rep.rank + rep.nullity == f.n
    assert len(enumerate_solutions(f)) == rep.solution_count()


@pytest.mark.parametrize("case", range(50))
def test_sparse_engine_matches_dense(case):
    rng = derive_rng(92, "sparse", case)
    f = random_formula(case, n_max=150, d_lo=0.4, d_hi=3.2, tag="sp", seed=47)
    t = int(rng.integers(0, f.n // 2 + 1))
    picked = rng.choice(np.arange(1, f.n + 1), size=t, replace=False)
    sub, _ = substitute(f, {int(v): int(rng.integers(0, 2)) for v in picked})
    rep = reduce_system(build_check_system(sub))
    rank, ok = sparse_rank(sub)
    assert (rank, ok) == (rep.rank, rep.consistent)
    sol = sparse_solve(sub, derive_rng(93, "sol", case))
    if rep.consistent:
        assert sol is not None and sub.is_satisfied_by(sol[1:])
        mask = sparse_null_variables(sub)
        assert frozenset(np.nonzero(mask)[0].tolist()) == rep.null_set
    else:
        assert sol is None


def test_rref_debug_dump():
    f = XorsatFormula.from_clauses(3, 3, [((1, 2), 1), ((2, 3), 0)])
    sys_ = build_check_system(f)
    basis = RrefBasis(3)
    for i in range(2):
        basis.push_packed(sys_.rows[i], int(sys_.rhs[i]))
    dump = basis.dump_text()
    assert dump.splitlines() == ["101 | 1", "011 | 0"]
