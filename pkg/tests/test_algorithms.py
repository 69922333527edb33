import itertools

import numpy as np
import pytest
from scipy.stats import chisquare

from xorsat_lab.algorithms import (
    Outcome,
    compare_guided_traces,
    coupled_run,
    find_toxic_cycles,
    has_toxic_cycle,
    run_bpgd,
    run_decimation,
    run_ucp,
    shared_bits,
)
from xorsat_lab.formula import InvalidParameters, XorsatFormula, generate_random, substitute
from xorsat_lab.gf2 import build_check_system, exact_marginal, reduce_system, sparse_rank
from xorsat_lab.rng import derive_rng

from conftest import enumerate_solutions, random_formula, random_tree_formula


# -- unit clause propagation ---------------------------------------------------

def test_ucp_empty_formula_returns_free_bits():
    f = XorsatFormula.from_clauses(6, 3, [])
    tau = shared_bits(6, 11)
    trace = run_ucp(f, tau)
    assert trace.outcome is Outcome.SAT
    assert np.array_equal(trace.assignment, tau)
    assert trace.conflict_times == []


def test_ucp_opposing_pair_conflicts_at_zero():
    f = XorsatFormula.from_clauses(2, 3, [((1, 2), 1), ((1, 2), 0)])
    trace = run_ucp(f, shared_bits(2, 3))
    assert trace.outcome is Outcome.FAIL
    assert trace.conflict_times == [0]
    assert trace.conflict_vars == [2]
    assert trace.assignment[2] == 0   # collision pins the variable to 0


def test_ucp_flushes_input_units_before_first_iteration():
    f = XorsatFormula.from_clauses(3, 3, [((3,), 1), ((2, 3), 1)])
    trace = run_ucp(f, shared_bits(3, 4), snapshot_stride=1)
    assert trace.outcome is Outcome.SAT
    assert trace.assignment[3] == 1 and trace.assignment[2] == 0
    assert trace.snapshots[0][1] == 1    # only x1 live at t=0
    assert np.all(trace.snapshots[:, 2] == 0)   # m_1 always zero


def test_ucp_succeeds_on_trees():
    for case in range(200):
        f = random_tree_formula(case, n_max=120)
        trace = run_ucp(f, shared_bits(f.n, 900 + case))
        assert trace.outcome is Outcome.SAT
        assert trace.conflict_times == []


def test_ucp_fifo_vs_lifo_order_invariance():
    # propagation closure is order-invariant until the first collision, so
    # the first conflict iteration and the outcome agree; the collision
    # tie-break may cascade differently afterwards
    conflicted = 0
    for case in range(120):
        f = random_formula(case, n_max=150, d_lo=0.5, d_hi=2.8, tag="fifo", seed=71)
        tau = shared_bits(f.n, 3000 + case)
        a = run_ucp(f, tau, lifo=False)
        b = run_ucp(f, tau, lifo=True)
        assert a.conflict_times[:1] == b.conflict_times[:1]
        assert a.outcome == b.outcome
        if a.conflict_times:
            conflicted += 1
        else:
            assert np.array_equal(a.assignment, b.assignment)
    assert conflicted > 5


def test_ucp_sat_outcome_reverified():
    f = generate_random(500, 1.2, 3, seed=17)
    trace = run_ucp(f, shared_bits(500, 18))
    if trace.outcome is Outcome.SAT:
        assert f.is_satisfied_by(trace.assignment[1:])


# -- guided decimation ----------------------------------------------------------

def test_bpgd_empty_formula():
    f = XorsatFormula.from_clauses(4, 3, [])
    tau = shared_bits(4, 5)
    for mode in ("fast", "strict"):
        trace = run_bpgd(f, tau, mode=mode)
        assert np.array_equal(trace.assignment, tau)


def test_bpgd_pinned_variable_ignores_free_bit():
    f = XorsatFormula.from_clauses(1, 3, [((1,), 1)])
    tau = np.array([0, 0], dtype=np.uint8)
    for mode in ("fast", "strict"):
        assert run_bpgd(f, tau, mode=mode).assignment[1] == 1


def test_bpgd_modes_agree():
    for case in range(150):
        f = random_formula(case, n_max=120, tag="modes", seed=72)
        tau = shared_bits(f.n, 5000 + case)
        fast = run_bpgd(f, tau, mode="fast")
        strict = run_bpgd(f, tau, mode="strict")
        cmp = compare_guided_traces(fast, strict)
        assert cmp.equivalent, cmp


def test_bpgd_equals_ucp_under_shared_bits():
    conflicted = 0
    for case in range(150):
        f = random_formula(case, n_max=120, tag="coupling", seed=73)
        tau = shared_bits(f.n, 6000 + case)
        a = run_ucp(f, tau)
        b = run_bpgd(f, tau, mode="strict")
        cmp = compare_guided_traces(a, b)
        assert cmp.equivalent, (case, cmp)
        conflicted += bool(a.conflict_times)
    assert conflicted > 10   # the sample must exercise the conflict path


# -- exact-marginal decimation ---------------------------------------------------

def test_decimation_unique_solution_is_deterministic():
    f = XorsatFormula.from_clauses(2, 3, [((1,), 1), ((1, 2), 1)])
    for i in range(5):
        trace = run_decimation(f, derive_rng(31, "t", i))
        assert list(trace.assignment[1:]) == [1, 0]
        assert trace.marginals == [1.0, 0.0]


def test_decimation_two_solutions_balanced():
    f = XorsatFormula.from_clauses(2, 3, [((1, 2), 0)])
    counts = {(0, 0): 0, (1, 1): 0}
    for i in range(10_000):
        trace = run_decimation(f, derive_rng(32, "t", i))
        counts[tuple(int(b) for b in trace.assignment[1:])] += 1
    assert abs(counts[(0, 0)] / 10_000 - 0.5) < 0.02


def test_decimation_unsat_input_reported():
    f = XorsatFormula.from_clauses(2, 3, [((1, 2), 1), ((1, 2), 0)])
    trace = run_decimation(f, derive_rng(33, "t"))
    assert trace.outcome is Outcome.UNSAT_INPUT


def test_decimation_uniform_over_solution_set():
    f = generate_random(10, 1.8, 3, seed=778)
    sols = enumerate_solutions(f)
    assert len(sols) > 1
    index = {tuple(s): i for i, s in enumerate(sols)}
    hits = np.zeros(len(sols), dtype=np.int64)
    for i in range(10_000):
        trace = run_decimation(f, derive_rng(34, "t", i))
        hits[index[tuple(int(b) for b in trace.assignment[1:])]] += 1
    assert chisquare(hits).pvalue > 0.001


def test_decimation_scale_cap():
    f = generate_random(6000, 1.0, 3, seed=3)
    with pytest.raises(InvalidParameters):
        run_decimation(f, derive_rng(35, "t"))
    run_decimation(generate_random(100, 1.0, 3, seed=3), derive_rng(35, "t"))


def test_decimation_marginals_match_scratch_reduction():
    # spot-check the incrementally maintained marginals against a fresh
    # reduction of the residual formula at every step
    f = generate_random(60, 2.2, 3, seed=91)
    rep = reduce_system(build_check_system(f))
    if not rep.consistent:
        pytest.skip("instance unsatisfiable")
    trace = run_decimation(f, derive_rng(36, "t"))
    prefix = {}
    for t in range(f.n):
        sub, _ = substitute(f, prefix)
        want = exact_marginal(sub, t + 1)
        assert trace.marginals[t] == want
        prefix[t + 1] = int(trace.assignment[t + 1])


def test_decimation_marginals_spot_check_n300():
    f = generate_random(300, 2.3, 3, seed=92)
    rep = reduce_system(build_check_system(f))
    if not rep.consistent:
        pytest.skip("instance unsatisfiable")
    trace = run_decimation(f, derive_rng(37, "t"))
    rng = derive_rng(38, "steps")
    for t in sorted(int(x) for x in rng.choice(300, size=10, replace=False)):
        prefix = {v: int(trace.assignment[v]) for v in range(1, t + 1)}
        sub, _ = substitute(f, prefix)
        assert trace.marginals[t] == exact_marginal(sub, t + 1)


# -- coupling ---------------------------------------------------------------------

def test_coupled_run_on_tree_never_diverges():
    for case in range(40):
        f = random_tree_formula(case, n_max=60)
        tau = shared_bits(f.n, 7000 + case)
        run = coupled_run(f, tau)
        assert run.divergence_time == f.n
        assert run.guided.outcome is Outcome.SAT
        assert run.decimation.outcome is Outcome.SAT
        assert np.array_equal(run.guided.assignment, run.decimation.assignment)


def test_coupled_run_rejects_unsat_input():
    f = XorsatFormula.from_clauses(3, 3, [((1, 2), 1), ((2, 3), 1), ((1, 3), 1)])
    assert has_toxic_cycle(f)
    with pytest.raises(InvalidParameters):
        coupled_run(f, shared_bits(3, 1))


def test_coupled_run_divergence_implies_conflict():
    diverged = 0
    for case in range(120):
        f = random_formula(case, n_max=80, d_lo=1.5, d_hi=2.7, k_choices=(3,),
                           tag="cpl", seed=74)
        rep = reduce_system(build_check_system(f))
        if not rep.consistent:
            continue
        tau = shared_bits(f.n, 8000 + case)
        run = coupled_run(f, tau)   # internal assertion checks the implication
        if run.divergence_time < f.n:
            diverged += 1
            assert run.guided.num_conflict_events > 0
    assert diverged > 0


# -- toxic cycles -------------------------------------------------------------------

def test_toxic_two_cycle():
    f = XorsatFormula.from_clauses(2, 3, [((1, 2), 1), ((1, 2), 0)])
    cycles = find_toxic_cycles(f)
    assert len(cycles) == 1 and cycles[0].length == 2


def test_even_parity_triangle_not_toxic():
    f = XorsatFormula.from_clauses(3, 3, [((1, 2), 0), ((2, 3), 0), ((1, 3), 0)])
    assert find_toxic_cycles(f) == []


def test_odd_parity_triangle_toxic():
    f = XorsatFormula.from_clauses(3, 3, [((1, 2), 1), ((2, 3), 0), ((1, 3), 0)])
    cycles = find_toxic_cycles(f)
    assert len(cycles) == 1
    assert set(cycles[0].variables) == {1, 2, 3}


def test_wide_clauses_ignored():
    f = XorsatFormula.from_clauses(3, 3, [((1, 2, 3), 1), ((1, 2, 3), 0)])
    assert find_toxic_cycles(f) == []


def test_every_toxic_cycle_is_inconsistent_standalone():
    # exhaustive: all width-2 multigraph formulas on 4 variables, <= 4 clauses
    pairs = list(itertools.combinations(range(1, 5), 2))
    options = [(p, r) for p in pairs for r in (0, 1)]
    checked_cycles = 0
    for count in (2, 3, 4):
        for combo in itertools.combinations_with_replacement(options, count):
            clauses = [(pair, rhs) for pair, rhs in combo]
            f = XorsatFormula.from_clauses(4, 3, clauses)
            cycles = find_toxic_cycles(f)
            for cyc in cycles:
                sub = XorsatFormula.from_clauses(
                    4, 3, [f.clauses[i] for i in cyc.clauses])
                assert not reduce_system(build_check_system(sub)).consistent
                checked_cycles += 1
            # a formula whose width-2 system is consistent has no toxic cycle
            ok = reduce_system(build_check_system(f)).consistent
            if ok:
                assert not cycles
    assert checked_cycles > 100


# -- trajectory snapshots --------------------------------------------------------

def test_snapshot_endpoints():
    n = 3000
    f = generate_random(n, 1.5, 3, seed=55)
    trace = run_ucp(f, shared_bits(n, 56), snapshot_stride=n // 10)
    first, last = trace.snapshots[0], trace.snapshots[-1]
    assert first[0] == 0 and first[1] == n
    assert first[1 + 3] == f.num_clauses     # all clauses full width
    assert last[0] == n and last[1] == 0
    assert np.all(last[2:] == 0)
    assert np.all(trace.snapshots[:, 1 + 1] == 0)   # unit clauses flushed
    widths_cols = trace.snapshots[:, 2:]
    assert np.all(widths_cols.sum(axis=1) <= f.num_clauses)


def test_snapshot_trajectory_tracks_prediction():
    from xorsat_lab.analytic import ucp_trajectory_prediction

    n = 20_000
    f = generate_random(n, 1.5, 3, seed=57)
    trace = run_ucp(f, shared_bits(n, 58), snapshot_stride=n // 10)
    for theta in (0.2, 0.5, 0.8):
        row = trace.snapshots[int(theta * 10)]
        pred = ucp_trajectory_prediction(1.5, 3, theta)
        assert abs(row[1] / n - pred.n_frac) < 0.03
        assert abs(row[1 + 2] / n - pred.m_frac[2]) < 0.03
