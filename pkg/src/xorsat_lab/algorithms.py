"""Decimation algorithms: unit clause propagation, BP-guided decimation in
fast and strict modes, the exact-marginal decimation process, their coupling
under shared free-choice bits, and the toxic-cycle detector.

All three algorithms sweep the variables in index order.  Free choices come
from a shared bit vector, which is what couples the processes: as long as
the engines agree on which steps are free, their outputs are identical.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .formula import InvalidParameters, XorsatFormula, substitute
from .gf2 import RrefBasis, build_check_system, rref_of
from .message_passing import EdgeLayout
from .rng import derive_rng


class Outcome(enum.Enum):
    SAT = "sat"
    FAIL = "fail"
    UNSAT_INPUT = "unsat_input"


@dataclass
class TrialTrace:
    """Record of one algorithm run.

    ``assignment`` is 1-indexed (entry 0 unused); ``assign_iter[v]`` is the
    outer iteration that fixed variable v.  ``conflict_times`` holds the
    iterations where opposing implications collided (each iteration once);
    ``conflict_vars`` the variables pinned to 0 by the collision rule.
    ``snapshots`` rows are (t, live variable count, clause counts by width
    0..k) taken every ``stride`` iterations.
    """

    algorithm: str
    n: int
    outcome: Outcome
    assignment: np.ndarray | None
    assign_iter: np.ndarray | None
    conflict_times: list = field(default_factory=list)
    conflict_vars: list = field(default_factory=list)
    snapshots: np.ndarray | None = None
    free_steps: np.ndarray | None = None
    marginals: list | None = None

    @property
    def num_conflict_events(self) -> int:
        return len(self.conflict_times)

    def to_json_dict(self) -> dict:
        out = {
            "algorithm": self.algorithm,
            "n": self.n,
            "outcome": self.outcome.value,
            "conflict_times": [int(t) for t in self.conflict_times],
            "conflict_vars": [int(v) for v in self.conflict_vars],
        }
        if self.assignment is not None:
            out["assignment"] = [int(b) for b in self.assignment[1:]]
        if self.snapshots is not None:
            out["snapshots"] = [[int(x) for x in row] for row in self.snapshots]
        return out


def shared_bits(n: int, seed: int, trial: int = 0) -> np.ndarray:
    """The per-variable free-choice bits shared by coupled runs (1-indexed)."""
    tau = np.zeros(n + 1, dtype=np.uint8)
    tau[1:] = derive_rng(seed, "tau", trial).integers(0, 2, size=n, dtype=np.uint8)
    return tau


def _ucp_arrays(formula: XorsatFormula):
    flat = formula.clause_vars_flat
    ptr = formula.clause_ptr
    width = np.diff(ptr).astype(np.int32)
    crhs = formula.clause_rhs.copy()
    cxor = np.zeros(formula.num_clauses, dtype=np.int64)
    if len(flat):
        np.bitwise_xor.at(cxor, np.repeat(np.arange(formula.num_clauses), np.diff(ptr)),
                          flat.astype(np.int64))
    order = np.argsort(flat, kind="stable")
    var_cls = np.repeat(np.arange(formula.num_clauses, dtype=np.int32), np.diff(ptr))[order]
    counts = np.bincount(flat, minlength=formula.n + 1)
    var_ptr = np.zeros(formula.n + 2, dtype=np.int64)
    np.cumsum(counts, out=var_ptr[1:])
    return var_ptr, var_cls, width, crhs, cxor


def run_ucp(formula: XorsatFormula, tau: np.ndarray, *, lifo: bool = False,
            snapshot_stride: int = 0) -> TrialTrace:
    """Unit clause propagation over x_1..x_n with shared free bits.

    Unit clauses present in the input are flushed before the first
    iteration.  When opposing unit clauses collide, the variable is pinned
    to 0, a conflict is recorded for the current iteration, and the run
    continues.  A returned SAT outcome is re-verified clause by clause.
    """
    n = formula.n
    if len(tau) != n + 1:
        raise InvalidParameters("tau must be 1-indexed with length n+1")
    var_ptr, var_cls, width, crhs, cxor = _ucp_arrays(formula)
    kmax = int(max(formula.k, width.max() if len(width) else 1))
    assigned = np.full(n + 1, -1, dtype=np.int8)
    assign_iter = np.full(n + 1, -1, dtype=np.int64)
    cap = formula.num_clauses + n + 2
    conflict_t = np.empty(cap, dtype=np.int64)
    conflict_v = np.empty(cap, dtype=np.int64)
    if snapshot_stride > 0:
        S = n // snapshot_stride + 1
        snap_n = np.zeros(S, dtype=np.int64)
        snap_m = np.zeros((S, kmax + 1), dtype=np.int64)
    else:
        snap_n = np.zeros(0, dtype=np.int64)
        snap_m = np.zeros((0, kmax + 1), dtype=np.int64)

    ncf, violated = K.ucp_kernel(
        n, kmax, var_ptr, var_cls, width, crhs, cxor,
        np.ascontiguousarray(tau, dtype=np.uint8), 1 if lifo else 0,
        snapshot_stride, snap_n, snap_m, assigned, assign_iter,
        conflict_t, conflict_v)

    assigned[0] = 0
    assignment = assigned.astype(np.uint8)
    sat = not violated and ncf == 0 and formula.is_satisfied_by(assignment[1:])
    if not sat and ncf == 0 and not violated:
        raise AssertionError("conflict-free run must satisfy the formula")
    times = sorted(set(int(t) for t in conflict_t[:ncf]))
    trace = TrialTrace(
        algorithm="ucp",
        n=n,
        outcome=Outcome.SAT if sat else Outcome.FAIL,
        assignment=assignment,
        assign_iter=assign_iter,
        conflict_times=times,
        conflict_vars=[int(v) for v in conflict_v[:ncf]],
    )
    if snapshot_stride > 0:
        t_col = np.arange(len(snap_n)) * snapshot_stride
        # fully assigned clauses are not part of the residual formula, so the
        # width-0 count is dropped: columns are t, live vars, m_1 .. m_kmax
        trace.snapshots = np.column_stack([t_col, snap_n, snap_m[:, 1:]])
    return trace


def run_bpgd(formula: XorsatFormula, tau: np.ndarray, *, mode: str = "fast") -> TrialTrace:
    """BP-guided decimation.

    'fast' mode relies on the proven trace equivalence with unit clause
    propagation and delegates to that engine.  'strict' mode actually runs
    message passing to convergence at every step: the marginal of the next
    variable decides its value (forced bit, shared free bit on 1/2, or 0 with
    a recorded conflict when both products vanish).
    """
    if mode == "fast":
        trace = run_ucp(formula, tau)
        trace.algorithm = "bpgd"
        return trace
    if mode != "strict":
        raise InvalidParameters("mode must be 'fast' or 'strict'")
    n = formula.n
    layout = EdgeLayout.build(formula)
    var_ptr, var_cls, width, crhs, _ = _ucp_arrays(formula)
    assigned = np.full(n + 1, -1, dtype=np.int8)
    assign_iter = np.full(n + 1, -1, dtype=np.int64)
    conflict_t = np.empty(n + 1, dtype=np.int64)
    conflict_v = np.empty(n + 1, dtype=np.int64)
    ncf = K.bpgd_strict_kernel(
        n, layout.e_var, layout.e_cls, layout.var_eptr, layout.var_eidx,
        var_ptr, var_cls, width, crhs,
        np.ascontiguousarray(tau, dtype=np.uint8),
        assigned, assign_iter, conflict_t, conflict_v)
    assigned[0] = 0
    assignment = assigned.astype(np.uint8)
    sat = formula.is_satisfied_by(assignment[1:])
    return TrialTrace(
        algorithm="bpgd",
        n=n,
        outcome=Outcome.SAT if sat else Outcome.FAIL,
        assignment=assignment,
        assign_iter=assign_iter,
        conflict_times=[int(t) for t in conflict_t[:ncf]],
        conflict_vars=[int(v) for v in conflict_v[:ncf]],
    )


DEFAULT_DECIMATION_CAP = 5000


def run_decimation(formula: XorsatFormula, rng: np.random.Generator | None = None,
                   *, tau: np.ndarray | None = None, seed: int | None = None,
                   scale_cap: int = DEFAULT_DECIMATION_CAP,
                   record_marginals: bool = True) -> TrialTrace:
    """The exact-marginal decimation process.

    Each step queries the true marginal of the next variable through an
    incrementally maintained row-echelon basis, then pins the variable by a
    unit row.  Free steps draw from ``tau`` when given, else from the rng.
    The output is exactly uniform over the solution set; unsatisfiable input
    yields an immediate UNSAT_INPUT outcome.
    """
    n = formula.n
    if n > scale_cap:
        raise InvalidParameters(
            f"n={n} above the decimation scale cap {scale_cap}; raise scale_cap to override")
    if rng is None:
        rng = derive_rng(0 if seed is None else seed, "decimation")
    basis = rref_of(build_check_system(formula))
    if basis.inconsistent:
        return TrialTrace(algorithm="decimation", n=n, outcome=Outcome.UNSAT_INPUT,
                          assignment=None, assign_iter=None)
    assignment = np.zeros(n + 1, dtype=np.uint8)
    assign_iter = np.arange(-1, n, dtype=np.int64)
    free_steps = np.zeros(n + 1, dtype=bool)
    marginals: list | None = [] if record_marginals else None
    for t in range(n):
        x = t + 1
        forced = basis.forced_value(x - 1)
        if forced is None:
            pi = 0.5
            bit = int(tau[x]) if tau is not None else int(rng.integers(0, 2))
            free_steps[x] = True
        else:
            pi = float(forced)
            bit = forced
        if marginals is not None:
            marginals.append(pi)
        status = basis.push_unit(x - 1, bit)
        if status == "inconsistent":
            raise AssertionError("decimation pinned a variable against its marginal")
        assignment[x] = bit
    if not formula.is_satisfied_by(assignment[1:]):
        raise AssertionError("decimation output failed clause verification")
    return TrialTrace(
        algorithm="decimation",
        n=n,
        outcome=Outcome.SAT,
        assignment=assignment,
        assign_iter=assign_iter,
        free_steps=free_steps,
        marginals=marginals,
    )


@dataclass(frozen=True)
class CoupledRun:
    guided: TrialTrace
    decimation: TrialTrace
    divergence_time: int   # first step whose chosen bits differ; n if never


def coupled_run(formula: XorsatFormula, tau: np.ndarray, *,
                scale_cap: int = DEFAULT_DECIMATION_CAP) -> CoupledRun:
    """Run guided decimation and the exact-marginal process on shared free
    bits; a divergence before the end implies the guided run conflicts."""
    dec = run_decimation(formula, tau=tau, scale_cap=scale_cap)
    if dec.outcome is Outcome.UNSAT_INPUT:
        raise InvalidParameters("coupled run requires a satisfiable formula")
    guided = run_bpgd(formula, tau, mode="fast")
    n = formula.n
    delta = n
    for x in range(1, n + 1):
        if guided.assignment[x] != dec.assignment[x]:
            delta = x - 1
            break
    if delta < n and guided.num_conflict_events == 0:
        raise AssertionError("divergence without a guided-run conflict")
    return CoupledRun(guided=guided, decimation=dec, divergence_time=delta)


# ---------------------------------------------------------------------------
# toxic cycles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToxicCycle:
    variables: tuple[int, ...]
    clauses: tuple[int, ...]   # clause indices in the formula

    @property
    def length(self) -> int:
        return len(self.clauses)


def find_toxic_cycles(formula: XorsatFormula) -> list[ToxicCycle]:
    """All simple cycles through width-2 clauses whose parity targets sum to
    1 over GF(2); such a cycle is an unsatisfiable subformula and the cause
    of propagation conflicts.  Each cycle is reported once."""
    edges: list[tuple[int, int, int]] = []   # (u, v, clause index)
    for i in range(formula.num_clauses):
        if formula.clause_width(i) == 2:
            lo, hi = formula.clause_ptr[i], formula.clause_ptr[i + 1]
            u, v = (int(x) for x in formula.clause_vars_flat[lo:hi])
            edges.append((u, v, i))
    adj: dict[int, list[tuple[int, int]]] = {}
    for u, v, i in edges:
        adj.setdefault(u, []).append((v, i))
        adj.setdefault(v, []).append((u, i))
    rhs = formula.clause_rhs
    out: list[ToxicCycle] = []

    # 2-cycles: unordered pairs of parallel edges
    by_pair: dict[tuple[int, int], list[int]] = {}
    for u, v, i in edges:
        by_pair.setdefault((min(u, v), max(u, v)), []).append(i)
    for (u, v), cs in sorted(by_pair.items()):
        for a in range(len(cs)):
            for b in range(a + 1, len(cs)):
                if (rhs[cs[a]] ^ rhs[cs[b]]) == 1:
                    out.append(ToxicCycle(variables=(u, v), clauses=(cs[a], cs[b])))

    # longer cycles: DFS from each root, visiting only larger vertices,
    # direction deduplicated by requiring second vertex < last vertex
    def extend(root: int, path: list[int], used_clauses: list[int], seen: set):
        u = path[-1]
        for (w, ci) in adj.get(u, ()):
            if ci in seen:
                continue
            if w == root and len(path) >= 3:
                if path[1] < path[-1]:
                    parity = 0
                    for c in used_clauses + [ci]:
                        parity ^= int(rhs[c])
                    if parity == 1:
                        out.append(ToxicCycle(variables=tuple(path),
                                              clauses=tuple(used_clauses + [ci])))
                continue
            if w <= root or w in path:
                continue
            seen.add(ci)
            extend(root, path + [w], used_clauses + [ci], seen)
            seen.remove(ci)

    for root in sorted(adj):
        extend(root, [root], [], set())
    return out


def has_toxic_cycle(formula: XorsatFormula) -> bool:
    return bool(find_toxic_cycles(formula))


# ---------------------------------------------------------------------------
# trace comparison under the coupling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceComparison:
    equivalent: bool
    detail: str


def compare_guided_traces(ucp_trace: TrialTrace, bpgd_trace: TrialTrace,
                          input_has_units: bool = False) -> TraceComparison:
    """Equality of guided-decimation traces under shared free bits.

    Conflict-free runs must agree exactly (full assignment, no conflicts).
    Once a conflict happens both engines must fail, and the variables
    x_1..x_{T+1} must still agree, where T is the first conflict iteration:
    up to there the induction behind the coupling applies.  Beyond it the
    two tie-break conventions (pin the collision variable to 0 vs. pin the
    failed marginal to 0) may legitimately cascade differently, because
    message passing rediscovers later variables from the already
    contradictory state instead of remembering the propagation order.
    """
    if ucp_trace.n != bpgd_trace.n:
        return TraceComparison(False, "different n")
    if not ucp_trace.conflict_times and not bpgd_trace.conflict_times:
        if ucp_trace.outcome != bpgd_trace.outcome:
            return TraceComparison(False, "outcomes differ on conflict-free run")
        if not np.array_equal(ucp_trace.assignment, bpgd_trace.assignment):
            return TraceComparison(False, "assignments differ on conflict-free run")
        return TraceComparison(True, "exact")
    if bool(ucp_trace.conflict_times) != bool(bpgd_trace.conflict_times):
        return TraceComparison(False, "one engine conflicted, the other did not")
    if ucp_trace.outcome != bpgd_trace.outcome:
        return TraceComparison(False, "outcomes differ")
    first = ucp_trace.conflict_times[0]
    # with raw input units the pre-pass may collide before any free step
    limit = first if input_has_units else first + 1
    limit = min(limit, ucp_trace.n)
    if not np.array_equal(ucp_trace.assignment[1:limit + 1],
                          bpgd_trace.assignment[1:limit + 1]):
        return TraceComparison(False, "pre-conflict assignments differ")
    return TraceComparison(True, "exact up to first conflict")
