"""Belief propagation with the exact three-valued message algebra, and
warning propagation with {frozen, uniform, null} messages.

Both engines run synchronous rounds over a flat edge layout.  BP messages
are stored as trits (0 -> forces false, 1 -> uniform, 2 -> forces true), so
half-integrality is structural rather than a floating-point accident.  The
engines expose per-round state for the edge-level equivalence check:
a BP message is uniform exactly when the WP message is not null.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._kernels import BP_HALF, BP_ONE, BP_ZERO, WP_FROZEN, WP_NULL, WP_UNIFORM
from .formula import XorsatFormula

__all__ = [
    "BP_ZERO", "BP_HALF", "BP_ONE",
    "WP_UNIFORM", "WP_FROZEN", "WP_NULL",
    "EdgeLayout", "BpEngine", "WpEngine", "MarkSets",
    "bp_marginal", "wp_run", "check_bp_wp_equivalence",
]


class ConvergenceError(RuntimeError):
    """A message-passing engine exceeded its proven convergence bound."""


@dataclass(frozen=True)
class EdgeLayout:
    """Flat directed-edge layout of a factor graph: one entry per
    (clause, variable) incidence, plus per-variable CSR into the edges."""

    n: int
    m: int
    e_var: np.ndarray
    e_cls: np.ndarray
    var_eptr: np.ndarray
    var_eidx: np.ndarray
    cls_rhs: np.ndarray

    @classmethod
    def build(cls, formula: XorsatFormula) -> "EdgeLayout":
        e_var = formula.clause_vars_flat.astype(np.int32)
        e_cls = np.repeat(
            np.arange(formula.num_clauses, dtype=np.int32), formula.widths()
        )
        order = np.argsort(e_var, kind="stable").astype(np.int64)
        counts = np.bincount(e_var, minlength=formula.n + 1)
        var_eptr = np.zeros(formula.n + 2, dtype=np.int64)
        np.cumsum(counts, out=var_eptr[1:])
        return cls(
            n=formula.n,
            m=formula.num_clauses,
            e_var=e_var,
            e_cls=e_cls,
            var_eptr=var_eptr,
            var_eidx=order,
            cls_rhs=formula.clause_rhs.copy(),
        )

    @property
    def num_edges(self) -> int:
        return len(self.e_var)


class _EngineBase:
    def __init__(self, formula: XorsatFormula, layout: EdgeLayout | None = None):
        self.formula = formula
        self.layout = layout if layout is not None else EdgeLayout.build(formula)
        E = self.layout.num_edges
        self.live = np.ones(E, dtype=np.uint8)
        self.v2c = np.empty(E, dtype=np.uint8)
        self.c2v = np.empty(E, dtype=np.uint8)
        self._v2c_buf = np.empty(E, dtype=np.uint8)
        self._c2v_buf = np.empty(E, dtype=np.uint8)
        self.rounds = 0
        self.converged = E == 0

    def _swap(self):
        self.v2c, self._v2c_buf = self._v2c_buf, self.v2c
        self.c2v, self._c2v_buf = self._c2v_buf, self.c2v


class BpEngine(_EngineBase):
    """Synchronous BP from the all-uniform start."""

    def __init__(self, formula: XorsatFormula, layout: EdgeLayout | None = None):
        super().__init__(formula, layout)
        self.v2c.fill(BP_HALF)
        self.c2v.fill(BP_HALF)
        m, n = self.layout.m, self.layout.n
        self._c_half = np.empty(m, dtype=np.int32)
        self._c_xor = np.empty(m, dtype=np.uint8)
        self._v0 = np.empty(n + 1, dtype=np.int32)
        self._v2 = np.empty(n + 1, dtype=np.int32)

    @property
    def convergence_cap(self) -> int:
        return 2 * int(self.live.sum()) + 4

    def step(self) -> int:
        """One synchronous round; returns the number of changed messages."""
        lay = self.layout
        changed = K.bp_round(lay.e_var, lay.e_cls, self.live, self.v2c, self.c2v,
                             lay.cls_rhs, self._v2c_buf, self._c2v_buf,
                             self._c_half, self._c_xor, self._v0, self._v2)
        self._swap()
        self.rounds += 1
        if changed == 0:
            self.converged = True
        return int(changed)

    def run(self, max_rounds: int | None = None) -> int:
        cap = self.convergence_cap if max_rounds is None else max_rounds
        for _ in range(cap):
            if self.step() == 0:
                return self.rounds
        if not self.converged and max_rounds is None:
            raise ConvergenceError("BP failed to settle within its proven bound")
        return self.rounds

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        """(codes, failure flags), 1-indexed by variable; code BP_HALF for
        isolated variables."""
        n = self.layout.n
        marg = np.empty(n + 1, dtype=np.uint8)
        fail = np.empty(n + 1, dtype=np.uint8)
        K.bp_marginals(self.layout.e_var, self.live, self.c2v, n, marg, fail)
        return marg, fail

    def marginal_value(self, var: int) -> float:
        marg, _ = self.marginals()
        return {BP_ZERO: 0.0, BP_HALF: 0.5, BP_ONE: 1.0}[int(marg[var])]


@dataclass(frozen=True)
class MarkSets:
    """Variable partition by mark at one WP iteration."""

    null: frozenset
    frozen: frozenset
    uniform: frozenset

    @classmethod
    def from_array(cls, marks: np.ndarray) -> "MarkSets":
        ids = np.arange(1, len(marks))
        codes = marks[1:]
        return cls(
            null=frozenset(ids[codes == WP_NULL].tolist()),
            frozen=frozenset(ids[codes == WP_FROZEN].tolist()),
            uniform=frozenset(ids[codes == WP_UNIFORM].tolist()),
        )


class WpEngine(_EngineBase):
    """Synchronous WP from the all-frozen start."""

    def __init__(self, formula: XorsatFormula, layout: EdgeLayout | None = None):
        super().__init__(formula, layout)
        self.v2c.fill(WP_FROZEN)
        self.c2v.fill(WP_FROZEN)
        m, n = self.layout.m, self.layout.n
        self._c_null = np.empty(m, dtype=np.int32)
        self._c_unif = np.empty(m, dtype=np.int32)
        self._c_deg = np.empty(m, dtype=np.int32)
        self._v_null = np.empty(n + 1, dtype=np.int32)
        self._v_froz = np.empty(n + 1, dtype=np.int32)
        self._null_count = 0
        self._frozen_count = 2 * self.layout.num_edges

    @property
    def convergence_cap(self) -> int:
        return 2 * self.layout.m + 4

    def step(self) -> int:
        lay = self.layout
        changed = K.wp_round(lay.e_var, lay.e_cls, self.live, self.v2c, self.c2v,
                             self._v2c_buf, self._c2v_buf,
                             self._c_null, self._c_unif, self._c_deg,
                             self._v_null, self._v_froz)
        self._swap()
        self.rounds += 1
        nulls = int((self.v2c == WP_NULL).sum() + (self.c2v == WP_NULL).sum())
        frozens = int((self.v2c == WP_FROZEN).sum() + (self.c2v == WP_FROZEN).sum())
        if nulls < self._null_count or frozens > self._frozen_count:
            raise AssertionError("WP monotonicity violated")
        self._null_count, self._frozen_count = nulls, frozens
        if changed == 0:
            self.converged = True
        return int(changed)

    def run(self, max_rounds: int | None = None) -> int:
        cap = self.convergence_cap if max_rounds is None else max_rounds
        for _ in range(cap):
            if self.step() == 0:
                return self.rounds
        if not self.converged and max_rounds is None:
            raise ConvergenceError("WP failed to settle within its proven bound")
        return self.rounds

    def marks_array(self) -> np.ndarray:
        n = self.layout.n
        marks = np.zeros(n + 1, dtype=np.uint8)
        K.wp_marks(self.layout.e_var, self.live, self.c2v, n, marks)
        return marks

    def marks(self) -> MarkSets:
        return MarkSets.from_array(self.marks_array())


def bp_marginal(formula: XorsatFormula, var: int, max_rounds: int | None = None) -> float:
    """Converged BP estimate of P[x_var = 1]: 0, 0.5 or 1."""
    engine = BpEngine(formula)
    engine.run(max_rounds)
    return engine.marginal_value(var)


def wp_run(formula: XorsatFormula, record_depths: tuple[int, ...] = ()) -> tuple[WpEngine, dict]:
    """Run WP to its fixed point; returns the engine and the mark sets at the
    requested iteration depths plus the limit under key 'limit'."""
    engine = WpEngine(formula)
    recorded: dict = {}
    if 0 in record_depths:
        recorded[0] = engine.marks()
    cap = engine.convergence_cap
    for _ in range(cap):
        if engine.step() == 0:
            break
        if engine.rounds in record_depths:
            recorded[engine.rounds] = engine.marks()
    if not engine.converged:
        raise ConvergenceError("WP failed to settle within its proven bound")
    limit = engine.marks()
    for depth in record_depths:
        if depth >= engine.rounds and depth not in recorded:
            recorded[depth] = limit
    recorded["limit"] = limit
    return engine, recorded


@dataclass(frozen=True)
class EquivalenceReport:
    ok: bool
    rounds_checked: int
    counterexample: tuple | None  # (round, kind, index)


def check_bp_wp_equivalence(formula: XorsatFormula, max_rounds: int | None = None) -> EquivalenceReport:
    """Edge-level check, at every iteration until both engines settle, that
    BP uniformity coincides with WP non-nullness (messages and marks)."""
    layout = EdgeLayout.build(formula)
    bp = BpEngine(formula, layout)
    wp = WpEngine(formula, layout)
    cap = max(bp.convergence_cap, wp.convergence_cap) if max_rounds is None else max_rounds

    def verify(rnd: int) -> tuple | None:
        bad = np.nonzero((bp.v2c == BP_HALF) != (wp.v2c != WP_NULL))[0]
        if bad.size:
            return (rnd, "var_to_clause", int(bad[0]))
        bad = np.nonzero((bp.c2v == BP_HALF) != (wp.c2v != WP_NULL))[0]
        if bad.size:
            return (rnd, "clause_to_var", int(bad[0]))
        marg, _ = bp.marginals()
        marks = wp.marks_array()
        bad = np.nonzero((marg[1:] == BP_HALF) != (marks[1:] != WP_NULL))[0]
        if bad.size:
            return (rnd, "mark", int(bad[0]) + 1)
        return None

    ce = verify(0)
    rnd = 0
    while ce is None and rnd < cap:
        cb = bp.step() if not bp.converged else 0
        cw = wp.step() if not wp.converged else 0
        rnd += 1
        ce = verify(rnd)
        if cb == 0 and cw == 0:
            break
    return EquivalenceReport(ok=ce is None, rounds_checked=rnd, counterexample=ce)
