"""XOR-constraint formulas: representation, random generation, substitution,
and factor-graph neighborhood queries.

A clause is a set of distinct variables together with a parity target: the
clause is satisfied iff the mod-2 sum of its variables' values equals the
target.  Negation signs from literal representations are folded into the
target bit, so no sign bookkeeping is needed downstream.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .rng import derive_rng


class InvalidParameters(ValueError):
    """Raised for out-of-range model parameters or malformed arguments."""


@dataclass(frozen=True)
class Clause:
    """Parity constraint: sum of ``vars`` over GF(2) equals ``rhs``."""

    vars: tuple[int, ...]
    rhs: int

    def __post_init__(self):
        if len(self.vars) == 0:
            raise InvalidParameters("clause must contain at least one variable")
        if any(self.vars[i] >= self.vars[i + 1] for i in range(len(self.vars) - 1)):
            raise InvalidParameters("clause variables must be strictly sorted")
        if self.rhs not in (0, 1):
            raise InvalidParameters("clause rhs must be 0 or 1")

    @property
    def width(self) -> int:
        return len(self.vars)


class SubstitutionStatus(enum.Enum):
    CONSISTENT = "consistent"
    VIOLATED = "violated"


# variable ids are 1-based; arrays below use the ids directly.
class XorsatFormula:
    """Immutable XOR formula over variables 1..n, stored in flat arrays.

    ``n`` is the size of the variable universe (ids stay stable under
    substitution); ``k`` records the generation width.  Large instances stay
    array-backed; ``clauses`` materializes `Clause` objects on demand.
    """

    __slots__ = ("n", "k", "_ptr", "_vars", "_rhs", "_clauses_cache")

    def __init__(self, n: int, k: int, ptr: np.ndarray, flat_vars: np.ndarray, rhs: np.ndarray):
        self.n = int(n)
        self.k = int(k)
        self._ptr = np.ascontiguousarray(ptr, dtype=np.int64)
        self._vars = np.ascontiguousarray(flat_vars, dtype=np.int32)
        self._rhs = np.ascontiguousarray(rhs, dtype=np.uint8)
        self._clauses_cache: tuple[Clause, ...] | None = None
        if self.n < 1:
            raise InvalidParameters("n must be positive")
        if len(self._ptr) != self.num_clauses + 1:
            raise InvalidParameters("clause pointer array inconsistent")
        if self._vars.size and (self._vars.min() < 1 or self._vars.max() > self.n):
            raise InvalidParameters("variable id out of range")

    @classmethod
    def from_clauses(cls, n: int, k: int, clauses: Iterable[Clause | tuple]) -> "XorsatFormula":
        norm = []
        for c in clauses:
            if not isinstance(c, Clause):
                c = Clause(tuple(sorted(c[0])), int(c[1]))
            norm.append(c)
        ptr = np.zeros(len(norm) + 1, dtype=np.int64)
        for i, c in enumerate(norm):
            if len(set(c.vars)) != len(c.vars):
                raise InvalidParameters("duplicate variable inside a clause")
            ptr[i + 1] = ptr[i] + len(c.vars)
        flat = np.empty(int(ptr[-1]), dtype=np.int32)
        rhs = np.empty(len(norm), dtype=np.uint8)
        for i, c in enumerate(norm):
            flat[ptr[i]:ptr[i + 1]] = c.vars
            rhs[i] = c.rhs
        return cls(n, k, ptr, flat, rhs)

    @property
    def num_clauses(self) -> int:
        return len(self._rhs)

    @property
    def clause_ptr(self) -> np.ndarray:
        return self._ptr

    @property
    def clause_vars_flat(self) -> np.ndarray:
        return self._vars

    @property
    def clause_rhs(self) -> np.ndarray:
        return self._rhs

    def clause_width(self, i: int) -> int:
        return int(self._ptr[i + 1] - self._ptr[i])

    def widths(self) -> np.ndarray:
        return np.diff(self._ptr)

    def clause(self, i: int) -> Clause:
        lo, hi = int(self._ptr[i]), int(self._ptr[i + 1])
        return Clause(tuple(int(v) for v in self._vars[lo:hi]), int(self._rhs[i]))

    @property
    def clauses(self) -> tuple[Clause, ...]:
        if self._clauses_cache is None:
            self._clauses_cache = tuple(self.clause(i) for i in range(self.num_clauses))
        return self._clauses_cache

    def variables_used(self) -> np.ndarray:
        return np.unique(self._vars)

    def is_satisfied_by(self, assignment: np.ndarray) -> bool:
        """Check a full 1-indexed assignment (array of length n+1 or n)."""
        vals = np.asarray(assignment, dtype=np.uint8)
        if vals.shape[0] == self.n:
            vals = np.concatenate([[0], vals]).astype(np.uint8)
        if self.num_clauses == 0:
            return True
        parity = np.add.reduceat(vals[self._vars].astype(np.int64), self._ptr[:-1]) % 2
        return bool(np.all(parity.astype(np.uint8) == self._rhs))

    def __eq__(self, other) -> bool:
        if not isinstance(other, XorsatFormula):
            return NotImplemented
        return (
            self.n == other.n
            and self.k == other.k
            and np.array_equal(self._ptr, other._ptr)
            and np.array_equal(self._vars, other._vars)
            and np.array_equal(self._rhs, other._rhs)
        )

    def __repr__(self) -> str:
        return f"XorsatFormula(n={self.n}, k={self.k}, m={self.num_clauses})"


PartialAssignment = Mapping[int, int]


def generate_random(n: int, d: float, k: int, seed: int) -> XorsatFormula:
    """Draw a random width-k formula: Poisson(d*n/k) clauses, each on k
    distinct uniform variables with a uniform sign pattern folded into rhs.

    Deterministic given ``seed``; duplicate clauses are allowed.
    """
    if k < 3 or n < k:
        raise InvalidParameters(f"need n >= k >= 3, got n={n}, k={k}")
    if d < 0:
        raise InvalidParameters("mean degree d must be nonnegative")
    m = int(derive_rng(seed, "gen.count").poisson(d * n / k))
    var_rng = derive_rng(seed, "gen.vars")
    rows = np.empty((m, k), dtype=np.int32)
    if m:
        rows[:] = var_rng.integers(1, n + 1, size=(m, k), dtype=np.int32)
        # reject rows with a repeated variable and redraw them
        while True:
            rows.sort(axis=1)
            bad = np.nonzero((rows[:, 1:] == rows[:, :-1]).any(axis=1))[0]
            if bad.size == 0:
                break
            rows[bad] = var_rng.integers(1, n + 1, size=(bad.size, k), dtype=np.int32)
    neg = derive_rng(seed, "gen.signs").integers(0, 2, size=(m, k), dtype=np.uint8)
    rhs = ((1 + neg.sum(axis=1)) % 2).astype(np.uint8)
    ptr = np.arange(0, (m + 1) * k, k, dtype=np.int64)
    return XorsatFormula(n, k, ptr, rows.reshape(-1), rhs)


def substitute(
    formula: XorsatFormula, sigma: PartialAssignment
) -> tuple[XorsatFormula, SubstitutionStatus]:
    """Fold assigned variables into clause parity targets.

    Clauses emptied with rhs 0 are dropped as satisfied; an emptied clause
    with rhs 1 marks the result VIOLATED (and is dropped as well).
    """
    for v in sigma:
        if not (1 <= v <= formula.n):
            raise InvalidParameters(f"assigned variable {v} outside universe")
    assigned = np.zeros(formula.n + 1, dtype=bool)
    value = np.zeros(formula.n + 1, dtype=np.uint8)
    for v, b in sigma.items():
        assigned[v] = True
        value[v] = b & 1

    flat = formula.clause_vars_flat
    ptr = formula.clause_ptr
    keep_entry = ~assigned[flat]
    m = formula.num_clauses
    if m == 0:
        return XorsatFormula(formula.n, formula.k, ptr.copy(), flat.copy(), formula.clause_rhs.copy()), SubstitutionStatus.CONSISTENT

    contrib = value[flat] * assigned[flat]
    fold = np.add.reduceat(contrib.astype(np.int64), ptr[:-1]) % 2
    new_rhs = (formula.clause_rhs ^ fold.astype(np.uint8)).astype(np.uint8)
    new_width = np.add.reduceat(keep_entry.astype(np.int64), ptr[:-1])

    violated = bool(np.any((new_width == 0) & (new_rhs == 1)))
    keep_clause = new_width > 0
    new_ptr = np.zeros(int(keep_clause.sum()) + 1, dtype=np.int64)
    np.cumsum(new_width[keep_clause], out=new_ptr[1:])
    new_flat = flat[keep_entry]
    # entries of dropped clauses are already excluded: their kept width is 0
    out = XorsatFormula(formula.n, formula.k, new_ptr, new_flat, new_rhs[keep_clause])
    status = SubstitutionStatus.VIOLATED if violated else SubstitutionStatus.CONSISTENT
    return out, status


@dataclass(frozen=True)
class NeighborhoodReport:
    """BFS ball around a factor-graph vertex."""

    center: tuple[str, int]
    by_distance: tuple[frozenset, ...]  # index r -> vertices at distance exactly r
    acyclic: bool

    @property
    def ball(self) -> frozenset:
        out: set = set()
        for layer in self.by_distance:
            out |= layer
        return frozenset(out)

    @property
    def boundary(self) -> frozenset:
        return self.by_distance[-1] if self.by_distance else frozenset()


class FactorGraph:
    """Bipartite adjacency between variables ('v', i) and clauses ('c', j)."""

    def __init__(self, formula: XorsatFormula):
        self.formula = formula
        flat = formula.clause_vars_flat
        ptr = formula.clause_ptr
        order = np.argsort(flat, kind="stable")
        self._var_sorted_clause = np.repeat(
            np.arange(formula.num_clauses, dtype=np.int64), np.diff(ptr)
        )[order]
        counts = np.bincount(flat, minlength=formula.n + 1)
        self._var_ptr = np.zeros(formula.n + 2, dtype=np.int64)
        np.cumsum(counts, out=self._var_ptr[1:])

    def clauses_of(self, v: int) -> np.ndarray:
        return self._var_sorted_clause[self._var_ptr[v]:self._var_ptr[v + 1]]

    def vars_of(self, c: int) -> np.ndarray:
        ptr = self.formula.clause_ptr
        return self.formula.clause_vars_flat[ptr[c]:ptr[c + 1]]

    def degree(self, vertex: tuple[str, int]) -> int:
        kind, idx = vertex
        if kind == "v":
            return int(self._var_ptr[idx + 1] - self._var_ptr[idx])
        return self.formula.clause_width(idx)


def neighborhood(formula: XorsatFormula, vertex: tuple[str, int], radius: int) -> NeighborhoodReport:
    """Vertices within ``radius`` factor-graph hops of ``vertex``, layered by
    exact distance, plus acyclicity of the induced subgraph.
    """
    kind, idx = vertex
    if kind == "v":
        if not (1 <= idx <= formula.n):
            raise InvalidParameters(f"unknown variable {idx}")
    elif kind == "c":
        if not (0 <= idx < formula.num_clauses):
            raise InvalidParameters(f"unknown clause {idx}")
    else:
        raise InvalidParameters(f"unknown vertex kind {kind!r}")

    fg = FactorGraph(formula)
    dist = {vertex: 0}
    layers: list[set] = [{vertex}]
    frontier = deque([vertex])
    while frontier and len(layers) <= radius:
        next_layer: set = set()
        for _ in range(len(frontier)):
            u = frontier.popleft()
            ukind, uidx = u
            if ukind == "v":
                nbrs = [("c", int(c)) for c in fg.clauses_of(uidx)]
            else:
                nbrs = [("v", int(v)) for v in fg.vars_of(uidx)]
            for w in nbrs:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    next_layer.add(w)
        if not next_layer:
            break
        layers.append(next_layer)
        frontier.extend(sorted(next_layer))

    ball = set(dist)
    # count induced edges: for every clause in the ball, edges to in-ball vars
    edges = 0
    for (ckind, cidx) in ball:
        if ckind != "c":
            continue
        for v in fg.vars_of(cidx):
            if ("v", int(v)) in ball:
                edges += 1
    acyclic = edges <= len(ball) - 1
    return NeighborhoodReport(vertex, tuple(frozenset(l) for l in layers), acyclic)
