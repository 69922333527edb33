"""Bit-packed linear algebra over GF(2).

Two engines share the module:

* a dense bit-packed engine (``CheckSystem`` / ``RrefBasis``) that maintains
  a canonical reduced row-echelon form, supports incremental row insertion,
  and produces kernel reports with an explicit basis -- the workhorse at
  desk scale (n up to a few thousand);
* a sparse peel-and-core engine used by large experiments, which strips
  unit rows and privately-owned columns in linear time and only runs dense
  elimination on the remaining core.

Columns are numbered 0..n-1 internally; the public API speaks in variable
ids 1..n to match the formula layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import peel_kernel, ref_rank
from .formula import XorsatFormula

_ONE = np.uint64(1)


class UnsatisfiableError(ValueError):
    """Raised when an operation requires a consistent system."""


def pack_rows(n: int, ptr: np.ndarray, flat_cols: np.ndarray) -> np.ndarray:
    """Pack rows given in CSR form (0-based column ids) into uint64 words."""
    m = len(ptr) - 1
    W = max(1, (n + 63) // 64)
    rows = np.zeros((m, W), dtype=np.uint64)
    if len(flat_cols):
        row_idx = np.repeat(np.arange(m), np.diff(ptr))
        words = flat_cols >> 6
        bits = (_ONE << (flat_cols & 63).astype(np.uint64))
        np.bitwise_or.at(rows, (row_idx, words), bits)
    return rows


@dataclass
class CheckSystem:
    """Parity-check system A x = y with bit-packed rows."""

    n: int
    rows: np.ndarray  # uint64, shape (m, W)
    rhs: np.ndarray   # uint8, shape (m,)

    @property
    def num_rows(self) -> int:
        return len(self.rhs)

    @property
    def words(self) -> int:
        return self.rows.shape[1]


def build_check_system(formula: XorsatFormula) -> CheckSystem:
    """Row i has ones exactly at the variables of clause i; rhs is the folded
    parity target."""
    cols = (formula.clause_vars_flat.astype(np.int64) - 1)
    rows = pack_rows(formula.n, formula.clause_ptr, cols)
    return CheckSystem(formula.n, rows, formula.clause_rhs.copy())


@dataclass
class KernelReport:
    """Rank/kernel summary of a check system.

    The kernel basis is canonical: free columns in increasing order, basis
    vector j carrying a one at the j-th free column.  ``null_set`` holds the
    1-based ids of variables taking the same value in every solution.
    """

    n: int
    rank: int
    consistent: bool
    basis: list = field(repr=False)          # list of uint8 arrays, length n
    particular: np.ndarray | None = field(repr=False)
    null_set: frozenset = field(repr=False)

    @property
    def nullity(self) -> int:
        return self.n - self.rank

    def solution_count(self) -> int:
        if not self.consistent:
            return 0
        return 1 << self.nullity


class RrefBasis:
    """Reduced row-echelon basis with incremental row insertion.

    Each inserted row is reduced against the current pivots; a new pivot
    triggers one vectorized elimination pass over the stored rows, so the
    representation stays the unique RREF of everything pushed so far.
    """

    def __init__(self, n: int, capacity: int | None = None):
        self.n = n
        self.W = max(1, (n + 63) // 64)
        cap = capacity if capacity is not None else min(n, 1024)
        self._rows = np.zeros((max(cap, 16), self.W), dtype=np.uint64)
        self._rhs = np.zeros(max(cap, 16), dtype=np.uint8)
        self._pivot_col = np.full(n, -1, dtype=np.int64)   # col -> row index
        self._pivot_mask = np.zeros(self.W, dtype=np.uint64)
        self.rank = 0
        self.inconsistent = False

    # -- internals ---------------------------------------------------------

    def _grow(self):
        rows = np.zeros((self._rows.shape[0] * 2, self.W), dtype=np.uint64)
        rows[: self.rank] = self._rows[: self.rank]
        rhs = np.zeros(rows.shape[0], dtype=np.uint8)
        rhs[: self.rank] = self._rhs[: self.rank]
        self._rows, self._rhs = rows, rhs

    @staticmethod
    def _iter_bits(packed: np.ndarray):
        for w in np.nonzero(packed)[0]:
            word = int(packed[w])
            base = int(w) << 6
            while word:
                low = word & -word
                yield base + low.bit_length() - 1
                word ^= low

    def _reduce_vector(self, v: np.ndarray, b: int) -> tuple[np.ndarray, int]:
        hits = v & self._pivot_mask
        for col in self._iter_bits(hits):
            r = self._pivot_col[col]
            v ^= self._rows[r]
            b ^= int(self._rhs[r])
        return v, b

    # -- public ------------------------------------------------------------

    def push_packed(self, row: np.ndarray, rhs_bit: int) -> str:
        """Insert one packed row; returns 'added', 'dependent' or
        'inconsistent'."""
        v, b = self._reduce_vector(row.astype(np.uint64, copy=True), int(rhs_bit))
        nz = np.nonzero(v)[0]
        if nz.size == 0:
            if b:
                self.inconsistent = True
                return "inconsistent"
            return "dependent"
        w = int(nz[0])
        word = int(v[w])
        col = (w << 6) + ((word & -word).bit_length() - 1)
        if self.rank == self._rows.shape[0]:
            self._grow()
        # clear the new pivot column from every stored row
        colbit = (self._rows[: self.rank, w] >> np.uint64(col & 63)) & _ONE
        sel = np.nonzero(colbit)[0]
        if sel.size:
            self._rows[sel] ^= v
            self._rhs[sel] ^= np.uint8(b)
        self._rows[self.rank] = v
        self._rhs[self.rank] = b
        self._pivot_col[col] = self.rank
        self._pivot_mask[w] |= _ONE << np.uint64(col & 63)
        self.rank += 1
        return "added"

    def push_unit(self, col: int, rhs_bit: int) -> str:
        """Insert the unit row e_col = rhs_bit (col is 0-based)."""
        v = np.zeros(self.W, dtype=np.uint64)
        v[col >> 6] = _ONE << np.uint64(col & 63)
        return self.push_packed(v, rhs_bit)

    def push_cols(self, cols, rhs_bit: int) -> str:
        v = np.zeros(self.W, dtype=np.uint64)
        for c in cols:
            v[c >> 6] ^= _ONE << np.uint64(c & 63)
        return self.push_packed(v, rhs_bit)

    def pivot_row_of(self, col: int) -> int:
        return int(self._pivot_col[col])

    def forced_value(self, col: int) -> int | None:
        """The constant value of column ``col`` across all solutions, or
        None when the column is free to vary (assumes consistency)."""
        r = self._pivot_col[col]
        if r < 0:
            return None
        row = self._rows[r]
        if int(np.bitwise_count(row).sum()) == 1:
            return int(self._rhs[r])
        return None

    def free_columns(self) -> np.ndarray:
        return np.nonzero(self._pivot_col < 0)[0]

    def kernel_report(self) -> KernelReport:
        free = self.free_columns()
        weights = np.bitwise_count(self._rows[: self.rank]).sum(axis=1)
        pivot_cols = np.nonzero(self._pivot_col >= 0)[0]
        row_to_col = np.full(self.rank, -1, dtype=np.int64)
        row_to_col[self._pivot_col[pivot_cols]] = pivot_cols
        null_cols = [int(c) for c in pivot_cols if weights[self._pivot_col[c]] == 1]
        basis = []
        for f in free:
            vec = np.zeros(self.n, dtype=np.uint8)
            vec[f] = 1
            fb_word, fb_bit = int(f) >> 6, np.uint64(int(f) & 63)
            colbit = (self._rows[: self.rank, fb_word] >> fb_bit) & _ONE
            for r in np.nonzero(colbit)[0]:
                vec[row_to_col[r]] = 1
            basis.append(vec)
        particular = None
        if not self.inconsistent:
            particular = np.zeros(self.n, dtype=np.uint8)
            for c in np.nonzero(self._pivot_col >= 0)[0]:
                particular[c] = self._rhs[self._pivot_col[c]]
        return KernelReport(
            n=self.n,
            rank=self.rank,
            consistent=not self.inconsistent,
            basis=basis,
            particular=particular,
            null_set=frozenset(c + 1 for c in null_cols),
        )

    def dump_text(self) -> str:
        """Debug bitmap of the reduced matrix."""
        lines = []
        for r in range(self.rank):
            bits = "".join(
                "1" if (self._rows[r, c >> 6] >> np.uint64(c & 63)) & _ONE else "0"
                for c in range(self.n)
            )
            lines.append(f"{bits} | {int(self._rhs[r])}")
        return "\n".join(lines)


def reduce_system(system: CheckSystem) -> KernelReport:
    """Canonical RREF reduction of a full system."""
    basis = RrefBasis(system.n, capacity=min(system.n, system.num_rows + 1))
    for i in range(system.num_rows):
        basis.push_packed(system.rows[i], int(system.rhs[i]))
    return basis.kernel_report()


def rref_of(system: CheckSystem) -> RrefBasis:
    basis = RrefBasis(system.n, capacity=min(system.n, system.num_rows + 1))
    for i in range(system.num_rows):
        basis.push_packed(system.rows[i], int(system.rhs[i]))
    return basis


def null_variables(system: CheckSystem) -> frozenset:
    """Variables (1-based) that are zero in every kernel vector."""
    return reduce_system(system).null_set


def exact_marginal(formula: XorsatFormula, var: int) -> float | None:
    """P[x_var = 1] under a uniform random solution: 0, 0.5 or 1; None when
    the formula has no solution."""
    report = reduce_system(build_check_system(formula))
    if not report.consistent:
        return None
    if (var) not in report.null_set:
        return 0.5
    return float(report.particular[var - 1])


def sample_uniform_solution(report: KernelReport, rng: np.random.Generator) -> np.ndarray:
    """Particular solution XOR a uniform combination of kernel basis vectors;
    exactly uniform over the solution set.  Returns a 0-based uint8 array."""
    if not report.consistent:
        raise UnsatisfiableError("system has no solution")
    sol = report.particular.copy()
    if report.basis:
        coeffs = rng.integers(0, 2, size=len(report.basis), dtype=np.uint8)
        for c, vec in zip(coeffs, report.basis):
            if c:
                sol ^= vec
    return sol


# ---------------------------------------------------------------------------
# sparse peel-and-core engine
# ---------------------------------------------------------------------------

@dataclass
class PeelSummary:
    """Decomposition of a sparse system into peelable part and dense core."""

    rank: int
    consistent: bool
    forced: dict                      # var id -> forced bit (unit closure)
    core_rows: list                   # list of (list of var ids, rhs bit)
    core_vars: np.ndarray             # 1-based ids of core columns
    free_vars: np.ndarray             # 1-based ids never constrained
    pivot_cols: np.ndarray
    pivot_rhs: np.ndarray
    pivot_optr: np.ndarray
    pivot_others: np.ndarray


def _entry_structures(formula: XorsatFormula):
    flat = formula.clause_vars_flat.astype(np.int64)
    ptr = formula.clause_ptr
    m = formula.num_clauses
    entry_row = np.repeat(np.arange(m, dtype=np.int64), np.diff(ptr))
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=formula.n + 1)
    vptr = np.zeros(formula.n + 2, dtype=np.int64)
    np.cumsum(counts, out=vptr[1:])
    return flat, ptr, entry_row, order, vptr


def peel_decompose(formula: XorsatFormula, live_vars: np.ndarray | None = None) -> PeelSummary:
    """Peel the system of a formula down to its dense core.

    ``live_vars`` is a boolean mask over 0..n of which variable ids count as
    columns (defaults to all); variables outside the mask must not occur in
    any clause.
    """
    n = formula.n
    if live_vars is None:
        live_vars = np.ones(n + 1, dtype=np.uint8)
        live_vars[0] = 0
    flat, ptr, entry_row, ventry, vptr = _entry_structures(formula)
    (rank, inconsistent, row_alive, width, rrhs, col_deg, var_mode,
     forced_val, piv_col, piv_rhs, piv_optr, piv_others) = peel_kernel(
        n, ptr, flat, formula.clause_rhs.copy(), vptr, ventry, entry_row,
        np.ascontiguousarray(live_vars, dtype=np.uint8))

    forced = {int(v): int(forced_val[v]) for v in np.nonzero(var_mode == 1)[0]}
    core_rows = []
    for r in np.nonzero(row_alive)[0]:
        vs = [int(v) for v in flat[ptr[r]:ptr[r + 1]] if var_mode[v] == 0]
        core_rows.append((vs, int(rrhs[r])))
    is_core_var = (var_mode == 0) & (col_deg > 0)
    is_core_var[0] = False
    core_vars = np.nonzero(is_core_var)[0]
    is_free = (var_mode == 0) & (col_deg == 0) & (live_vars.astype(bool))
    is_free[0] = False
    free_vars = np.nonzero(is_free)[0]
    return PeelSummary(
        rank=int(rank),
        consistent=not bool(inconsistent),
        forced=forced,
        core_rows=core_rows,
        core_vars=core_vars,
        free_vars=free_vars,
        pivot_cols=piv_col,
        pivot_rhs=piv_rhs,
        pivot_optr=piv_optr,
        pivot_others=piv_others,
    )


def _core_packed(summary: PeelSummary) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    core_ids = summary.core_vars
    remap = {int(v): i for i, v in enumerate(core_ids)}
    m = len(summary.core_rows)
    ptr = np.zeros(m + 1, dtype=np.int64)
    for i, (vs, _) in enumerate(summary.core_rows):
        ptr[i + 1] = ptr[i] + len(vs)
    flat = np.empty(int(ptr[-1]), dtype=np.int64)
    rhs = np.empty(m, dtype=np.uint8)
    for i, (vs, b) in enumerate(summary.core_rows):
        flat[ptr[i]:ptr[i + 1]] = [remap[v] for v in vs]
        rhs[i] = b
    rows = pack_rows(max(len(core_ids), 1), ptr, flat)
    return rows, rhs, core_ids


def sparse_rank(formula: XorsatFormula, live_vars: np.ndarray | None = None) -> tuple[int, bool]:
    """(rank, consistent) of a formula's system via peeling + dense core."""
    summary = peel_decompose(formula, live_vars)
    if not summary.core_rows:
        return summary.rank, summary.consistent
    rows, rhs, _ = _core_packed(summary)
    core_rank, core_ok = ref_rank(rows, rhs.copy())
    return summary.rank + int(core_rank), summary.consistent and bool(core_ok)


def sparse_solve(formula: XorsatFormula, rng: np.random.Generator,
                 live_vars: np.ndarray | None = None) -> np.ndarray | None:
    """Draw an exactly uniform solution of a sparse system, or None if
    unsatisfiable.  Returns a uint8 array indexed by variable id (1-based)."""
    summary = peel_decompose(formula, live_vars)
    if not summary.consistent:
        return None
    n = formula.n
    val = np.zeros(n + 1, dtype=np.uint8)
    if summary.core_rows:
        rows, rhs, core_ids = _core_packed(summary)
        basis = RrefBasis(len(core_ids), capacity=len(core_ids) + 1)
        for i in range(rows.shape[0]):
            basis.push_packed(rows[i], int(rhs[i]))
        report = basis.kernel_report()
        if not report.consistent:
            return None
        core_sol = sample_uniform_solution(report, rng)
        val[core_ids] = core_sol
    if summary.free_vars.size:
        val[summary.free_vars] = rng.integers(0, 2, size=summary.free_vars.size, dtype=np.uint8)
    for v, b in summary.forced.items():
        val[v] = b
    # back-substitute privately-owned pivots in reverse peel order
    piv_col = summary.pivot_cols
    piv_rhs = summary.pivot_rhs
    optr = summary.pivot_optr
    others = summary.pivot_others
    for i in range(len(piv_col) - 1, -1, -1):
        b = int(piv_rhs[i])
        for j in range(optr[i], optr[i + 1]):
            b ^= int(val[others[j]])
        val[piv_col[i]] = b
    return val


def sparse_null_variables(formula: XorsatFormula,
                          live_vars: np.ndarray | None = None) -> np.ndarray:
    """Boolean mask (1-based) of variables constant across all solutions,
    computed from the peel decomposition; assumes a consistent system.

    Each variable's value over the kernel is a linear functional of the free
    coordinates (free variables plus core kernel directions); propagating
    the packed functionals through the pivot stack and testing for zero
    handles variables that are forced only through cancellations.
    """
    if live_vars is None:
        live_vars = np.ones(formula.n + 1, dtype=np.uint8)
        live_vars[0] = 0
    summary = peel_decompose(formula, live_vars)
    n = formula.n
    core_basis: list = []
    core_ids = np.zeros(0, dtype=np.int64)
    if summary.core_rows:
        rows, rhs, core_ids = _core_packed(summary)
        basis = RrefBasis(len(core_ids), capacity=len(core_ids) + 1)
        for i in range(rows.shape[0]):
            basis.push_packed(rows[i], int(rhs[i]))
        core_basis = basis.kernel_report().basis
    dim = len(summary.free_vars) + len(core_basis)
    W = max(1, (dim + 63) // 64)
    func = np.zeros((n + 1, W), dtype=np.uint64)
    for j, v in enumerate(summary.free_vars):
        func[v, j >> 6] |= _ONE << np.uint64(j & 63)
    for j, vec in enumerate(core_basis):
        coord = len(summary.free_vars) + j
        hit = core_ids[np.nonzero(vec)[0]]
        func[hit, coord >> 6] ^= _ONE << np.uint64(coord & 63)
    piv_col = summary.pivot_cols
    optr = summary.pivot_optr
    others = summary.pivot_others
    for i in range(len(piv_col) - 1, -1, -1):
        acc = np.zeros(W, dtype=np.uint64)
        for j in range(optr[i], optr[i + 1]):
            acc ^= func[others[j]]
        func[piv_col[i]] = acc
    null = ~func.any(axis=1)
    null &= live_vars.astype(bool)
    null[0] = False
    return null
