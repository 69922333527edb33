"""Shared test oracles: brute-force enumeration over all assignments,
random acyclic factor graphs, and adaptive Simpson quadrature.  These stay
independent of the library paths they check."""

from __future__ import annotations

import numpy as np
import pytest

from xorsat_lab.formula import XorsatFormula
from xorsat_lab.rng import derive_rng


def enumerate_solutions(formula: XorsatFormula) -> np.ndarray:
    """All satisfying assignments as a (count, n) bit array; n <= 20."""
    n = formula.n
    assert n <= 20
    grid = np.arange(1 << n, dtype=np.uint32)
    bits = ((grid[:, None] >> np.arange(n, dtype=np.uint32)) & 1).astype(np.uint8)
    ok = np.ones(len(grid), dtype=bool)
    ptr = formula.clause_ptr
    flat = formula.clause_vars_flat
    for i in range(formula.num_clauses):
        vs = flat[ptr[i]:ptr[i + 1]] - 1
        parity = bits[:, vs].sum(axis=1) % 2
        ok &= parity == formula.clause_rhs[i]
    return bits[ok]


def brute_marginal(solutions: np.ndarray, var: int) -> float | None:
    """Exact marginal of a 1-based variable from enumerated solutions."""
    if len(solutions) == 0:
        return None
    ones = int(solutions[:, var - 1].sum())
    if ones == 0:
        return 0.0
    if ones == len(solutions):
        return 1.0
    assert 2 * ones == len(solutions), "marginals must be half-integral"
    return 0.5


def brute_null_set(solutions: np.ndarray) -> frozenset:
    """1-based ids of variables on which all enumerated solutions agree."""
    assert len(solutions) > 0
    agree = np.nonzero(solutions.min(axis=0) == solutions.max(axis=0))[0]
    return frozenset(int(v) + 1 for v in agree)


def random_formula(i: int, *, n_max=80, k_choices=(3, 4, 5), d_lo=0.5, d_hi=3.0,
                   tag="rf", seed=1234) -> XorsatFormula:
    """A deterministic pseudo-random instance for test case ``i``."""
    from xorsat_lab.formula import generate_random

    rng = derive_rng(seed, tag, i)
    k = int(rng.choice(np.asarray(k_choices)))
    n = int(rng.integers(k + 2, max(n_max, k + 3)))
    d = float(rng.uniform(d_lo, d_hi))
    return generate_random(n, d, k, seed=seed * 100003 + i)


def random_tree_formula(i: int, *, n_max=120, k=3, tag="tree", seed=777) -> XorsatFormula:
    """A uniformly grown acyclic factor graph: each new clause picks one
    existing variable and brings width-1..k-1 fresh variables."""
    rng = derive_rng(seed, tag, i)
    n_target = int(rng.integers(3, n_max))
    clauses = []
    n = 1
    while n < n_target:
        width = int(rng.integers(2, k + 1))
        fresh = min(width - 1, n_target - n)
        if fresh == 0:
            break
        anchor = int(rng.integers(1, n + 1))
        vs = tuple(sorted([anchor] + list(range(n + 1, n + 1 + fresh))))
        clauses.append((vs, int(rng.integers(0, 2))))
        n += fresh
    return XorsatFormula.from_clauses(max(n, 3), k, clauses)


def simpson_adaptive(fn, a: float, b: float, tol: float = 1e-10, depth: int = 30) -> float:
    """Plain adaptive Simpson quadrature, used as the independent rule."""

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, tol, depth):
        x1 = 0.5 * (x0 + x2)
        lm, rm = 0.5 * (x0 + x1), 0.5 * (x1 + x2)
        flm, frm = fn(lm), fn(rm)
        left = simpson(x0, x1, f0, flm, f1)
        right = simpson(x1, x2, f1, frm, f2)
        if depth <= 0 or abs(left + right - whole) < 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (recurse(x0, x1, f0, flm, f1, left, tol / 2.0, depth - 1)
                + recurse(x1, x2, f1, frm, f2, right, tol / 2.0, depth - 1))

    mid = 0.5 * (a + b)
    f0, f1, f2 = fn(a), fn(mid), fn(b)
    return recurse(a, b, f0, f1, f2, simpson(a, b, f0, f1, f2), tol, depth)


@pytest.fixture
def rng():
    return derive_rng(20260810, "fixture")
