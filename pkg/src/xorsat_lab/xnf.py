"""XNF text format: XOR clauses as signed literal lines.

Layout: optional comment lines starting with ``c``, a header
``p xnf <n> <m>``, then ``m`` clause lines of nonzero integers terminated by
``0``.  A negative literal is a negated variable; a clause asserts that the
XOR of its literals is true.  The canonical writer emits the folded form:
all-positive literals when the parity target is 1, and exactly one leading
negative literal when it is 0.
"""

from __future__ import annotations

import os
from typing import TextIO

from .formula import Clause, XorsatFormula


class XnfParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def read_xnf(path_or_file: str | os.PathLike | TextIO) -> XorsatFormula:
    """Parse an XNF file into folded (vars, rhs) form."""
    if hasattr(path_or_file, "read"):
        return _parse(path_or_file)
    with open(path_or_file, "r", encoding="utf-8") as fh:
        return _parse(fh)


def _parse(fh: TextIO) -> XorsatFormula:
    n = m = None
    clauses: list[Clause] = []
    header_line = 0
    for lineno, raw in enumerate(fh, start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if n is not None:
                raise XnfParseError("duplicate header", lineno)
            parts = line.split()
            if len(parts) != 4 or parts[0] != "p" or parts[1] != "xnf":
                raise XnfParseError(f"malformed header {line!r}", lineno)
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise XnfParseError(f"malformed header {line!r}", lineno) from None
            if n < 1 or m < 0:
                raise XnfParseError("header counts out of range", lineno)
            header_line = lineno
            continue
        if n is None:
            raise XnfParseError("clause before header", lineno)
        try:
            lits = [int(tok) for tok in line.split()]
        except ValueError:
            raise XnfParseError(f"non-integer token in {line!r}", lineno) from None
        if not lits or lits[-1] != 0:
            raise XnfParseError("clause line must end with 0", lineno)
        lits = lits[:-1]
        if any(l == 0 for l in lits):
            raise XnfParseError("literal 0 inside clause", lineno)
        if not lits:
            raise XnfParseError("empty clause", lineno)
        vs = sorted(abs(l) for l in lits)
        if any(v > n for v in vs):
            raise XnfParseError(f"variable id out of range (n={n})", lineno)
        if any(vs[i] == vs[i + 1] for i in range(len(vs) - 1)):
            raise XnfParseError("repeated variable in clause", lineno)
        negs = sum(1 for l in lits if l < 0)
        clauses.append(Clause(tuple(vs), (1 + negs) % 2))
    if n is None:
        raise XnfParseError("missing header", max(header_line, 1))
    if len(clauses) != m:
        raise XnfParseError(f"header promised {m} clauses, found {len(clauses)}", header_line)
    k = max((c.width for c in clauses), default=3)
    return XorsatFormula.from_clauses(n, max(k, 3), clauses)


def format_xnf(formula: XorsatFormula) -> str:
    """Canonical XNF text for a formula."""
    lines = [f"p xnf {formula.n} {formula.num_clauses}"]
    ptr = formula.clause_ptr
    flat = formula.clause_vars_flat
    rhs = formula.clause_rhs
    for i in range(formula.num_clauses):
        vs = flat[ptr[i]:ptr[i + 1]].tolist()
        if rhs[i] == 0:
            vs = [-vs[0]] + vs[1:]
        lines.append(" ".join(str(v) for v in vs) + " 0")
    return "\n".join(lines) + "\n"


def write_xnf(formula: XorsatFormula, path: str | os.PathLike) -> None:
    """Write the canonical form atomically (temp file + rename)."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(format_xnf(formula))
    os.replace(tmp, path)
