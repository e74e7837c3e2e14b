"""CNF formulas, DIMACS I/O, assignments and unsatisfied-clause counters.

Literals are DIMACS-style signed integers: ``v`` is the positive literal of
variable ``v`` (1-based) and ``-v`` its negation. A clause is a tuple of
literals over pairwise distinct variables; a formula keeps its clauses in
input order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

Clause = tuple  # tuple[int, ...]

BRUTE_FORCE_MAX_VARS = 24


class DimacsError(ValueError):
    """Malformed DIMACS input."""


class TautologyError(ValueError):
    """A clause contains a variable and its negation."""


def make_clause(literals: Iterable[int]) -> Clause:
    """Build a clause, merging duplicate literals and keeping first-seen order.

    Raises TautologyError when a variable occurs in both polarities.
    """
    seen: dict[int, int] = {}
    out = []
    for lit in literals:
        lit = int(lit)
        if lit == 0:
            raise ValueError("0 is not a literal")
        v = abs(lit)
        prev = seen.get(v)
        if prev is None:
            seen[v] = lit
            out.append(lit)
        elif prev != lit:
            raise TautologyError(f"clause contains both {v} and -{v}")
    return tuple(out)


def canonical(clause: Iterable[int]) -> Clause:
    """Literals sorted by (variable, sign), positive before negative."""
    return tuple(sorted(set(clause), key=lambda lit: (abs(lit), lit < 0)))


def width(clause: Clause) -> int:
    return len(clause)


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple

    def __post_init__(self):
        if self.num_vars < 0:
            raise ValueError("num_vars must be non-negative")
        clauses = tuple(make_clause(c) for c in self.clauses)
        for c in clauses:
            for lit in c:
                if abs(lit) > self.num_vars:
                    raise ValueError(
                        f"literal {lit} exceeds num_vars={self.num_vars}")
        object.__setattr__(self, "clauses", clauses)

    def __len__(self):
        return len(self.clauses)

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def has_empty_clause(self) -> bool:
        return any(len(c) == 0 for c in self.clauses)

    def extended(self, extra: Iterable[Clause]) -> "CnfFormula":
        """F followed by the extra clauses (occurrences kept separately)."""
        return CnfFormula(self.num_vars, self.clauses + tuple(extra))


def parse_dimacs(text) -> CnfFormula:
    """Parse DIMACS CNF from ``str`` or ``bytes``.

    A clause-count mismatch against the header only logs a warning.
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("ascii")
    header = None
    clauses = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            if header is not None:
                raise DimacsError(f"line {lineno}: duplicate header")
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"line {lineno}: malformed header {line!r}")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise DimacsError(f"line {lineno}: malformed header {line!r}") from None
            if header[0] < 0 or header[1] < 0:
                raise DimacsError(f"line {lineno}: negative counts in header")
            continue
        if header is None:
            raise DimacsError(f"line {lineno}: clause before 'p cnf' header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"line {lineno}: bad token {tok!r}") from None
            if lit == 0:
                try:
                    clauses.append(make_clause(current))
                except TautologyError as exc:
                    raise DimacsError(f"line {lineno}: {exc}") from None
                current = []
            else:
                if abs(lit) > header[0]:
                    raise DimacsError(
                        f"line {lineno}: literal {lit} out of range 1..{header[0]}")
                current.append(lit)
    if header is None:
        raise DimacsError("missing 'p cnf' header")
    if current:
        raise DimacsError("last clause is not zero-terminated")
    if len(clauses) != header[1]:
        log.warning("header declares %d clauses, found %d", header[1], len(clauses))
    return CnfFormula(header[0], tuple(clauses))


def emit_dimacs(f: CnfFormula, comments: Sequence[str] = ()) -> bytes:
    lines = [f"c {c}" for c in comments]
    lines.append(f"p cnf {f.num_vars} {len(f.clauses)}")
    for c in f.clauses:
        lines.append(" ".join([str(lit) for lit in c] + ["0"]))
    return ("\n".join(lines) + "\n").encode("ascii")


class Assignment:
    """Complete truth assignment; ``values[v - 1]`` is the value of variable v."""

    __slots__ = ("values",)

    def __init__(self, values):
        self.values = np.array(values, dtype=np.uint8).ravel()
        if self.values.size and self.values.max() > 1:
            raise ValueError("assignment values must be 0 or 1")

    @classmethod
    def zeros(cls, n: int) -> "Assignment":
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Assignment":
        return cls(rng.integers(0, 2, size=n, dtype=np.uint8))

    def __len__(self):
        return self.values.size

    def __getitem__(self, var: int) -> int:
        return int(self.values[var - 1])

    def __eq__(self, other):
        return isinstance(other, Assignment) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"Assignment({''.join(map(str, self.values.tolist()))})"

    def copy(self) -> "Assignment":
        return Assignment(self.values.copy())

    def flip_inplace(self, var: int) -> None:
        if not 1 <= var <= self.values.size:
            raise IndexError(f"variable {var} out of range 1..{self.values.size}")
        self.values[var - 1] ^= 1

    def satisfies_literal(self, lit: int) -> bool:
        return bool(self.values[abs(lit) - 1]) == (lit > 0)

    def tolist(self) -> list[int]:
        return self.values.tolist()


def flip(a: Assignment, var: int) -> Assignment:
    out = a.copy()
    out.flip_inplace(var)
    return out


def _check_length(f: CnfFormula, a: Assignment):
    if len(a) != f.num_vars:
        raise ValueError(f"assignment has {len(a)} values, formula has {f.num_vars} variables")


def clause_satisfied(clause: Clause, a: Assignment) -> bool:
    return any(a.satisfies_literal(lit) for lit in clause)


def evaluate(f: CnfFormula, a: Assignment) -> bool:
    _check_length(f, a)
    return all(clause_satisfied(c, a) for c in f.clauses)


def count_unsat(g: CnfFormula, b: Assignment, containing: int | None = None,
                not_containing: int | None = None) -> int:
    """Size of UNSAT_G(b), optionally restricted to clauses with / without a variable.

    At most one of ``containing`` and ``not_containing`` may be given.
    """
    _check_length(g, b)
    if containing is not None and not_containing is not None:
        raise ValueError("give at most one variable filter")
    x = containing if containing is not None else not_containing
    if x is not None and not 1 <= x <= g.num_vars:
        raise ValueError(f"variable {x} out of range")
    n = 0
    for c in g.clauses:
        if clause_satisfied(c, b):
            continue
        if x is not None:
            has_x = any(abs(lit) == x for lit in c)
            if has_x != (containing is not None):
                continue
        n += 1
    return n


def model_mask(f: CnfFormula, chunk: int = 1 << 20) -> np.ndarray:
    """Boolean vector over all 2**n assignments; bit v-1 of the index is variable v."""
    n = f.num_vars
    if n > BRUTE_FORCE_MAX_VARS:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_VARS} variables, got {n}")
    total = 1 << n
    out = np.empty(total, dtype=bool)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        ok = np.ones(idx.size, dtype=bool)
        for c in f.clauses:
            sat = np.zeros(idx.size, dtype=bool)
            for lit in c:
                bit = (idx >> (abs(lit) - 1)) & 1
                sat |= bit.astype(bool) if lit > 0 else ~bit.astype(bool)
            ok &= sat
            if not ok.any():
                break
        out[start:start + idx.size] = ok
    return out


def index_to_assignment(index: int, n: int) -> Assignment:
    return Assignment([(index >> i) & 1 for i in range(n)])


def brute_force_satisfiable(f: CnfFormula) -> tuple[bool, Assignment | None]:
    mask = model_mask(f)
    hits = np.flatnonzero(mask)
    if hits.size == 0:
        return False, None
    return True, index_to_assignment(int(hits[0]), f.num_vars)
