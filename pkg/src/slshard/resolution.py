"""Width-restricted resolution closure and random extension sets.

Clause sets here are sets of canonical clauses (see ``cnf.canonical``).
Tautological resolvents are dropped. Closures with every clause of width at
most 4 run in a compiled engine; wider ones over at most 12 variables run in a
compiled bitmask engine, and the rest use the set-based reference code.
Candidate pools are ordered by width, then literal-wise in canonical literal
order; this order also decides which clauses survive a ``max_clauses`` cut.
"""
from __future__ import annotations

import hashlib
from collections import OrderedDict, defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .cnf import CnfFormula, canonical, emit_dimacs
from .rng import numpy_rng
from . import _closure_bits as nbits
from . import _closure_nb as nb

DEFAULT_W = 4
DEFAULT_MAX_CLAUSES = 10**6
DEFAULT_MAX_ROUNDS = 64
# largest seen-clause bitmap (bits) before the closure falls back to a hash set
BITMAP_MAX_BITS = 1 << 31


class PivotError(ValueError):
    pass


@dataclass(frozen=True)
class Limits:
    max_clauses: int = DEFAULT_MAX_CLAUSES
    max_rounds: int = DEFAULT_MAX_ROUNDS

    def __post_init__(self):
        if self.max_clauses < 1 or self.max_rounds < 1:
            raise ValueError("limits must be positive")


@dataclass(frozen=True)
class ClosureStats:
    rounds: int
    closure_size: int
    candidate_pool_size: int
    truncated: bool = False
    reason: str = ""


@dataclass(frozen=True)
class ExtensionSet:
    resolvents: tuple
    source_formula_hash: str
    w: int | None
    p: float
    seed: int
    truncated: bool = False

    def __len__(self):
        return len(self.resolvents)

    def header_comments(self) -> list[str]:
        w = "none" if self.w is None else str(self.w)
        return [f"extension w={w} p={self.p!r} seed={self.seed} "
                f"source={self.source_formula_hash} truncated={int(self.truncated)}"]

    def to_dimacs(self, num_vars: int) -> bytes:
        return emit_dimacs(CnfFormula(num_vars, self.resolvents), self.header_comments())


def formula_hash(f: CnfFormula) -> str:
    return hashlib.sha256(emit_dimacs(f)).hexdigest()


def resolve(c1, c2, pivot: int):
    """Resolvent of ``c1`` and ``c2`` on variable ``pivot``, or None for a tautology.

    Either clause may hold the positive occurrence of the pivot.
    """
    pivot = abs(pivot)
    if pivot in c1 and -pivot in c2:
        pos, neg = c1, c2
    elif -pivot in c1 and pivot in c2:
        pos, neg = c2, c1
    else:
        raise PivotError(f"variable {pivot} is not complementary across the clauses")
    lits = {lit for lit in pos if lit != pivot} | {lit for lit in neg if lit != -pivot}
    if any(-lit in lits for lit in lits):
        return None
    return canonical(lits)


def _resolvents(new: Iterable, old_index: dict, w: int | None):
    """All width-bounded non-tautological resolvents between ``new`` and indexed clauses."""
    out = set()
    for c1 in new:
        for lit in c1:
            for c2 in old_index.get(-lit, ()):
                lits = set(c1)
                lits.discard(lit)
                lits.update(c2)
                lits.discard(-lit)
                if w is not None and len(lits) > w:
                    continue
                if any(-x in lits for x in lits):
                    continue
                out.add(canonical(lits))
    return out


def _index(clauses) -> dict:
    idx = defaultdict(list)
    for c in clauses:
        for lit in c:
            idx[lit].append(c)
    return idx


def res_w_step(f, w: int | None) -> frozenset:
    """One application of the width-w resolution operator (``w=None``: unrestricted)."""
    clauses = frozenset(canonical(c) for c in f)
    return clauses | _resolvents(clauses, _index(clauses), w)


def _code(lit: int) -> int:
    return 2 * (abs(lit) - 1) + (lit < 0)


def _order_key(c):
    return (len(c), tuple(_code(x) for x in c))


def res_w_star(f, w: int | None, limits: Limits = Limits(),
               engine: str = "auto") -> tuple[frozenset, ClosureStats]:
    """Fixpoint of ``res_w_step``; ``engine`` is auto, compiled, bitmask or reference."""
    base = tuple(sorted({canonical(c) for c in f}, key=_order_key))
    kind = _pick_engine(base, w, engine)
    if kind == "reference":
        return _closure_reference(base, w, limits)
    run = _closure_compiled if kind == "compiled" else _closure_bits
    lits, widths, stats = run(base, w, limits)
    return frozenset(_rows_to_clauses(lits, widths)), stats


def _pick_engine(base, w, engine: str) -> str:
    if engine not in ("auto", "compiled", "bitmask", "reference"):
        raise ValueError(f"unknown closure engine {engine!r}")
    ok = (w is not None and w <= nb.MAXW and all(len(c) <= nb.MAXW for c in base)
          and all(_code(x) <= nb.MAX_CODE for c in base for x in c))
    small = max((abs(x) for c in base for x in c), default=0) <= nbits.MAX_VARS
    if engine == "compiled" and not ok:
        raise ValueError("compiled closure needs w <= 4, clauses of width <= 4 "
                         "and fewer than 16384 variables")
    if engine == "bitmask" and not small:
        raise ValueError(f"bitmask closure needs at most {nbits.MAX_VARS} variables")
    if engine != "auto":
        return engine
    return "compiled" if ok else "bitmask" if small else "reference"


def _rows_to_clauses(lits: np.ndarray, widths: np.ndarray) -> list:
    """Signed-literal rows (zero padded) to canonical tuples."""
    return [tuple(int(x) for x in row[:k]) for row, k in zip(lits.tolist(), widths.tolist())]


def _codes_to_lits(codes: np.ndarray) -> np.ndarray:
    v = codes // 2 + 1
    out = np.where(codes & 1, -v, v)
    return np.where(codes < 0, 0, out).astype(np.int32)


def _reserve(lits, widths, rows: int):
    if rows <= lits.shape[0]:
        return lits, widths
    extra = rows - lits.shape[0]
    return (np.concatenate([lits, np.full((extra, nb.MAXW), -1, dtype=np.int32)]),
            np.concatenate([widths, np.zeros(extra, dtype=np.int8)]))


def _closure_compiled(base, w: int, limits: Limits):
    """Closure rows (signed literals, zero padded) with base rows first."""
    nbase = len(base)
    num_codes = 2 * max((abs(x) for c in base for x in c), default=1)
    cap = max(1024, 4 * nbase)
    lits = np.full((cap, nb.MAXW), -1, dtype=np.int32)
    widths = np.zeros(cap, dtype=np.int8)
    for i, c in enumerate(base):
        lits[i, :len(c)] = [_code(x) for x in c]
        widths[i] = len(c)
    comb, offset = nb.rank_tables(num_codes)
    if offset[-1] <= BITMAP_MAX_BITS:
        bits = np.zeros(int(offset[-1]) // 64 + 2, dtype=np.uint64)
        table = np.zeros(1, dtype=np.uint64)
    else:
        bits = np.zeros(1, dtype=np.uint64)
        table = np.zeros(1 << max(12, (4 * cap - 1).bit_length()), dtype=np.uint64)
    has_empty = False
    buf = np.empty(nb.MAXW, dtype=np.int32)
    for i, c in enumerate(base):
        if c:
            buf[:len(c)] = lits[i, :len(c)]
            nb._add(buf, len(c), table, bits, comb, offset)
        else:
            has_empty = True
    n, fstart, rounds = nbase, 0, 0
    truncated, reason = False, ""
    while fstart < n:
        if rounds >= limits.max_rounds:
            truncated, reason = True, "max_rounds"
            break
        lits, widths = _reserve(lits, widths, n + 4 * (n - fstart) + 1024)
        m = n
        while True:
            m, has_empty, full = nb.closure_round(lits, widths, n, m, fstart, w, num_codes,
                                                  table, bits, comb, offset, has_empty)
            if not full:
                break
            if m >= lits.shape[0]:
                lits, widths = _reserve(lits, widths, 2 * lits.shape[0])
            if bits.size == 1 and m >= table.size // 2 - 1:
                table = nb._rehash(table, table.size * 2)
        if m == n:
            break
        rounds += 1
        if m > limits.max_clauses:
            room = max(0, limits.max_clauses - n)
            new = lits[n:m]
            keep = np.sort(_lexorder(new, widths[n:m])[:room])
            lits[n:n + room] = new[keep]
            widths[n:n + room] = widths[n:m][keep]
            n = n + room
            truncated, reason = True, "max_clauses"
            break
        fstart, n = n, m
    lits, widths = _codes_to_lits(lits[:n]), widths[:n].astype(np.int64)
    stats = ClosureStats(rounds, n, n - nbase, truncated, reason)
    return lits, widths, stats


def _closure_reference(base, w: int | None, limits: Limits):
    """Set-based semi-naive fixpoint (only pairs touching new clauses)."""
    base = frozenset(base)
    closure = set(base)
    index = _index(closure)
    frontier = set(closure)
    rounds = 0
    truncated, reason = False, ""
    while frontier:
        if rounds >= limits.max_rounds:
            truncated, reason = True, "max_rounds"
            break
        produced = _resolvents(frontier, index, w) - closure
        if not produced:
            break
        rounds += 1
        if len(closure) + len(produced) > limits.max_clauses:
            keep = sorted(produced, key=_order_key)[: max(0, limits.max_clauses - len(closure))]
            closure.update(keep)
            truncated, reason = True, "max_clauses"
            break
        closure |= produced
        for c in produced:
            for lit in c:
                index[lit].append(c)
        frontier = produced
    closure = frozenset(closure)
    stats = ClosureStats(rounds, len(closure), len(closure - base), truncated, reason)
    return closure, stats


def _lexorder(codes: np.ndarray, widths: np.ndarray) -> np.ndarray:
    """Pool order of code rows (padding below every code): width, then codes."""
    return np.lexsort(tuple(codes[:, j] for j in reversed(range(codes.shape[1]))) + (widths,))


def _signed_to_codes(lits: np.ndarray) -> np.ndarray:
    return np.where(lits == 0, -1, 2 * (np.abs(lits) - 1) + (lits < 0))


def _closure_bits(base, w: int | None, limits: Limits):
    """Closure rows (signed literals, zero padded) with base rows first, for few variables."""
    nv = max((abs(x) for c in base for x in c), default=0)
    w = nv if w is None else min(w, nv)
    cap = 3 ** nv + len(base)
    P = np.zeros(cap, dtype=np.int32)
    N = np.zeros(cap, dtype=np.int32)
    seen = np.zeros(4 ** nv, dtype=np.uint8)
    for i, c in enumerate(base):
        for x in c:
            if x > 0:
                P[i] |= 1 << (x - 1)
            else:
                N[i] |= 1 << (-x - 1)
        seen[int(P[i]) | (int(N[i]) << nv)] = 1
    n, fstart, rounds = len(base), 0, 0
    truncated, reason = False, ""
    while fstart < n:
        if rounds >= limits.max_rounds:
            truncated, reason = True, "max_rounds"
            break
        m = nbits.closure_round(P, N, n, fstart, w, nv, seen)
        if m == n:
            break
        rounds += 1
        if m > limits.max_clauses:
            room = max(0, limits.max_clauses - n)
            lits, widths = nbits.to_rows(P[n:m], N[n:m], m - n, nv)
            keep = np.sort(_lexorder(_signed_to_codes(lits), widths)[:room])
            P[n:n + room] = P[n:m][keep]
            N[n:n + room] = N[n:m][keep]
            n = n + room
            truncated, reason = True, "max_clauses"
            break
        fstart, n = n, m
    lits, widths = nbits.to_rows(P[:n], N[:n], n, nv)
    stats = ClosureStats(rounds, n, n - len(base), truncated, reason)
    return lits, widths, stats


class ExtensionPool:
    """Candidate resolvents Res_w^*(F) minus F, as zero-padded literal rows in pool order."""

    def __init__(self, lits: np.ndarray, widths: np.ndarray, stats: ClosureStats,
                 source_hash: str, w: int | None = None):
        self.lits = lits
        self.widths = widths
        self.stats = stats
        self.source_hash = source_hash
        self.w = w
        self._clauses = None

    def __len__(self):
        return int(self.widths.size)

    def take(self, idx) -> tuple:
        idx = np.asarray(idx, dtype=np.int64)
        return tuple(_rows_to_clauses(self.lits[idx], self.widths[idx]))

    @property
    def clauses(self) -> tuple:
        if self._clauses is None:
            self._clauses = tuple(_rows_to_clauses(self.lits, self.widths))
        return self._clauses


def _clauses_to_rows(clauses) -> tuple[np.ndarray, np.ndarray]:
    width = max((len(c) for c in clauses), default=0)
    lits = np.zeros((len(clauses), max(width, 1)), dtype=np.int32)
    for i, c in enumerate(clauses):
        lits[i, :len(c)] = c
    return lits, np.array([len(c) for c in clauses], dtype=np.int64)


def extension_pool(f: CnfFormula, w: int | None = DEFAULT_W, limits: Limits = Limits(),
                   engine: str = "auto") -> ExtensionPool:
    base = tuple(sorted({canonical(c) for c in f.clauses}, key=_order_key))
    kind = _pick_engine(base, w, engine)
    if kind != "reference":
        run = _closure_compiled if kind == "compiled" else _closure_bits
        lits, widths, stats = run(base, w, limits)
        lits, widths = lits[len(base):], widths[len(base):]
        order = _lexorder(_signed_to_codes(lits), widths)
        lits, widths = lits[order], widths[order]
    else:
        closure, stats = _closure_reference(base, w, limits)
        lits, widths = _clauses_to_rows(sorted(closure - set(base), key=_order_key))
    return ExtensionPool(lits, widths, stats, formula_hash(f), w)


_POOL_CACHE: OrderedDict = OrderedDict()
POOL_CACHE_SIZE = 8


def cached_extension_pool(f: CnfFormula, w: int | None = DEFAULT_W,
                          limits: Limits = Limits()) -> ExtensionPool:
    """``extension_pool`` memoized in-process by (formula hash, w, limits)."""
    key = (formula_hash(f), w, limits)
    pool = _POOL_CACHE.get(key)
    if pool is None:
        pool = extension_pool(f, w, limits)
        _POOL_CACHE[key] = pool
        while len(_POOL_CACHE) > POOL_CACHE_SIZE:
            _POOL_CACHE.popitem(last=False)
    else:
        _POOL_CACHE.move_to_end(key)
    return pool


def _include(pool_size: int, p: float, seed: int) -> np.ndarray:
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    rng = numpy_rng(seed)
    return rng.random(pool_size) < p


def sample_extension(f: CnfFormula, w: int | None, p: float, seed: int,
                     pool: ExtensionPool | None = None) -> ExtensionSet:
    """Include each clause of Res_w^*(F) minus F independently with probability p."""
    if pool is None:
        pool = extension_pool(f, w)
    mask = _include(len(pool), p, seed)
    chosen = pool.take(np.flatnonzero(mask))
    return ExtensionSet(chosen, pool.source_hash, pool.w, p, seed, pool.stats.truncated)


def calibrate_p(f: CnfFormula, w: int | None = DEFAULT_W,
                target_expected: float | None = None,
                pool: ExtensionPool | None = None) -> float:
    """Inclusion probability giving ``target_expected`` clauses on average (default |F|/10)."""
    if pool is None:
        pool = extension_pool(f, w)
    return calibrate_p_from_size(len(pool), len(f.clauses) / 10.0
                                 if target_expected is None else target_expected)


def calibrate_p_from_size(pool_size: int, target_expected: float) -> float:
    if target_expected <= 0:
        raise ValueError("target_expected must be positive")
    if pool_size == 0:
        raise ValueError("empty candidate pool")
    return min(1.0, target_expected / pool_size)


def sample_fixed_length_extension(f: CnfFormula, pool, p: float, seed: int) -> ExtensionSet:
    """Independent p-inclusion over a caller-supplied pool of equal-width implied clauses."""
    pool = tuple(canonical(c) for c in pool)
    widths = {len(c) for c in pool}
    if len(widths) > 1:
        raise ValueError(f"pool clauses must share one width, found {sorted(widths)}")
    mask = _include(len(pool), p, seed)
    chosen = tuple(c for c, keep in zip(pool, mask) if keep)
    ell = next(iter(widths)) if widths else None
    return ExtensionSet(chosen, formula_hash(f), ell, p, seed)
