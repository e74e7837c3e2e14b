"""Compiled width-bounded resolution closure for clauses of width at most 4.

Literals are coded as 2 * (var - 1) + (1 if negative), so ``code ^ 1`` is the
complement and ascending code order is the canonical literal order. A clause
packs into one uint64 as four 15-bit fields holding ``code + 1``.

Partners for a clause c of width a are looked up by the number of literals
they must share with c for the resolvent to fit in width w: a width-b partner
sharing k literals besides the pivot gives width a + b - 2 - k.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

MAXW = 4
MAX_CODE = (1 << 15) - 2
COUNTING_SORT_MAX = 1 << 25
_EMPTY = np.uint64(0)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True)
def _pack(buf, k):
    key = np.uint64(0)
    for i in range(k):
        key |= np.uint64(buf[i] + 1) << np.uint64(15 * i)
    return key


@njit(cache=True)
def _slot(key, mask):
    return np.int64((key * _GOLD) >> np.uint64(20)) & mask


@njit(cache=True)
def _insert(table, key):
    """Add ``key`` to the open-addressing set; True when it was absent."""
    mask = table.size - 1
    i = _slot(key, mask)
    while True:
        cur = table[i]
        if cur == _EMPTY:
            table[i] = key
            return True
        if cur == key:
            return False
        i = (i + 1) & mask


def rank_tables(num_codes: int):
    """Binomials and per-width offsets ranking sorted code tuples of width <= 4."""
    comb = np.zeros((num_codes + 1, MAXW + 1), dtype=np.int64)
    for c in range(num_codes + 1):
        for k in range(MAXW + 1):
            comb[c, k] = math.comb(c, k)
    offset = np.zeros(MAXW + 2, dtype=np.int64)
    for k in range(MAXW + 1):
        offset[k + 1] = offset[k] + math.comb(num_codes, k)
    return comb, offset


@njit(cache=True)
def _rank(buf, k, comb, offset):
    r = offset[k]
    for i in range(k):
        r += comb[buf[i], i + 1]
    return r


@njit(cache=True)
def _mark(bits, r):
    """Set bit r; True when it was clear."""
    word = r >> 6
    bit = np.uint64(1) << np.uint64(r & 63)
    if bits[word] & bit:
        return False
    bits[word] |= bit
    return True


@njit(cache=True)
def _add(buf, k, table, bits, comb, offset):
    if bits.size > 1:
        return _mark(bits, _rank(buf, k, comb, offset))
    return _insert(table, _pack(buf, k))


@njit(cache=True)
def _rehash(table, cap):
    out = np.zeros(cap, dtype=np.uint64)
    for i in range(table.size):
        if table[i] != _EMPTY:
            _insert(out, table[i])
    return out


@njit(cache=True)
def _csr(keys, ids, nbuckets):
    counts = np.zeros(nbuckets + 1, dtype=np.int64)
    for k in keys:
        counts[k + 1] += 1
    for i in range(nbuckets):
        counts[i + 1] += counts[i]
    pos = counts[:-1].copy()
    out = np.empty(ids.size, dtype=np.int32)
    for j in range(keys.size):
        k = keys[j]
        out[pos[k]] = ids[j]
        pos[k] += 1
    return counts, out


@njit(cache=True)
def _index1(lits, widths, n, L):
    """Occurrences keyed by (literal, width)."""
    tot = 0
    for i in range(n):
        tot += widths[i]
    keys = np.empty(tot, dtype=np.int64)
    ids = np.empty(tot, dtype=np.int32)
    j = 0
    for i in range(n):
        for a in range(widths[i]):
            keys[j] = lits[i, a] * (MAXW + 1) + widths[i]
            ids[j] = i
            j += 1
    return _csr(keys, ids, L * (MAXW + 1))


@njit(cache=True)
def _index_sorted(lits, widths, n, L, order):
    """Occurrences keyed by (pivot, other literals..., width), ``order`` = 2 or 3."""
    tot = 0
    for i in range(n):
        a = widths[i]
        if order == 2:
            tot += a * (a - 1)
        else:
            tot += a * (a - 1) * (a - 2) // 2
    keys = np.empty(tot, dtype=np.int64)
    ids = np.empty(tot, dtype=np.int32)
    j = 0
    for i in range(n):
        a = widths[i]
        for x in range(a):
            p = np.int64(lits[i, x])
            for y in range(a):
                if y == x:
                    continue
                m1 = np.int64(lits[i, y])
                if order == 2:
                    keys[j] = (p * L + m1) * (MAXW + 1) + a
                    ids[j] = i
                    j += 1
                else:
                    for z in range(y + 1, a):
                        if z == x:
                            continue
                        m2 = np.int64(lits[i, z])
                        keys[j] = ((p * L + m1) * L + m2) * (MAXW + 1) + a
                        ids[j] = i
                        j += 1
    space = L * (MAXW + 1) * (L if order == 2 else L * L)
    if space <= COUNTING_SORT_MAX:
        # heavy key repetition makes comparison sorts slow; bucket instead
        start, out = _csr(keys, ids, space)
        skeys = np.empty(keys.size, dtype=np.int64)
        for k in range(space):
            for t in range(start[k], start[k + 1]):
                skeys[t] = k
        return skeys, out
    perm = np.argsort(keys, kind="mergesort")
    return keys[perm], ids[perm]


@njit(cache=True)
def _range(keys, key):
    lo = np.searchsorted(keys, key, side="left")
    hi = np.searchsorted(keys, key, side="right")
    return lo, hi


@njit(cache=True)
def _merge(lits, ci, a, skip_c, di, b, skip_d, w, buf):
    """Resolvent of rows ci and di without the pivot literals; width or -1."""
    i = 0
    j = 0
    k = 0
    while i < a or j < b:
        if i < a and lits[ci, i] == skip_c:
            i += 1
            continue
        if j < b and lits[di, j] == skip_d:
            j += 1
            continue
        if j >= b or (i < a and lits[ci, i] < lits[di, j]):
            v = lits[ci, i]
            i += 1
        elif i >= a or lits[di, j] < lits[ci, i]:
            v = lits[di, j]
            j += 1
        else:
            v = lits[ci, i]
            i += 1
            j += 1
        if k > 0 and (buf[k - 1] ^ 1) == v:
            return -1  # tautology: complements are adjacent in code order
        if k >= w:
            return -1
        buf[k] = v
        k += 1
    return k


@njit(cache=True)
def _emit(lits, widths, n, buf, k, table, bits, comb, offset, has_empty):
    """Append the resolvent in ``buf`` when new; returns (n, has_empty, grew)."""
    if k == 0:
        if has_empty:
            return n, has_empty
        has_empty = True
    elif not _add(buf, k, table, bits, comb, offset):
        return n, has_empty
    for t in range(MAXW):
        lits[n, t] = buf[t] if t < k else -1
    widths[n] = k
    return n + 1, has_empty


@njit(cache=True)
def closure_round(lits, widths, n, m, fstart, w, L, table, bits, comb, offset, has_empty):
    """Resolve frontier rows [fstart, n) against rows [0, n); new rows go from row m on.

    Seen clauses live in the bitmap ``bits`` (indexed by tuple rank) when it has
    more than one word, else in the hash set ``table``. Returns (m, has_empty,
    full); ``full`` means the arrays or the hash set ran out of room; the caller grows them and calls again with the returned m, which
    redoes the round without duplicating rows already added.
    """
    start1, occ1 = _index1(lits, widths, n, L)
    k2, id2 = _index_sorted(lits, widths, n, L, 2)
    k3, id3 = _index_sorted(lits, widths, n, L, 3)
    limit = lits.shape[0] if bits.size > 1 else min(lits.shape[0], table.size // 2 - 1)
    buf = np.empty(MAXW, dtype=np.int32)
    for ci in range(fstart, n):
        a = widths[ci]
        for x in range(a):
            lc = np.int64(lits[ci, x])
            nl = lc ^ 1
            for b in range(1, MAXW + 1):
                need = a + b - 2 - w
                if need <= 0:
                    bk = nl * (MAXW + 1) + b
                    for t in range(start1[bk], start1[bk + 1]):
                        di = occ1[t]
                        k = _merge(lits, ci, a, lc, di, b, nl, w, buf)
                        if k >= 0:
                            if m >= limit:
                                return m, has_empty, True
                            m, has_empty = _emit(lits, widths, m, buf, k, table, bits, comb, offset, has_empty)
                elif need == 1:
                    for y in range(a):
                        if y == x:
                            continue
                        key = (nl * L + lits[ci, y]) * (MAXW + 1) + b
                        lo, hi = _range(k2, key)
                        for t in range(lo, hi):
                            di = id2[t]
                            k = _merge(lits, ci, a, lc, di, b, nl, w, buf)
                            if k >= 0:
                                if m >= limit:
                                    return m, has_empty, True
                                m, has_empty = _emit(lits, widths, m, buf, k, table, bits, comb, offset, has_empty)
                else:
                    for y in range(a):
                        if y == x:
                            continue
                        for z in range(y + 1, a):
                            if z == x:
                                continue
                            key = ((nl * L + lits[ci, y]) * L + lits[ci, z]) * (MAXW + 1) + b
                            lo, hi = _range(k3, key)
                            for t in range(lo, hi):
                                di = id3[t]
                                k = _merge(lits, ci, a, lc, di, b, nl, w, buf)
                                if k >= 0:
                                    if m >= limit:
                                        return m, has_empty, True
                                    m, has_empty = _emit(lits, widths, m, buf, k, table, bits,
                                                         comb, offset, has_empty)
    return m, has_empty, False
