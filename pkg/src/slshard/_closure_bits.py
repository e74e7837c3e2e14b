"""Compiled resolution closure for formulas over at most 12 variables, any width.

A clause is a pair of variable bitmasks (positive, negative) and has the dense
key ``pos | neg << nv``, so the seen-set is a byte array of 4**nv entries.
Two clauses resolve to a non-tautology only when they clash on exactly one
variable.
"""
from __future__ import annotations

import numpy as np
from numba import njit

MAX_VARS = 12


POPCOUNT = np.array([bin(i).count("1") for i in range(1 << MAX_VARS)], dtype=np.int64)


@njit(cache=True)
def closure_round(P, N, m, fstart, w, nv, seen, popcount=POPCOUNT):
    """Append resolvents of clauses [fstart, m) with clauses [0, m); returns the new end."""
    k = m
    cand = np.empty(m, dtype=np.int64)
    for i in range(fstart, m):
        pi = P[i]
        ni = N[i]
        # branch-free pass: partners clashing on exactly one variable (never a tautology)
        cnt = 0
        for j in range(m):
            c = (pi & N[j]) | (ni & P[j])
            cand[cnt] = j
            cnt += (c != 0) & ((c & (c - 1)) == 0)
        for t in range(cnt):
            j = cand[t]
            c = (pi & N[j]) | (ni & P[j])
            rp = (pi | P[j]) & ~c
            rn = (ni | N[j]) & ~c
            if popcount[rp] + popcount[rn] > w:
                continue
            key = np.int64(rp) | (np.int64(rn) << nv)
            if seen[key]:
                continue
            seen[key] = 1
            P[k] = rp
            N[k] = rn
            k += 1
    return k


@njit(cache=True)
def to_rows(P, N, count, nv):
    """Signed-literal rows in canonical order, zero padded, with their widths."""
    lits = np.zeros((count, max(nv, 1)), dtype=np.int32)
    widths = np.zeros(count, dtype=np.int64)
    for i in range(count):
        k = 0
        for v in range(nv):
            if (P[i] >> v) & 1:
                lits[i, k] = v + 1
                k += 1
            elif (N[i] >> v) & 1:
                lits[i, k] = -(v + 1)
                k += 1
        widths[i] = k
    return lits, widths
