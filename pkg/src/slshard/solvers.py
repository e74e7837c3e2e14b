"""Schöning's random walk (SRWA) and probSAT-style solvers with exact flip counts.

The inner loops are numba kernels. Randomness comes from the SplitMix64
stream documented in ``slshard.rng``; a run is a pure function of
(formula, config).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numba
import numpy as np

from .cnf import Assignment, CnfFormula, evaluate
from .rng import derive_seed

SRWA = "srwa"
PROBSAT_POLY = "probsat-poly"
PROBSAT_EXP = "probsat-exp"
ALGORITHMS = (SRWA, PROBSAT_POLY, PROBSAT_EXP)
_ALGO_CODE = {SRWA: 0, PROBSAT_POLY: 1, PROBSAT_EXP: 2}

DEFAULT_MAX_FLIPS = 10**8
DEFAULT_CB = {PROBSAT_EXP: 2.3, PROBSAT_POLY: 2.38}
POLY_EPS = 1.0
_NO_RESTART = np.iinfo(np.int64).max

SOLVED = "solved"
EXHAUSTED = "budget_exhausted"

BATCH_SCHEMA = "# schema: slshard.batch/1"


class EmptyClauseError(ValueError):
    """The formula contains the empty clause, so it cannot be satisfied."""


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str = SRWA
    t_restart: int | None = None  # None: never restart
    max_flips: int = DEFAULT_MAX_FLIPS
    seed: int = 0
    cb: float | None = None
    initial_assignment_override: Assignment | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.t_restart is not None and self.t_restart < 1:
            raise ValueError("t_restart must be >= 1")
        if self.max_flips < 1:
            raise ValueError("max_flips must be >= 1")

    @property
    def break_exponent(self) -> float:
        if self.cb is not None:
            return float(self.cb)
        return DEFAULT_CB.get(self.algorithm, 0.0)

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "t_restart": self.t_restart,
                "max_flips": self.max_flips, "seed": self.seed,
                "cb": self.break_exponent if self.algorithm != SRWA else None}


@dataclass(frozen=True)
class SolveOutcome:
    status: str
    flips: int
    restarts_used: int
    witness: Assignment | None = None

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


# --- compiled kernel -------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@numba.njit(cache=True)
def _next(state):
    s = state[0] + _GOLDEN
    state[0] = s
    z = s
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _uniform(state):
    return float(_next(state) >> np.uint64(11)) * _INV53


@numba.njit(cache=True)
def _below(state, n):
    k = int(_uniform(state) * n)
    return k if k < n else n - 1


@numba.njit(cache=True)
def _lit_index(lit):
    return 2 * (abs(lit) - 1) + (1 if lit < 0 else 0)


@numba.njit(cache=True)
def _randomize(state, assign):
    n = assign.size
    i = 0
    while i < n:
        bits = _next(state)
        for b in range(64):
            if i >= n:
                break
            assign[i] = np.uint8((bits >> np.uint64(b)) & np.uint64(1))
            i += 1


@numba.njit(cache=True)
def _rebuild(cstart, clits, assign, numtrue, unsat, pos):
    m = cstart.size - 1
    nunsat = 0
    for c in range(m):
        t = 0
        for k in range(cstart[c], cstart[c + 1]):
            lit = clits[k]
            v = assign[abs(lit) - 1]
            if (lit > 0 and v == 1) or (lit < 0 and v == 0):
                t += 1
        numtrue[c] = t
        if t == 0:
            pos[c] = nunsat
            unsat[nunsat] = c
            nunsat += 1
        else:
            pos[c] = -1
    return nunsat


@numba.njit(cache=True)
def _break_value(var, assign, ostart, oclause, numtrue):
    # occurrences of the currently true literal of var
    li = 2 * (var - 1) + (0 if assign[var - 1] == 1 else 1)
    b = 0
    for k in range(ostart[li], ostart[li + 1]):
        if numtrue[oclause[k]] == 1:
            b += 1
    return b


@numba.njit(cache=True)
def _solve_kernel(algo, n, cstart, clits, ostart, oclause, t_restart, max_flips,
                  seed, cb, eps, override, use_override, assign,
                  trace_clause, trace_var):
    m = cstart.size - 1
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    numtrue = np.zeros(m, dtype=np.int64)
    unsat = np.zeros(m, dtype=np.int64)
    pos = np.full(m, -1, dtype=np.int64)
    weights = np.zeros(64, dtype=np.float64)
    trace_cap = trace_clause.size
    flips = 0
    restarts = 0
    first = True
    while True:
        if first and use_override:
            for i in range(n):
                assign[i] = override[i]
        else:
            _randomize(state, assign)
        first = False
        nunsat = _rebuild(cstart, clits, assign, numtrue, unsat, pos)
        j = 0
        while True:
            if nunsat == 0:
                return 0, flips, restarts
            if j >= t_restart:
                break
            if flips >= max_flips:
                return 1, flips, restarts
            c = unsat[_below(state, nunsat)]
            a = cstart[c]
            width = cstart[c + 1] - a
            if algo == 0:
                lit = clits[a + _below(state, width)]
            else:
                if weights.size < width:
                    weights = np.zeros(width, dtype=np.float64)
                total = 0.0
                for k in range(width):
                    b = _break_value(abs(clits[a + k]), assign, ostart, oclause, numtrue)
                    if algo == 1:
                        w = (eps + b) ** (-cb)
                    else:
                        w = cb ** (-b)
                    weights[k] = w
                    total += w
                r = _uniform(state) * total
                pick = width - 1
                acc = 0.0
                for k in range(width):
                    acc += weights[k]
                    if r < acc:
                        pick = k
                        break
                lit = clits[a + pick]
            var = abs(lit)
            if flips < trace_cap:
                trace_clause[flips] = c
                trace_var[flips] = lit
            # flip var so that lit becomes true
            assign[var - 1] = np.uint8(1 if lit > 0 else 0)
            lt = _lit_index(lit)
            lf = _lit_index(-lit)
            for k in range(ostart[lt], ostart[lt + 1]):
                d = oclause[k]
                numtrue[d] += 1
                if numtrue[d] == 1:
                    p = pos[d]
                    last = unsat[nunsat - 1]
                    unsat[p] = last
                    pos[last] = p
                    pos[d] = -1
                    nunsat -= 1
            for k in range(ostart[lf], ostart[lf + 1]):
                d = oclause[k]
                numtrue[d] -= 1
                if numtrue[d] == 0:
                    pos[d] = nunsat
                    unsat[nunsat] = d
                    nunsat += 1
            flips += 1
            j += 1
        restarts += 1


# --- python layer -----------------------------------------------------------

class CompiledFormula:
    """Flat array layout of a formula for the kernels."""

    def __init__(self, f: CnfFormula):
        if f.has_empty_clause():
            raise EmptyClauseError("formula contains the empty clause")
        self.formula = f
        self.n = f.num_vars
        sizes = np.fromiter((len(c) for c in f.clauses), dtype=np.int64, count=len(f.clauses))
        self.cstart = np.zeros(len(f.clauses) + 1, dtype=np.int64)
        np.cumsum(sizes, out=self.cstart[1:])
        self.clits = np.fromiter((lit for c in f.clauses for lit in c), dtype=np.int64,
                                 count=int(self.cstart[-1]))
        occ = [[] for _ in range(2 * max(self.n, 1))]
        for ci, c in enumerate(f.clauses):
            for lit in c:
                occ[2 * (abs(lit) - 1) + (lit < 0)].append(ci)
        self.ostart = np.zeros(len(occ) + 1, dtype=np.int64)
        np.cumsum([len(o) for o in occ], out=self.ostart[1:])
        self.oclause = np.fromiter((ci for o in occ for ci in o), dtype=np.int64,
                                   count=int(self.ostart[-1]))


def _compiled(f) -> CompiledFormula:
    return f if isinstance(f, CompiledFormula) else CompiledFormula(f)


def solve(f, cfg: SolverConfig, trace: int = 0):
    """Run one solver instance. With ``trace > 0`` also return the first
    ``trace`` (clause index, flipped literal) pairs."""
    cf = _compiled(f)
    if cfg.initial_assignment_override is not None:
        override = cfg.initial_assignment_override.values.astype(np.uint8)
        if override.size != cf.n:
            raise ValueError("override assignment has the wrong length")
        use_override = True
    else:
        override = np.zeros(cf.n, dtype=np.uint8)
        use_override = False
    assign = np.zeros(cf.n, dtype=np.uint8)
    t_clause = np.zeros(trace, dtype=np.int64)
    t_var = np.zeros(trace, dtype=np.int64)
    t_restart = _NO_RESTART if cfg.t_restart is None else int(cfg.t_restart)
    status, flips, restarts = _solve_kernel(
        _ALGO_CODE[cfg.algorithm], cf.n, cf.cstart, cf.clits, cf.ostart, cf.oclause,
        t_restart, int(cfg.max_flips), np.uint64(cfg.seed & ((1 << 64) - 1)),
        cfg.break_exponent, POLY_EPS, override, use_override, assign, t_clause, t_var)
    if status == 0:
        out = SolveOutcome(SOLVED, int(flips), int(restarts), Assignment(assign.copy()))
    else:
        out = SolveOutcome(EXHAUSTED, int(flips), int(restarts), None)
    if trace:
        k = min(trace, out.flips)
        return out, list(zip(t_clause[:k].tolist(), t_var[:k].tolist()))
    return out


def srwa_solve(f, cfg: SolverConfig) -> SolveOutcome:
    if cfg.algorithm != SRWA:
        cfg = replace(cfg, algorithm=SRWA)
    return solve(f, cfg)


def probsat_solve(f, cfg: SolverConfig) -> SolveOutcome:
    if cfg.algorithm == SRWA:
        cfg = replace(cfg, algorithm=PROBSAT_EXP)
    return solve(f, cfg)


@dataclass
class BatchResult:
    outcomes: list
    seeds: list
    mean_flips: float
    var_flips: float
    censored: bool

    @property
    def solved_runs(self) -> int:
        return sum(o.solved for o in self.outcomes)


def summarize(outcomes: Sequence[SolveOutcome], seeds: Sequence[int] = ()) -> BatchResult:
    """Mean (and sample variance) of flips over solved runs; any unsolved run censors."""
    flips = np.array([o.flips for o in outcomes if o.solved], dtype=np.float64)
    censored = len(flips) < len(outcomes)
    mean = float(flips.mean()) if flips.size else math.nan
    var = float(flips.var(ddof=1)) if flips.size > 1 else 0.0
    return BatchResult(list(outcomes), list(seeds), mean, var, censored)


def run_batch(f, cfg: SolverConfig, runs: int,
              seed_stream: Callable[[int], int] | None = None) -> BatchResult:
    """Solve ``runs`` times; run j uses ``seed_stream(j)`` (default: derived from cfg.seed)."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if seed_stream is None:
        seed_stream = lambda j: derive_seed(cfg.seed, "run", j)  # noqa: E731
    cf = _compiled(f)
    seeds = [seed_stream(j) for j in range(runs)]
    outcomes = [solve(cf, replace(cfg, seed=s)) for s in seeds]
    return summarize(outcomes, seeds)


def batch_to_csv(instance_id: str, batch: BatchResult) -> str:
    buf = io.StringIO()
    buf.write(BATCH_SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance_id", "run_index", "seed", "status", "flips", "restarts"])
    for j, (o, s) in enumerate(zip(batch.outcomes, batch.seeds)):
        w.writerow([instance_id, j, s, o.status, o.flips, o.restarts_used])
    return buf.getvalue()


def check_witness(f: CnfFormula, out: SolveOutcome) -> bool:
    return out.witness is not None and evaluate(f, out.witness)
