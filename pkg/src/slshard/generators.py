"""Uniform random k-CNF and planted (hidden-solution) instance generators."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .cnf import BRUTE_FORCE_MAX_VARS, Assignment, CnfFormula, brute_force_satisfiable, evaluate
from .rng import numpy_rng

THRESHOLD_3SAT = 4.267
PLANTED_LABEL = "planted-simple"


@dataclass(frozen=True)
class GenSpec:
    kind: str = "uniform"
    n: int = 50
    k: int = 3
    ratio: float = THRESHOLD_3SAT
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("uniform", "planted"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.n < self.k:
            raise ValueError(f"need n >= k, got n={self.n}, k={self.k}")
        if not self.ratio > 0:
            raise ValueError("ratio must be positive")

    @property
    def num_clauses(self) -> int:
        # guard against 4.267*50 = 213.35 style float noise just below an integer
        return int(math.floor(self.ratio * self.n + 1e-9))


def _draw_clause(rng: np.random.Generator, n: int, k: int) -> tuple:
    vs = rng.choice(n, size=k, replace=False) + 1
    signs = rng.integers(0, 2, size=k)
    return tuple(int(v) if s else -int(v) for v, s in zip(vs, signs))


def gen_uniform(spec: GenSpec) -> CnfFormula:
    if spec.kind != "uniform":
        raise ValueError("gen_uniform needs kind='uniform'")
    rng = numpy_rng(spec.seed)
    return CnfFormula(spec.n, tuple(_draw_clause(rng, spec.n, spec.k)
                                    for _ in range(spec.num_clauses)))


def gen_planted(spec: GenSpec) -> tuple[CnfFormula, Assignment]:
    """Rejection planting: clauses falsified by the hidden assignment are redrawn."""
    if spec.kind != "planted":
        raise ValueError("gen_planted needs kind='planted'")
    rng = numpy_rng(spec.seed)
    hidden = Assignment.random(spec.n, rng)
    clauses = []
    while len(clauses) < spec.num_clauses:
        c = _draw_clause(rng, spec.n, spec.k)
        if any(hidden.satisfies_literal(lit) for lit in c):
            clauses.append(c)
    return CnfFormula(spec.n, tuple(clauses)), hidden


def generate(spec: GenSpec):
    """Formula plus hidden assignment (None for uniform instances)."""
    if spec.kind == "planted":
        return gen_planted(spec)
    return gen_uniform(spec), None


def sidecar(spec: GenSpec, hidden: Assignment | None) -> str:
    doc = {"spec": asdict(spec),
           "label": PLANTED_LABEL if spec.kind == "planted" else "uniform"}
    if hidden is not None:
        doc["hidden_assignment"] = hidden.tolist()
    return json.dumps(doc, indent=2, sort_keys=True)


def screen_satisfiable(formulas, budget: int = 10**7, seed: int = 0,
                       witnesses=None) -> list[tuple[CnfFormula, Assignment]]:
    """Keep formulas certified satisfiable, each paired with a verified witness.

    Known witnesses (e.g. planted assignments) are re-checked and used directly;
    otherwise small formulas are brute-forced and larger ones handed to SRWA,
    where a timeout drops the formula.
    """
    from .solvers import EmptyClauseError, SolverConfig, srwa_solve
    from .rng import derive_seed

    formulas = list(formulas)
    witnesses = list(witnesses) if witnesses is not None else [None] * len(formulas)
    kept = []
    for i, (f, w) in enumerate(zip(formulas, witnesses)):
        if w is not None and evaluate(f, w):
            kept.append((f, w))
            continue
        if f.num_vars <= BRUTE_FORCE_MAX_VARS:
            sat, w = brute_force_satisfiable(f)
        else:
            try:
                out = srwa_solve(f, SolverConfig(max_flips=budget,
                                                 seed=derive_seed(seed, "screen", i)))
            except EmptyClauseError:
                continue
            sat, w = out.solved, out.witness
        if sat and evaluate(f, w):
            kept.append((f, w))
    return kept
