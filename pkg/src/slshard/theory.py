"""Monte Carlo for the flip-probability ratios P, Q, R under random clause addition.

Added clauses are included independently with probability p, so the number
of added clauses in any fixed pool is binomial. The simulated quantities:

    P = (1/ell) / (1 + B/A),   A ~ Bin(n_in, p),  B ~ Bin(n_out, p)
    Q = m_F / (m_F + U),       U ~ Bin(n_unsat_L, p)
    R = U / (m_F + U)

A = 0 (for P) and U = 0 (for R) leave the ratio undefined; such draws are
rejected and counted, never regularized.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

MAX_REJECT_FRAC = 0.10
MIN_REPS = 1000
CSV_SCHEMA = "# schema: slshard.sample/1"


class SparseModelError(RuntimeError):
    """Too many undefined draws; the pools are too small for the regime studied."""


@dataclass(frozen=True)
class PqrModel:
    n_in: int = 1000
    n_out: int = 1000
    n_unsat_L: int = 2000
    m_F: int = 50
    p: float = 0.3
    ell: int = 3

    def __post_init__(self):
        for name in ("n_in", "n_out", "n_unsat_L"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.m_F < 1:
            raise ValueError("m_F must be >= 1")
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        if self.ell < 1:
            raise ValueError("ell must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SimSample:
    name: str
    values: np.ndarray
    requested: int
    rejected: int = 0

    @property
    def rejection_rate(self) -> float:
        return self.rejected / self.requested

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_SCHEMA + "\n")
        buf.write(self.name + "\n")
        for v in self.values:
            buf.write(f"{v!r}\n")
        return buf.getvalue()

    def summary(self) -> dict:
        v = self.values
        return {"name": self.name, "requested": self.requested, "accepted": int(v.size),
                "rejected": self.rejected, "rejection_rate": self.rejection_rate,
                "mean": float(v.mean()), "var": float(v.var()),
                "min": float(v.min()), "max": float(v.max())}


def _check(reps: int, rejected: int, name: str):
    if rejected > MAX_REJECT_FRAC * reps:
        raise SparseModelError(f"{name}: {rejected} of {reps} draws undefined "
                               f"(more than {MAX_REJECT_FRAC:.0%})")


def _need_reps(reps: int):
    if reps < MIN_REPS:
        raise ValueError(f"need at least {MIN_REPS} repetitions")


def simulate_P(model: PqrModel, reps: int, rng: np.random.Generator) -> SimSample:
    _need_reps(reps)
    a = rng.binomial(model.n_in, model.p, reps)
    b = rng.binomial(model.n_out, model.p, reps)
    ok = a > 0
    rejected = int(reps - np.count_nonzero(ok))
    _check(reps, rejected, "P")
    a, b = a[ok], b[ok]
    vals = a / (model.ell * (a + b).astype(float))
    return SimSample("P", vals, reps, rejected)


def draw_U(model: PqrModel, reps: int, rng: np.random.Generator) -> np.ndarray:
    return rng.binomial(model.n_unsat_L, model.p, reps)


def q_from_u(model: PqrModel, u: np.ndarray) -> SimSample:
    return SimSample("Q", model.m_F / (model.m_F + u.astype(float)), int(u.size), 0)


def r_from_u(model: PqrModel, u: np.ndarray) -> SimSample:
    ok = u > 0
    rejected = int(u.size - np.count_nonzero(ok))
    _check(int(u.size), rejected, "R")
    uu = u[ok].astype(float)
    return SimSample("R", uu / (model.m_F + uu), int(u.size), rejected)


def simulate_Q(model: PqrModel, reps: int, rng: np.random.Generator) -> SimSample:
    _need_reps(reps)
    return q_from_u(model, draw_U(model, reps, rng))


def simulate_R(model: PqrModel, reps: int, rng: np.random.Generator) -> SimSample:
    _need_reps(reps)
    return r_from_u(model, draw_U(model, reps, rng))


def simulate_QR_paired(model: PqrModel, reps: int, rng: np.random.Generator):
    """Q and R from the same U draws (Q + R = 1 wherever R is defined)."""
    _need_reps(reps)
    u = draw_U(model, reps, rng)
    return q_from_u(model, u), r_from_u(model, u)


@dataclass(frozen=True)
class MomentReport:
    n: int
    p: float
    reps: int
    zero_means: int
    mean_log: float
    var_log: float
    target_mean: float
    target_var: float
    mean_dev_se: float
    var_rel_dev: float
    # second-order term of E[log xbar], reported so the delta-method bias is visible
    bias_second_order: float

    def ok(self, se_tol: float = 3.0, var_tol: float = 0.10) -> bool:
        return abs(self.mean_dev_se) <= se_tol and abs(self.var_rel_dev) <= var_tol

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def check_log_binomial_mean(n: int, p: float, reps: int, rng: np.random.Generator,
                            require_regime: bool = True) -> MomentReport:
    """Moments of log(xbar) for means of n Bernoulli(p) trials vs N(log p, (1-p)/(np))."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    if require_regime and p < 1.0 and n * p * (1 - p) < 50:
        raise ValueError("need n p (1 - p) >= 50")
    if reps < 2:
        raise ValueError("need at least 2 repetitions")
    xbar = rng.binomial(n, p, reps) / n
    ok = xbar > 0
    zeros = int(reps - np.count_nonzero(ok))
    lx = np.log(xbar[ok])
    m, v = float(lx.mean()), float(lx.var(ddof=1))
    tm, tv = math.log(p), (1 - p) / (n * p)
    se = math.sqrt(v / lx.size) if v > 0 else 0.0
    dev = (m - tm) / se if se > 0 else (0.0 if m == tm else math.inf)
    rel = (v - tv) / tv if tv > 0 else v
    return MomentReport(n, p, reps, zeros, m, v, tm, tv, dev, rel, -(1 - p) / (2 * n * p))
