"""When does restarting a Las Vegas algorithm after a fixed cutoff pay off?

For a runtime X with quantile function Q and finite mean, restarting at
t = Q(p) gives E[X_t] = E[X] * R(p) / p with

    R(p) = ((1 - p) Q(p) + int_0^p Q(u) du) / E[X],

so a cutoff helps exactly when R(p) < p. An infinite mean makes any cutoff
with positive success probability an improvement.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .distributions import Distribution, SaturationError, hazard_rate, numeric_mean
from .fitting import _values, empirical_quantile

DEFAULT_GRID_SIZE = 512
GRID_TAIL = 1e-4
EPOCH_CAP = 10**5
# R(p) < p must beat quadrature round-off by this much to count
USEFUL_TOL = 1e-9


class RuntimeModel:
    """Runtime law given either by a sample (empirical) or a distribution handle."""

    def __init__(self, kind: str, mean: float, quantile_fn, dist: Distribution | None = None,
                 values: np.ndarray | None = None):
        if kind not in ("empirical", "parametric"):
            raise ValueError(f"unknown model kind {kind!r}")
        if not mean > 0:
            raise ValueError("mean runtime must be positive")
        self.kind = kind
        self.mean = mean
        self.quantile_fn = quantile_fn
        self.dist = dist
        self.values = values

    @classmethod
    def from_sample(cls, sample) -> "RuntimeModel":
        x = np.sort(_values(sample))
        return cls("empirical", float(x.mean()), lambda q: empirical_quantile(x, q), values=x)

    @classmethod
    def from_distribution(cls, dist: Distribution) -> "RuntimeModel":
        return cls("parametric", float(dist.mean()), dist.ppf, dist=dist)

    @property
    def infinite_mean(self) -> bool:
        return math.isinf(self.mean)

    def integrated_quantile(self, p: float) -> float:
        """int_0^p Q(u) du."""
        if self.kind == "empirical":
            return _empirical_int_q(self.values, p)
        lo = self.dist.lower
        if math.isfinite(lo):
            # int_0^p Q = E[X; X <= Q(p)] = p Q(p) - int_lo^Q(p) F(x) dx
            t = float(self.dist.ppf(p))
            val, _ = integrate.quad(lambda x: float(self.dist.cdf(x)), lo, t,
                                    epsabs=0.0, epsrel=1e-11, limit=400)
            return p * t - val
        val, _ = integrate.quad(lambda u: float(self.dist.ppf(u)), 0.0, p,
                                epsabs=0.0, epsrel=1e-11, limit=400)
        return val


def _empirical_int_q(x: np.ndarray, p: float) -> float:
    """Exact integral of the piecewise-linear empirical quantile over (0, p)."""
    n = x.size
    pos = (np.arange(1, n + 1) - 0.5) / n
    if p <= pos[0]:
        return p * x[0]
    k = int(np.searchsorted(pos, p, side="right")) - 1  # pos[k] <= p
    total = pos[0] * x[0] + float(np.sum(0.5 * (x[:k] + x[1:k + 1]) / n))
    if k == n - 1:
        return total + (p - pos[-1]) * x[-1]
    qp = x[k] + (x[k + 1] - x[k]) * (p - pos[k]) * n
    return total + 0.5 * (x[k] + qp) * (p - pos[k])


def _check_p(p: float):
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")


def r_functional(model: RuntimeModel, p: float) -> float:
    _check_p(p)
    if model.infinite_mean:
        return 0.0
    q = float(model.quantile_fn(p))
    r = ((1.0 - p) * q + model.integrated_quantile(p)) / model.mean
    return min(max(r, 0.0), 1.0)


def default_grid(size: int = DEFAULT_GRID_SIZE, tail: float = GRID_TAIL) -> np.ndarray:
    """Probabilities with 1 - p log-spaced from 0.99 down to ``tail``."""
    return np.sort(1.0 - np.geomspace(0.99, tail, size))


@dataclass(frozen=True)
class RestartVerdict:
    useful: bool
    witness_p: float | None
    witness_threshold: float | None
    margin: float
    grid_size: int
    heuristic: bool = False

    def to_dict(self) -> dict:
        return {"useful": self.useful, "witness_p": self.witness_p,
                "witness_threshold": self.witness_threshold, "margin": self.margin,
                "grid_size": self.grid_size, "heuristic": self.heuristic}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def restarts_useful(model: RuntimeModel, grid=None) -> RestartVerdict:
    """Scan R(p) - p; the witness is the p with the smallest E[X_t] (largest 1 - R/p)."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any((grid <= 0) | (grid >= 1)):
        raise ValueError("grid must be a nonempty subset of (0, 1)")
    heuristic = model.kind == "empirical"
    if model.infinite_mean:
        p = 0.5
        return RestartVerdict(True, p, float(model.quantile_fn(p)), p, int(grid.size), heuristic)
    r = np.array([r_functional(model, float(p)) for p in grid])
    gain = 1.0 - r / grid
    i = int(np.argmax(gain))
    if grid[i] - r[i] > USEFUL_TOL:
        p = float(grid[i])
        return RestartVerdict(True, p, float(model.quantile_fn(p)), float(p - r[i]),
                              int(grid.size), heuristic)
    return RestartVerdict(False, None, None, float(np.max(grid - r)), int(grid.size), heuristic)


def restarted_mean_exact(dist: Distribution, t: float) -> float:
    """E[X_t] = E[min(X, t)] / P[X <= t] for a fixed cutoff t."""
    f = float(dist.cdf(t))
    if f <= 0.0:
        raise ValueError(f"P[X <= {t}] is numerically zero")
    lo = dist.lower
    val, _ = integrate.quad(lambda x: float(dist.sf(x)), lo, t, epsabs=0.0,
                            epsrel=1e-11, limit=400)
    return (lo + val) / f


def restarted_mean_mc(dist: Distribution, t: float, reps: int, rng: np.random.Generator,
                      epoch_cap: int = EPOCH_CAP) -> tuple[float, float]:
    """Simulate cutoff-t restarts; returns (mean total runtime, standard error).

    Each repetition keeps drawing runtimes, paying t for every draw above the
    cutoff, until one finishes. Repetitions still running after
    ``epoch_cap`` epochs are charged their elapsed time (counted as censored).
    """
    if not t > 0:
        raise ValueError("cutoff must be positive")
    if reps < 1000:
        raise ValueError("need at least 1000 repetitions")
    if float(dist.cdf(t)) <= 0.0:
        raise ValueError(f"P[X <= {t}] is numerically zero")
    total = np.zeros(reps)
    active = np.arange(reps)
    for _ in range(epoch_cap):
        if active.size == 0:
            break
        x = np.asarray(dist.sample(rng, active.size), dtype=float)
        done = x <= t
        total[active[done]] += x[done]
        total[active[~done]] += t
        active = active[~done]
    return float(total.mean()), float(total.std(ddof=1) / math.sqrt(reps))


@dataclass(frozen=True)
class TrendReport:
    trend: str  # decreasing | constant | increasing | mixed
    grid: tuple
    rates: tuple


def hazard_trend(dist: Distribution, grid) -> TrendReport:
    """Classify the hazard rate over the upper half of an increasing time grid.

    ``decreasing`` means strictly decreasing there and ending below a tenth
    of the largest rate seen on the grid (i.e. heading to zero).
    """
    g = np.asarray(grid, dtype=float)
    if g.size < 4 or np.any(np.diff(g) <= 0):
        raise ValueError("grid must be increasing with at least 4 points")
    r = np.asarray(hazard_rate(dist, g), dtype=float)
    tail = r[g.size // 2:]
    rel = np.diff(tail) / tail[:-1]
    if np.all(np.abs(rel) <= 1e-6):
        trend = "constant"
    elif np.all(rel < 0) and tail[-1] < 0.1 * r.max():
        trend = "decreasing"
    elif np.all(rel > 0):
        trend = "increasing"
    else:
        trend = "mixed"
    return TrendReport(trend, tuple(g.tolist()), tuple(r.tolist()))


__all__ = ["RuntimeModel", "RestartVerdict", "TrendReport", "SaturationError", "default_grid",
           "hazard_trend", "numeric_mean", "r_functional", "restarted_mean_exact",
           "restarted_mean_mc", "restarts_useful"]
