"""Normal, lognormal, Johnson SB (plus exponential, uniform, Pareto) distributions.

Each family has plain functions over a parameter record (``sb_cdf(x, p)``
and so on) and a distribution handle class with a common interface
(pdf, logpdf, cdf, sf, logsf, ppf, isf, sample, mean) used by the fitting
and restart code.

Standard normal cdf/quantile come from ``scipy.special`` (ndtr, log_ndtr,
ndtri), whose absolute errors are far below 1e-12. Survival functions are
always evaluated as Phi(-z), never as 1 - Phi(z).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, special

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class SaturationError(ArithmeticError):
    """Survival probability underflowed to zero, hazard is undefined."""


def _check_q(q):
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) | (q >= 1)) or np.any(np.isnan(q)):
        raise ValueError("quantile level must lie strictly inside (0, 1)")
    return q


def _out(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


# --- parameter records -----------------------------------------------------

@dataclass(frozen=True)
class NormalParams:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class LogNormalParams:
    mu: float
    sigma: float
    xi: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SbParams:
    gamma: float
    delta: float
    lam: float
    xi: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    @property
    def a(self) -> float:
        return self.xi

    @property
    def b(self) -> float:
        return self.xi + self.lam

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "delta": self.delta, "lambda": self.lam, "xi": self.xi}

    @classmethod
    def from_dict(cls, d: dict) -> "SbParams":
        return cls(d["gamma"], d["delta"], d["lambda"], d["xi"])


# --- standard normal --------------------------------------------------------

def normal_pdf(x, p: NormalParams = NormalParams()):
    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    return _out(np.exp(-0.5 * z * z - LOG_SQRT_2PI) / p.sigma)


def normal_cdf(x, p: NormalParams = NormalParams()):
    return _out(special.ndtr((np.asarray(x, dtype=float) - p.mu) / p.sigma))


def normal_sf(x, p: NormalParams = NormalParams()):
    return _out(special.ndtr(-(np.asarray(x, dtype=float) - p.mu) / p.sigma))


def normal_quantile(q, p: NormalParams = NormalParams()):
    return _out(p.mu + p.sigma * special.ndtri(_check_q(q)))


def standard_normal_polar(rng: np.random.Generator, size: int) -> np.ndarray:
    """Marsaglia polar method; each accepted pair yields two draws."""
    out = np.empty(size)
    filled = 0
    while filled < size:
        need = size - filled
        m = int(need * 0.66) + 8
        u = rng.uniform(-1.0, 1.0, m)
        v = rng.uniform(-1.0, 1.0, m)
        s = u * u + v * v
        ok = (s > 0) & (s < 1)
        u, v, s = u[ok], v[ok], s[ok]
        f = np.sqrt(-2.0 * np.log(s) / s)
        z = np.concatenate([u * f, v * f])[:need]
        out[filled:filled + z.size] = z
        filled += z.size
    return out


def normal_sample(p: NormalParams, rng: np.random.Generator, size: int = 1):
    return p.mu + p.sigma * standard_normal_polar(rng, size)


# --- Johnson SB -------------------------------------------------------------

def _sb_z(x, p: SbParams):
    with np.errstate(divide="ignore", invalid="ignore"):
        return p.gamma + p.delta * np.log((x - p.xi) / (p.xi + p.lam - x))


def sb_logpdf(x, p: SbParams):
    x = np.asarray(x, dtype=float)
    inside = (x > p.a) & (x < p.b)
    xs = np.where(inside, x, p.a + 0.5 * p.lam)
    z = _sb_z(xs, p)
    lp = (math.log(p.delta) + math.log(p.lam) - LOG_SQRT_2PI
          - np.log(xs - p.a) - np.log(p.b - xs) - 0.5 * z * z)
    return _out(np.where(inside, lp, -np.inf))


def sb_pdf(x, p: SbParams):
    return _out(np.exp(sb_logpdf(x, p)))


def sb_cdf(x, p: SbParams):
    x = np.asarray(x, dtype=float)
    inside = (x > p.a) & (x < p.b)
    z = _sb_z(np.where(inside, x, p.a + 0.5 * p.lam), p)
    return _out(np.where(inside, special.ndtr(z), np.where(x <= p.a, 0.0, 1.0)))


def sb_sf(x, p: SbParams):
    x = np.asarray(x, dtype=float)
    inside = (x > p.a) & (x < p.b)
    z = _sb_z(np.where(inside, x, p.a + 0.5 * p.lam), p)
    return _out(np.where(inside, special.ndtr(-z), np.where(x <= p.a, 1.0, 0.0)))


def sb_logsf(x, p: SbParams):
    x = np.asarray(x, dtype=float)
    inside = (x > p.a) & (x < p.b)
    z = _sb_z(np.where(inside, x, p.a + 0.5 * p.lam), p)
    return _out(np.where(inside, special.log_ndtr(-z), np.where(x <= p.a, 0.0, -np.inf)))


def _sb_from_z(z, p: SbParams):
    return p.xi + p.lam * special.expit((z - p.gamma) / p.delta)


def sb_quantile(q, p: SbParams):
    return _out(_sb_from_z(special.ndtri(_check_q(q)), p))


def sb_sample(p: SbParams, rng: np.random.Generator, size: int = 1):
    return _sb_from_z(standard_normal_polar(rng, size), p)


def sb_scale(p: SbParams, g: float) -> SbParams:
    """Parameters of g*X for X ~ SB(p): both support ends scale, shapes unchanged."""
    if not g > 0:
        raise ValueError("scale factor must be positive")
    return SbParams(p.gamma, p.delta, g * p.lam, g * p.xi)


# --- lognormal --------------------------------------------------------------

def _ln_z(x, p: LogNormalParams):
    x = np.asarray(x, dtype=float)
    inside = x > p.xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (np.log(np.where(inside, x - p.xi, 1.0)) - p.mu) / p.sigma
    return x, inside, z


def lognormal_logpdf(x, p: LogNormalParams):
    x, inside, z = _ln_z(x, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = -np.log(np.where(inside, x - p.xi, 1.0)) - math.log(p.sigma) - LOG_SQRT_2PI - 0.5 * z * z
    return _out(np.where(inside, lp, -np.inf))


def lognormal_pdf(x, p: LogNormalParams):
    return _out(np.exp(lognormal_logpdf(x, p)))


def lognormal_cdf(x, p: LogNormalParams):
    x, inside, z = _ln_z(x, p)
    return _out(np.where(inside, special.ndtr(z), 0.0))


def lognormal_sf(x, p: LogNormalParams):
    x, inside, z = _ln_z(x, p)
    return _out(np.where(inside, special.ndtr(-z), 1.0))


def lognormal_logsf(x, p: LogNormalParams):
    x, inside, z = _ln_z(x, p)
    return _out(np.where(inside, special.log_ndtr(-z), 0.0))


def lognormal_quantile(q, p: LogNormalParams):
    return _out(p.xi + np.exp(p.mu + p.sigma * special.ndtri(_check_q(q))))


def lognormal_sample(p: LogNormalParams, rng: np.random.Generator, size: int = 1):
    return p.xi + np.exp(p.mu + p.sigma * standard_normal_polar(rng, size))


def shifted_reciprocal_sb(p: LogNormalParams, c: float) -> SbParams:
    """Law of 1/(c + X) for two-parameter X ~ LogN(mu, sigma^2)."""
    if not c > 0:
        raise ValueError("c must be positive")
    if p.xi != 0:
        raise ValueError("needs a two-parameter lognormal (xi = 0)")
    return SbParams(gamma=(p.mu - math.log(c)) / p.sigma, delta=1.0 / p.sigma,
                    lam=1.0 / c, xi=0.0)


def lognormal_embedding_sb(mu: float, delta: float, a: float, b: float) -> SbParams:
    """SB on (a, b) that tends to a + LogN(mu, 1/delta^2) as b grows."""
    if not b > a:
        raise ValueError("need b > a")
    if not delta > 0:
        raise ValueError("delta must be positive")
    return SbParams(gamma=delta * (math.log(b - a) - mu), delta=delta, lam=b - a, xi=a)


# --- distribution handles ---------------------------------------------------

class Distribution:
    """Common interface; subclasses fill in the family-specific parts."""

    family = "abstract"
    n_params = 0
    lower = 0.0
    upper = math.inf

    @property
    def bounded_above(self) -> bool:
        return math.isfinite(self.upper)

    def pdf(self, x):
        return _out(np.exp(self.logpdf(x)))

    def logpdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        raise NotImplementedError

    def logsf(self, x):
        with np.errstate(divide="ignore"):
            return _out(np.log(self.sf(x)))

    def ppf(self, q):
        raise NotImplementedError

    def isf(self, q):
        """Upper quantile, ppf(1 - q), accurate for tiny q."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int = 1):
        raise NotImplementedError

    def mean(self) -> float:
        return numeric_mean(self)


class Normal(Distribution):
    family = "normal"
    n_params = 2
    lower = -math.inf

    def __init__(self, params: NormalParams):
        self.params = params

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.params.mu) / self.params.sigma
        return _out(-0.5 * z * z - LOG_SQRT_2PI - math.log(self.params.sigma))

    def cdf(self, x):
        return normal_cdf(x, self.params)

    def sf(self, x):
        return normal_sf(x, self.params)

    def logsf(self, x):
        return _out(special.log_ndtr(-(np.asarray(x, dtype=float) - self.params.mu) / self.params.sigma))

    def ppf(self, q):
        return normal_quantile(q, self.params)

    def isf(self, q):
        return _out(self.params.mu - self.params.sigma * special.ndtri(_check_q(q)))

    def sample(self, rng, size=1):
        return normal_sample(self.params, rng, size)

    def mean(self):
        return self.params.mu


class LogNormal(Distribution):
    family = "lognormal"

    def __init__(self, params: LogNormalParams, n_params: int | None = None):
        self.params = params
        self.lower = params.xi
        self.n_params = n_params if n_params is not None else (2 if params.xi == 0 else 3)

    def logpdf(self, x):
        return lognormal_logpdf(x, self.params)

    def cdf(self, x):
        return lognormal_cdf(x, self.params)

    def sf(self, x):
        return lognormal_sf(x, self.params)

    def logsf(self, x):
        return lognormal_logsf(x, self.params)

    def ppf(self, q):
        return lognormal_quantile(q, self.params)

    def isf(self, q):
        p = self.params
        return _out(p.xi + np.exp(p.mu - p.sigma * special.ndtri(_check_q(q))))

    def sample(self, rng, size=1):
        return lognormal_sample(self.params, rng, size)

    def mean(self):
        p = self.params
        return p.xi + math.exp(p.mu + 0.5 * p.sigma**2)


class JohnsonSB(Distribution):
    family = "sb"
    n_params = 4

    def __init__(self, params: SbParams):
        self.params = params
        self.lower = params.a
        self.upper = params.b

    def logpdf(self, x):
        return sb_logpdf(x, self.params)

    def cdf(self, x):
        return sb_cdf(x, self.params)

    def sf(self, x):
        return sb_sf(x, self.params)

    def logsf(self, x):
        return sb_logsf(x, self.params)

    def ppf(self, q):
        return sb_quantile(q, self.params)

    def isf(self, q):
        return _out(_sb_from_z(-special.ndtri(_check_q(q)), self.params))

    def sample(self, rng, size=1):
        return sb_sample(self.params, rng, size)

    def mean(self):
        p = self.params
        val, _ = integrate.quad(
            lambda z: special.expit((z - p.gamma) / p.delta) * math.exp(-0.5 * z * z - LOG_SQRT_2PI),
            -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)
        return p.xi + p.lam * val


class Exponential(Distribution):
    family = "exponential"
    n_params = 1

    def __init__(self, rate: float = 1.0):
        if not rate > 0:
            raise ValueError("rate must be positive")
        self.rate = rate

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.where(x >= 0, math.log(self.rate) - self.rate * x, -np.inf))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0)), 0.0))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.exp(-self.rate * np.maximum(x, 0)))

    def logsf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(-self.rate * np.maximum(x, 0))

    def ppf(self, q):
        return _out(-np.log1p(-_check_q(q)) / self.rate)

    def isf(self, q):
        return _out(-np.log(_check_q(q)) / self.rate)

    def sample(self, rng, size=1):
        return self.isf(1.0 - rng.random(size))

    def mean(self):
        return 1.0 / self.rate


class Uniform(Distribution):
    family = "uniform"
    n_params = 2

    def __init__(self, lo: float = 0.0, hi: float = 1.0):
        if not hi > lo:
            raise ValueError("need hi > lo")
        self.lower, self.upper = lo, hi

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return _out(np.where((x >= self.lower) & (x <= self.upper),
                                 -math.log(self.upper - self.lower), -np.inf))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.clip((x - self.lower) / (self.upper - self.lower), 0.0, 1.0))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.clip((self.upper - x) / (self.upper - self.lower), 0.0, 1.0))

    def ppf(self, q):
        return _out(self.lower + (self.upper - self.lower) * _check_q(q))

    def isf(self, q):
        return _out(self.upper - (self.upper - self.lower) * _check_q(q))

    def sample(self, rng, size=1):
        return rng.uniform(self.lower, self.upper, size)

    def mean(self):
        return 0.5 * (self.lower + self.upper)


class Pareto(Distribution):
    """Pareto type I with scale ``xm`` and tail index ``alpha`` (infinite mean for alpha <= 1)."""
    family = "pareto"
    n_params = 2

    def __init__(self, alpha: float, xm: float = 1.0):
        if not (alpha > 0 and xm > 0):
            raise ValueError("alpha and xm must be positive")
        self.alpha, self.xm = alpha, xm
        self.lower = xm

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lp = math.log(self.alpha) + self.alpha * math.log(self.xm) - (self.alpha + 1) * np.log(x)
        return _out(np.where(x >= self.xm, lp, -np.inf))

    def cdf(self, x):
        return _out(1.0 - np.asarray(self.sf(x)))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.where(x > self.xm, (self.xm / np.maximum(x, self.xm)) ** self.alpha, 1.0))

    def ppf(self, q):
        return _out(self.xm * (1.0 - _check_q(q)) ** (-1.0 / self.alpha))

    def isf(self, q):
        return _out(self.xm * _check_q(q) ** (-1.0 / self.alpha))

    def sample(self, rng, size=1):
        return self.isf(1.0 - rng.random(size))


def numeric_mean(dist: Distribution, divergence_factor: float = 1e6) -> float:
    """E[X] for X >= lower via the survival integral; ``inf`` when it keeps growing.

    The integral of S over [lower, T] is tracked over a geometric sequence of T
    reaching ``divergence_factor`` times the median; growth that has not slowed
    by the end flags an infinite mean.
    """
    lo = dist.lower
    if not math.isfinite(lo):
        raise ValueError("numeric_mean needs a finite lower support end")
    if dist.bounded_above:
        val, _ = integrate.quad(lambda t: float(dist.sf(t)), lo, dist.upper, limit=200)
        return lo + val
    scale = max(float(dist.ppf(0.5)) - lo, 1e-12)
    edges = lo + scale * np.logspace(-6, math.log10(divergence_factor) + 6, 49)
    edges = np.concatenate([[lo], edges])
    parts = [integrate.quad(lambda t: float(dist.sf(t)), a, b, limit=200)[0]
             for a, b in zip(edges[:-1], edges[1:])]
    tail = sum(parts[-6:])
    total = sum(parts)
    if tail > 1e-3 * total:
        return math.inf
    return lo + total


def hazard_rate(dist: Distribution, t):
    """f(t) / S(t), evaluated in log space."""
    logsf = np.asarray(dist.logsf(t), dtype=float)
    if np.any(np.isneginf(logsf)):
        raise SaturationError(f"survival function is numerically zero at t={t}")
    return _out(np.exp(np.asarray(dist.logpdf(t), dtype=float) - logsf))


LONG_TAIL_RATIO_TOL = 0.02


def tail_grid(dist: Distribution, points: int = 40, tail_prob: float = 1e-12) -> np.ndarray:
    """Geometric grid from the median to the (1 - tail_prob) quantile."""
    lo = max(float(dist.ppf(0.5)), 1e-9)
    hi = float(dist.isf(tail_prob))
    return np.geomspace(lo, hi, points)


def long_tail_diagnostic(dist: Distribution, grid=None) -> str:
    """'long_tailed', 'not_long_tailed' or 'inconclusive'.

    Two checks on a geometric tail grid: the shift ratios S(x+y)/S(x) for
    y in {1, 10} at the largest grid point (within 0.02 of 1), and the hazard
    trend (decreasing toward zero). Bounded support is never long-tailed.
    """
    from .restarts import hazard_trend  # local: restarts imports this module

    if dist.bounded_above:
        return "not_long_tailed"
    grid = tail_grid(dist) if grid is None else np.asarray(grid, dtype=float)
    x = grid[-1]
    ls = float(dist.logsf(x))
    ratios = [math.exp(float(dist.logsf(x + y)) - ls) for y in (1.0, 10.0)]
    ratio_long = all(abs(r - 1.0) <= LONG_TAIL_RATIO_TOL for r in ratios)
    hazard_long = hazard_trend(dist, grid).trend == "decreasing"
    if ratio_long and hazard_long:
        return "long_tailed"
    if not ratio_long and not hazard_long:
        return "not_long_tailed"
    return "inconclusive"
