"""Maximum-likelihood fits, empirical distribution functions and goodness-of-fit tests.

The SB likelihood is profiled: for a fixed support (xi, lambda) the logit
transform u = ln((x - xi)/(xi + lambda - x)) must be N(-gamma/delta, 1/delta^2),
so gamma and delta have closed forms and only the two support parameters are
searched (Nelder-Mead on log margins below min(x) and above max(x)).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import optimize, stats

from .distributions import (LOG_SQRT_2PI, Distribution, JohnsonSB, LogNormal,
                            LogNormalParams, SbParams)
from .rng import derive_seed, numpy_rng

log = logging.getLogger(__name__)

SB = "SB"
LOGNORMAL3 = "LogNormal3"
LOGNORMAL2 = "LogNormal2"
FAMILY_ALIASES = {"sb": SB, "lognormal": LOGNORMAL3, "lognormal3": LOGNORMAL3,
                  "lognormal2": LOGNORMAL2}
MIN_FIT_N = 20
MIN_CHI2_N = 25
# search box for the log support margins, relative to ln(range)
MARGIN_LO = -20.0
MARGIN_HI_XI = 8.0
MARGIN_HI_LAM = 14.0


class FitError(RuntimeError):
    pass


class FitDataError(FitError):
    """The sample itself is unusable (too small, constant, non-finite)."""


def canonical_family(name: str) -> str:
    key = name.lower().replace("-", "").replace("_", "")
    if key not in FAMILY_ALIASES:
        raise ValueError(f"unknown family {name!r}")
    return FAMILY_ALIASES[key]


@dataclass(frozen=True)
class Sample:
    """Per-instance hardness means; ``weight`` is the runs-per-point noise divisor."""
    values: np.ndarray
    weight: int = 1
    tainted: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("sample is empty")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("sample values must be finite and positive")
        if self.weight < 1:
            raise ValueError("weight must be >= 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


def _values(sample) -> np.ndarray:
    if isinstance(sample, Sample):
        return sample.values
    v = np.asarray(sample, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("sample is empty")
    return v


# --- empirical functions ----------------------------------------------------

def ecdf(sample, t):
    x = np.sort(_values(sample))
    r = np.searchsorted(x, np.asarray(t, dtype=float), side="right") / x.size
    return float(r) if np.ndim(r) == 0 else r


def empirical_sf(sample, t):
    return 1.0 - np.asarray(ecdf(sample, t))


def empirical_quantile(sample, q):
    """Piecewise-linear interpolant through (( k - 0.5)/n, x_(k)), flat outside."""
    qa = np.asarray(q, dtype=float)
    if np.any((qa <= 0) | (qa >= 1)) or np.any(np.isnan(qa)):
        raise ValueError("q must lie strictly inside (0, 1)")
    x = np.sort(_values(sample))
    pos = (np.arange(1, x.size + 1) - 0.5) / x.size
    r = np.interp(qa, pos, x)
    return float(r) if r.ndim == 0 else r


class EmpiricalDistribution(Distribution):
    """The ecdf as a distribution handle (step cdf with explicit left limits)."""
    family = "empirical"

    def __init__(self, sample):
        self.x = np.sort(_values(sample))
        self.lower, self.upper = float(self.x[0]), float(self.x[-1])
        self.n_params = 0

    def cdf(self, t):
        return ecdf(self.x, t)

    def cdf_left(self, t):
        r = np.searchsorted(self.x, np.asarray(t, dtype=float), side="left") / self.x.size
        return float(r) if np.ndim(r) == 0 else r

    def sf(self, t):
        return 1.0 - np.asarray(self.cdf(t))

    def ppf(self, q):
        return empirical_quantile(self.x, q)

    def mean(self):
        return float(self.x.mean())


# --- SB maximum likelihood --------------------------------------------------

@njit(cache=True)
def _sb_profile(x, w, xi, lam):
    """Profile log-likelihood and (gamma, delta) for a fixed support.

    ``x`` holds distinct values and ``w`` their multiplicities.
    """
    m = x.size
    b = xi + lam
    n = 0.0
    su = 0.0
    sl = 0.0
    u = np.empty(m)
    for i in range(m):
        lo = x[i] - xi
        hi = b - x[i]
        if lo <= 0.0 or hi <= 0.0:
            return -np.inf, 0.0, 1.0
        la = math.log(lo)
        lb = math.log(hi)
        u[i] = la - lb
        n += w[i]
        su += w[i] * u[i]
        sl += w[i] * (la + lb)
    mu = su / n
    v = 0.0
    for i in range(m):
        d = u[i] - mu
        v += w[i] * d * d
    v /= n
    if v <= 0.0:
        return -np.inf, 0.0, 1.0
    s = math.sqrt(v)
    ll = -n * math.log(s) + n * math.log(lam) - 0.5 * n - n * LOG_SQRT_2PI - sl
    return ll, -mu / s, 1.0 / s


@njit(cache=True)
def _sb_negll(theta, x, w, xmin, xmax):
    xi = xmin - math.exp(theta[0])
    lam = xmax - xi + math.exp(theta[1])
    ll = _sb_profile(x, w, xi, lam)[0]
    return -ll if np.isfinite(ll) else 1e300


@njit(cache=True)
def _nelder_mead_sb(th0, x, w, xmin, xmax, lo, hi, step, xatol, fatol, maxiter):
    """Bounded 2-D Nelder-Mead on the profiled SB objective (points clipped to the box).

    ``fatol`` is relative to |f| once |f| > 1.
    """
    sim = np.empty((3, 2))
    fv = np.empty(3)
    for i in range(3):
        for d in range(2):
            sim[i, d] = th0[d]
        if i > 0:
            sim[i, i - 1] += step
    for i in range(3):
        for d in range(2):
            sim[i, d] = min(max(sim[i, d], lo[d]), hi[d])
        fv[i] = _sb_negll(sim[i], x, w, xmin, xmax)
    pt = np.empty(2)
    pe = np.empty(2)
    for it in range(maxiter):
        order = np.argsort(fv)
        sim = sim[order].copy()
        fv = fv[order].copy()
        spread = 0.0
        for i in range(1, 3):
            for d in range(2):
                spread = max(spread, abs(sim[i, d] - sim[0, d]))
        if spread <= xatol and fv[2] - fv[0] <= fatol * max(1.0, abs(fv[0])):
            break
        c0 = 0.5 * (sim[0, 0] + sim[1, 0])
        c1 = 0.5 * (sim[0, 1] + sim[1, 1])
        pt[0] = min(max(2.0 * c0 - sim[2, 0], lo[0]), hi[0])
        pt[1] = min(max(2.0 * c1 - sim[2, 1], lo[1]), hi[1])
        fr = _sb_negll(pt, x, w, xmin, xmax)
        if fr < fv[0]:
            pe[0] = min(max(3.0 * c0 - 2.0 * sim[2, 0], lo[0]), hi[0])
            pe[1] = min(max(3.0 * c1 - 2.0 * sim[2, 1], lo[1]), hi[1])
            fe = _sb_negll(pe, x, w, xmin, xmax)
            if fe < fr:
                sim[2, 0], sim[2, 1], fv[2] = pe[0], pe[1], fe
            else:
                sim[2, 0], sim[2, 1], fv[2] = pt[0], pt[1], fr
            continue
        if fr < fv[1]:
            sim[2, 0], sim[2, 1], fv[2] = pt[0], pt[1], fr
            continue
        if fr < fv[2]:
            pe[0] = c0 + 0.5 * (pt[0] - c0)
            pe[1] = c1 + 0.5 * (pt[1] - c1)
        else:
            pe[0] = c0 + 0.5 * (sim[2, 0] - c0)
            pe[1] = c1 + 0.5 * (sim[2, 1] - c1)
        fc = _sb_negll(pe, x, w, xmin, xmax)
        if fc < min(fr, fv[2]):
            sim[2, 0], sim[2, 1], fv[2] = pe[0], pe[1], fc
            continue
        for i in range(1, 3):
            for d in range(2):
                sim[i, d] = sim[0, d] + 0.5 * (sim[i, d] - sim[0, d])
            fv[i] = _sb_negll(sim[i], x, w, xmin, xmax)
    b = np.argmin(fv)
    return sim[b].copy(), fv[b]


def sb_loglik(x, p: SbParams) -> float:
    from .distributions import sb_logpdf
    return float(np.sum(sb_logpdf(np.asarray(x, dtype=float), p)))


@dataclass(frozen=True)
class FitResult:
    family: str
    params: object
    loglik: float
    starts: tuple = field(default=(), compare=False)

    @property
    def n_params(self) -> int:
        return {SB: 4, LOGNORMAL3: 3, LOGNORMAL2: 2}[self.family]

    def distribution(self) -> Distribution:
        if self.family == SB:
            return JohnsonSB(self.params)
        return LogNormal(self.params, n_params=self.n_params)


def _check_fit_input(sample) -> np.ndarray:
    x = np.ascontiguousarray(_values(sample), dtype=float)
    if x.size < MIN_FIT_N:
        raise FitDataError(f"need at least {MIN_FIT_N} points, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise FitDataError("sample has non-finite values")
    if x.max() == x.min():
        raise FitDataError("sample is constant")
    return x


def _sb_starts(x: np.ndarray, extra=()) -> list[np.ndarray]:
    xmin, xmax = x.min(), x.max()
    rng_ = xmax - xmin
    lr = math.log(rng_)
    # quantile-based guesses: margins as fractions of the range, widest last
    fr = [(0.05, 0.05), (0.01, 0.5), (0.3, 0.3), (0.002, 3.0), (0.5, 20.0)]
    starts = [np.array([math.log(a * rng_), math.log(b * rng_)]) for a, b in fr]
    for p in extra:
        s = math.log(max(xmin - p.xi, rng_ * math.exp(MARGIN_LO)))
        t = math.log(max(p.xi + p.lam - xmax, rng_ * math.exp(MARGIN_LO)))
        starts.insert(0, np.clip(np.array([s, t]), lr + MARGIN_LO, lr + MARGIN_HI_LAM))
    return starts


def mle_fit_sb(sample, starts: int = 5, warm=()) -> FitResult:
    """Four-parameter Johnson SB maximum-likelihood fit.

    ``starts`` quantile-based starting supports are tried (plus any ``warm``
    SbParams first); the best optimum is re-polished from its own point.
    """
    x = _check_fit_input(sample)
    xmin, xmax = float(x.min()), float(x.max())
    lr = math.log(xmax - xmin)
    bounds = [(lr + MARGIN_LO, lr + MARGIN_HI_XI), (lr + MARGIN_LO, lr + MARGIN_HI_LAM)]
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    ux, cnt = np.unique(x, return_counts=True)
    w = cnt.astype(float)
    cand = _sb_starts(x, warm)[: starts + len(warm)]
    best_th, best_f, seen = None, math.inf, []
    for th0 in cand:
        th, f = _nelder_mead_sb(th0, ux, w, xmin, xmax, lo, hi, 0.5, 1e-8, 1e-13, 5000)
        seen.append(-float(_sb_negll(th0, ux, w, xmin, xmax)))
        if f < 1e299 and f < best_f:
            best_th, best_f = th, f
    if best_th is None:
        raise FitError("optimizer found no finite log-likelihood")
    # restart from the optimum with a fresh simplex until it stops improving
    for _ in range(5):
        th, f = _nelder_mead_sb(best_th, ux, w, xmin, xmax, lo, hi, 0.05, 1e-9, 1e-14, 5000)
        if f < best_f - 1e-12 * max(1.0, abs(best_f)):
            best_th, best_f = th, f
        else:
            break
    xi = xmin - math.exp(best_th[0])
    lam = xmax - xi + math.exp(best_th[1])
    ll, gamma, delta = _sb_profile(ux, w, xi, lam)
    return FitResult(SB, SbParams(float(gamma), float(delta), float(lam), float(xi)),
                     float(ll), tuple(seen))


# --- lognormal maximum likelihood -------------------------------------------

def _ln2(y: np.ndarray):
    ly = np.log(y)
    mu = float(ly.mean())
    sigma = float(ly.std())
    if sigma <= 0:
        return -math.inf, mu, sigma
    ll = float(-ly.sum() - y.size * (math.log(sigma) + LOG_SQRT_2PI + 0.5))
    return ll, mu, sigma


def mle_fit_lognormal(sample, three_param: bool = True) -> FitResult:
    """Two-parameter closed form, or a profile-likelihood search over the location."""
    x = _check_fit_input(sample)
    if not three_param:
        if np.any(x <= 0):
            raise FitDataError("two-parameter lognormal needs positive values")
        ll, mu, sigma = _ln2(x)
        return FitResult(LOGNORMAL2, LogNormalParams(mu, sigma, 0.0), ll)
    xmin = float(x.min())
    lr = math.log(float(x.max()) - xmin)

    def negprof(s):
        ll = _ln2(x - (xmin - math.exp(s)))[0]
        return -ll if np.isfinite(ll) else 1e300

    grid = np.linspace(lr + MARGIN_LO, lr + MARGIN_HI_LAM, 69)
    vals = np.array([negprof(s) for s in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    r = optimize.minimize_scalar(negprof, bounds=(lo, hi), method="bounded",
                                 options={"xatol": 1e-10})
    s = r.x if r.fun <= vals[i] else grid[i]
    xi = xmin - math.exp(s)
    ll, mu, sigma = _ln2(x - xi)
    if not np.isfinite(ll):
        raise FitError("optimizer found no finite log-likelihood")
    return FitResult(LOGNORMAL3, LogNormalParams(mu, sigma, float(xi)), ll)


def fit_family(sample, family: str, **kw) -> FitResult:
    family = canonical_family(family)
    if family == SB:
        return mle_fit_sb(sample, **kw)
    return mle_fit_lognormal(sample, three_param=(family == LOGNORMAL3))


# --- goodness of fit --------------------------------------------------------

def n_bins(n: int) -> int:
    return int(min(max(n // 25, 8), 50))


@dataclass(frozen=True)
class Chi2Result:
    chi2: float
    bins: int
    dof: int
    counts: tuple

    @property
    def pvalue(self) -> float:
        """Asymptotic chi-square tail probability (the bootstrap p-value is preferred)."""
        return float(stats.chi2.sf(self.chi2, self.dof)) if self.dof > 0 else float("nan")


# samples with fewer distinct values than this fraction of n are treated as lattice data
TIED_FRACTION = 0.9


def _grouped_counts(x: np.ndarray, fitted: Distribution, k: int):
    """Bins made of whole atoms: cell edges sit midway between distinct values."""
    ux, cnt = np.unique(x, return_counts=True)
    n = x.size
    mids = 0.5 * (ux[:-1] + ux[1:])
    cum = np.concatenate([np.asarray(fitted.cdf(mids), dtype=float), [1.0]])
    # cut after the first cell whose right-edge cdf reaches each j/k
    cuts = np.unique(np.searchsorted(cum, np.arange(1, k) / k, side="left"))
    cuts = cuts[cuts < ux.size - 1]
    bounds = np.concatenate([cuts, [ux.size - 1]])
    hi_cdf = cum[bounds]
    mass = np.diff(np.concatenate([[0.0], hi_cdf]))
    obs = np.add.reduceat(cnt, np.concatenate([[0], bounds[:-1] + 1]))
    keep = mass > 0
    if not np.all(keep):
        raise ValueError("fitted distribution puts no mass on part of the sample range")
    return obs, n * mass


def chi2_statistic(sample, fitted: Distribution, n_params: int | None = None,
                   grouped: bool | None = None) -> Chi2Result:
    """Pearson statistic over k equiprobable bins of the fitted cdf.

    Heavily tied (lattice) samples cannot be split into equiprobable bins, as
    a single atom may carry more than 1/k of the mass. For those (``grouped``,
    chosen automatically when under 90% of the values are distinct) the bins
    are unions of whole atoms, each atom owning the cell between the midpoints
    to its neighbours, cut as close to equiprobable as the atoms allow, with
    expected counts n * (fitted mass of the bin).
    """
    x = _values(sample)
    n = x.size
    if n < MIN_CHI2_N:
        raise ValueError(f"need at least {MIN_CHI2_N} points, got {n}")
    if np.any(np.isneginf(np.asarray(fitted.logpdf(x)))):
        raise ValueError("sample has points where the fitted distribution has no density")
    k = n_bins(n)
    if grouped is None:
        grouped = np.unique(x).size < TIED_FRACTION * n
    if grouped:
        counts, expected = _grouped_counts(x, fitted, k)
    else:
        u = np.asarray(fitted.cdf(x), dtype=float)
        idx = np.clip(np.floor(u * k).astype(int), 0, k - 1)
        counts = np.bincount(idx, minlength=k)
        expected = np.full(k, n / k)
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    npar = fitted.n_params if n_params is None else n_params
    bins = int(counts.size)
    return Chi2Result(chi2, bins, bins - 1 - npar, tuple(int(c) for c in counts))


def ks_distance(sample, fitted: Distribution) -> float:
    """Exact sup |F_n - F| using both one-sided limits at every sample point."""
    x = np.sort(_values(sample))
    n = x.size
    hi = np.searchsorted(x, x, side="right") / n
    lo = np.searchsorted(x, x, side="left") / n
    f = np.asarray(fitted.cdf(x), dtype=float)
    fl = np.asarray(fitted.cdf_left(x), dtype=float) if hasattr(fitted, "cdf_left") else f
    return float(max(np.max(np.abs(hi - f)), np.max(np.abs(lo - fl))))


@dataclass
class FitReport:
    family: str
    params: object
    loglik: float
    chi2: float
    dof: int
    bins: int
    bootstrap_pvalue: float | None = None
    verdict: str = "not_tested"
    n: int = 0
    seed: int | None = None
    replicate_chi2: np.ndarray | None = field(default=None, repr=False)
    failed_replicates: int = 0

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params.to_dict(),
                "loglik": self.loglik, "chi2": self.chi2, "dof": self.dof,
                "bins": self.bins, "bootstrap_pvalue": self.bootstrap_pvalue,
                "verdict": self.verdict, "n": self.n, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def fit_report(sample, family: str, seed: int | None = None) -> FitReport:
    fit = fit_family(sample, family)
    c = chi2_statistic(sample, fit.distribution(), fit.n_params)
    return FitReport(fit.family, fit.params, fit.loglik, c.chi2, c.dof, c.bins,
                     n=len(_values(sample)), seed=seed)


def noise_variances(sample, noise_var=None) -> np.ndarray:
    """Per-point noise variance, defaulting to zero (no noise)."""
    x = _values(sample)
    if noise_var is None:
        return np.zeros(x.size)
    v = np.broadcast_to(np.asarray(noise_var, dtype=float), x.shape).copy()
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError("noise variances must be finite and >= 0")
    return v


def bootstrap_test(sample, family: str = SB, N: int = 200, alpha: float = 0.05,
                   noise_var=None, seed: int = 0, max_fail_frac: float = 0.05,
                   starts: int = 5) -> FitReport:
    """Parametric bootstrap of the chi-square statistic for noisy observations.

    Fit theta on y and compute chi2. Each replicate draws n points from the
    fit, adds independent zero-mean normal noise, refits and recomputes chi2.
    Replicate noise variances are matched by rank: the k-th smallest draw gets
    the variance of the k-th smallest observation. Reject iff the
    floor((1 - alpha) N)-th smallest replicate statistic is below chi2.
    A replicate whose refit fails (or whose noisy draw leaves the positive
    axis for a two-parameter lognormal) is redrawn from a fresh seed; more
    than ``max_fail_frac * N`` failures abort.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    family = canonical_family(family)
    y = _values(sample)
    n = y.size
    var = noise_variances(y, noise_var)
    var_by_rank = var[np.argsort(y, kind="stable")]
    fit = fit_family(y, family, **({"starts": starts} if family == SB else {}))
    obs = chi2_statistic(y, fit.distribution(), fit.n_params)
    dist = fit.distribution()
    warm = (fit.params,) if family == SB else ()
    reps = np.empty(N)
    max_fail = int(math.floor(max_fail_frac * N))
    failed = 0
    attempt = 0
    j = 0
    while j < N:
        rng = numpy_rng(derive_seed(seed, "bootstrap", attempt))
        attempt += 1
        clean = np.asarray(dist.sample(rng, n), dtype=float)
        noisy = clean.copy()
        order = np.argsort(clean, kind="stable")
        noisy[order] += rng.standard_normal(n) * np.sqrt(var_by_rank)
        try:
            if family == LOGNORMAL2 and np.any(noisy <= 0):
                raise FitError("non-positive replicate value")
            kw = {"starts": starts, "warm": warm} if family == SB else {}
            rf = fit_family(noisy, family, **kw)
            reps[j] = chi2_statistic(noisy, rf.distribution(), rf.n_params).chi2
            j += 1
        except (FitError, ValueError) as exc:
            failed += 1
            log.debug("bootstrap replicate %d failed: %s", attempt - 1, exc)
            if failed > max_fail:
                raise FitError(f"{failed} of {attempt} bootstrap refits failed "
                               f"(tolerance {max_fail}); last error: {exc}") from exc
    order_stat = np.sort(reps)[max(int(math.floor((1 - alpha) * N)), 1) - 1]
    reject = bool(order_stat < obs.chi2)
    pval = float(np.count_nonzero(reps >= obs.chi2) / N)
    return FitReport(fit.family, fit.params, fit.loglik, obs.chi2, obs.dof, obs.bins,
                     bootstrap_pvalue=pval, verdict="reject" if reject else "accept",
                     n=n, seed=seed, replicate_chi2=reps, failed_replicates=failed)
