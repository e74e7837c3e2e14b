import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from slshard.distributions import (Exponential, JohnsonSB, LogNormal, LogNormalParams, Normal,
                                   NormalParams, Pareto, SaturationError, SbParams, Uniform,
                                   hazard_rate, lognormal_cdf, lognormal_embedding_sb,
                                   lognormal_pdf, lognormal_quantile, lognormal_sample,
                                   long_tail_diagnostic, normal_cdf, normal_pdf, normal_quantile,
                                   normal_sample, numeric_mean, sb_cdf, sb_logpdf, sb_pdf,
                                   sb_quantile, sb_sample, sb_scale, sb_sf, shifted_reciprocal_sb,
                                   standard_normal_polar)

FIG1 = SbParams(gamma=0.5, delta=0.7, lam=1.0, xi=0.0)


def mp_phi(x):
    return float(mpmath.ncdf(mpmath.mpf(x)))


def test_normal_cdf_against_mpmath():
    assert abs(normal_cdf(1.96) - 0.9750) < 5e-5
    assert normal_cdf(0.0) == 0.5
    for x in np.linspace(-8, 8, 41):
        assert normal_cdf(x) == pytest.approx(mp_phi(x), rel=1e-13, abs=1e-300)


def test_normal_quantile_round_trip():
    q = np.concatenate([np.geomspace(1e-9, 0.5, 50), 1 - np.geomspace(1e-9, 0.5, 50)])
    assert np.max(np.abs(normal_cdf(normal_quantile(q)) - q)) < 1e-10
    x = np.linspace(-5, 5, 101)
    assert np.max(np.abs(normal_quantile(normal_cdf(x)) - x)) < 1e-8
    with pytest.raises(ValueError):
        normal_quantile(1.0)


def test_normal_params():
    p = NormalParams(2.0, 3.0)
    assert normal_cdf(2.0, p) == 0.5
    assert normal_pdf(2.0, p) == pytest.approx(1 / (3 * math.sqrt(2 * math.pi)))
    with pytest.raises(ValueError):
        NormalParams(0.0, 0.0)


def test_polar_normals():
    z = standard_normal_polar(np.random.default_rng(0), 100_000)
    assert stats.kstest(z, "norm").statistic < 0.01
    x = normal_sample(NormalParams(5, 2), np.random.default_rng(1), 50_000)
    assert abs(x.mean() - 5) < 0.05 and abs(x.std() - 2) < 0.05


def test_sb_pdf_reference_point():
    assert sb_pdf(0.5, SbParams(0, 1, 1, 0)) == pytest.approx(4 / math.sqrt(2 * math.pi), rel=1e-14)
    p = SbParams(0.3, 1.2, 2.0, -1.0)
    assert sb_pdf(-1.0, p) == 0 and sb_pdf(1.0, p) == 0 and sb_pdf(5.0, p) == 0
    assert sb_cdf(-1.0, p) == 0 and sb_cdf(1.0, p) == 1


@pytest.mark.parametrize("gamma", [-1.0, 0.0, 0.5, 2.0])
@pytest.mark.parametrize("delta", [0.5, 0.7, 1.0, 2.0])
def test_sb_pdf_integrates_to_one(gamma, delta):
    p = SbParams(gamma, delta, 1.0, 0.0)
    val, _ = integrate.quad(lambda x: sb_pdf(x, p), 0, 1, epsabs=1e-12, limit=200)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_sb_against_mpmath_definition():
    p = SbParams(0.5, 0.7, 3.0, 1.0)
    for x in (1.01, 1.5, 2.5, 3.99):
        z = mpmath.mpf(0.5) + mpmath.mpf(0.7) * mpmath.log((x - 1) / (4 - mpmath.mpf(x)))
        assert sb_cdf(x, p) == pytest.approx(float(mpmath.ncdf(z)), rel=1e-12)
        assert sb_sf(x, p) == pytest.approx(float(mpmath.ncdf(-z)), rel=1e-12)


sb_params = st.builds(SbParams, st.floats(-3, 3), st.floats(0.2, 4), st.floats(0.1, 100),
                      st.floats(-50, 50))


@given(sb_params, st.floats(0.001, 0.999))
def test_sb_quantile_inverts_cdf(p, u):
    # the upper half goes through the survival function, where the cdf rounds to 1
    x = p.xi + u * p.lam
    d = JohnsonSB(p)
    back = d.ppf(d.cdf(x)) if d.cdf(x) <= 0.5 else d.isf(d.sf(x))
    assert back == pytest.approx(x, abs=1e-8 * max(1.0, abs(x)))


@given(st.floats(-3, 3), st.floats(1e-6, 1 - 1e-6))
def test_sb_cdf_inverts_quantile(gamma, q):
    p = SbParams(gamma, 1.0, 1.0, 0.0)
    assert sb_cdf(sb_quantile(q, p), p) == pytest.approx(q, abs=1e-9)


@given(sb_params, st.floats(0.02, 0.98))
@settings(max_examples=60)
def test_sb_pdf_is_cdf_derivative(p, u):
    x = p.xi + u * p.lam
    h = 1e-6 * p.lam
    num = (sb_cdf(x + h, p) - sb_cdf(x - h, p)) / (2 * h)
    assert sb_pdf(x, p) == pytest.approx(num, rel=1e-4, abs=1e-8 / p.lam)


@given(sb_params)
@settings(max_examples=40)
def test_sb_cdf_monotone(p):
    x = np.linspace(p.a, p.b, 400)
    c = sb_cdf(x, p)
    assert np.all(np.diff(c) >= 0) and c[0] == 0 and c[-1] == 1


def test_sb_symmetric_median():
    p = SbParams(0.0, 1.7, 4.0, 2.0)
    assert sb_cdf(4.0, p) == pytest.approx(0.5, abs=1e-15)


def test_sb_sampling_matches_cdf():
    x = sb_sample(FIG1, np.random.default_rng(3), 100_000)
    assert stats.kstest(x, lambda t: sb_cdf(t, FIG1)).statistic < 0.01
    assert x.min() > 0 and x.max() < 1


@pytest.mark.parametrize("g", [0.1, 1.0, 3.0, 100.0])
def test_sb_scale_cdf_identity(g):
    p = SbParams(0.4, 0.9, 2.0, 0.5)
    s = sb_scale(p, g)
    assert (s.gamma, s.delta, s.lam, s.xi) == (p.gamma, p.delta, g * p.lam, g * p.xi)
    x = np.linspace(p.a, p.b, 1000)[1:-1]
    assert np.max(np.abs(sb_cdf(g * x, s) - sb_cdf(x, p))) <= 1e-12
    with pytest.raises(ValueError):
        sb_scale(p, 0.0)


def test_sb_scale_example():
    assert sb_scale(SbParams(0.5, 0.7, 1.0, 0.0), 3) == SbParams(0.5, 0.7, 3.0, 0.0)


def test_sb_params_json_round_trip():
    d = FIG1.to_dict()
    assert "lambda" in d and SbParams.from_dict(d) == FIG1
    with pytest.raises(ValueError):
        SbParams(0.0, -1.0, 1.0, 0.0)


def test_lognormal_basics():
    p = LogNormalParams(1.0, 1.25, 2.0)
    assert lognormal_cdf(2.0 + math.e, p) == pytest.approx(0.5, abs=1e-15)
    assert lognormal_pdf(2.0, p) == 0 and lognormal_pdf(1.0, p) == 0
    q = np.linspace(0.01, 0.99, 50)
    assert np.allclose(lognormal_cdf(lognormal_quantile(q, p), p), q, atol=1e-12)
    ref = stats.lognorm(s=1.25, loc=2.0, scale=math.e)
    x = np.linspace(2.1, 40, 30)
    assert np.allclose(lognormal_pdf(x, p), ref.pdf(x), rtol=1e-10)


def test_lognormal_reciprocal_closure():
    x = lognormal_sample(LogNormalParams(0.7, 0.4), np.random.default_rng(2), 100_000)
    y = np.log(1 / x)
    assert abs(y.mean() + 0.7) < 3 * 0.4 / math.sqrt(x.size)
    assert abs(y.std() - 0.4) < 0.005


def test_binomial_ratio_near_lognormal():
    rng = np.random.default_rng(4)
    r = rng.binomial(500, 0.3, 100_000) / rng.binomial(500, 0.3, 100_000)
    s, loc, scale = stats.lognorm.fit(r, floc=0)
    assert stats.kstest(r, "lognorm", args=(s, loc, scale)).statistic < 0.03


def test_shifted_reciprocal_params():
    assert shifted_reciprocal_sb(LogNormalParams(0, 1), 1) == SbParams(0, 1, 1, 0)
    p = shifted_reciprocal_sb(LogNormalParams(1.3, 0.6), math.exp(1.3))
    assert p.gamma == pytest.approx(0, abs=1e-15)
    with pytest.raises(ValueError):
        shifted_reciprocal_sb(LogNormalParams(0, 1), 0.0)


@pytest.mark.parametrize("mu,sigma,c", [(0, 1, 1), (1, 0.5, 2), (-1, 2, 0.5)])
def test_shifted_reciprocal_distribution(mu, sigma, c):
    rng = np.random.default_rng(11)
    x = 1 / (c + rng.lognormal(mu, sigma, 100_000))
    p = shifted_reciprocal_sb(LogNormalParams(mu, sigma), c)
    assert stats.kstest(x, lambda t: sb_cdf(t, p)).statistic < 0.01


def test_embedding_converges():
    mu, delta = 1.0, 0.8
    grid = np.linspace(0.01, 50, 5000)
    ln = lognormal_pdf(grid, LogNormalParams(mu, 1 / delta))
    dist = [np.max(np.abs(sb_pdf(grid, lognormal_embedding_sb(mu, delta, 0, b)) - ln))
            for b in (10, 1e2, 1e3, 1e4)]
    assert all(a > b for a, b in zip(dist, dist[1:])) and dist[-1] < 1e-2
    med = [sb_cdf(math.exp(mu), lognormal_embedding_sb(mu, delta, 0, b)) for b in (1e2, 1e4, 1e6)]
    assert abs(med[-1] - 0.5) < abs(med[0] - 0.5) and abs(med[-1] - 0.5) < 1e-3
    p1 = lognormal_embedding_sb(mu, delta, 0, math.exp(2.0))
    p2 = lognormal_embedding_sb(mu, delta, 0, math.exp(4.0))
    assert p2.gamma / delta + mu == pytest.approx(2 * (p1.gamma / delta + mu))
    with pytest.raises(ValueError):
        lognormal_embedding_sb(mu, delta, 1, 1)


def test_hazard_rates():
    assert np.allclose(hazard_rate(Exponential(2.5), np.array([0.1, 1, 10, 100])), 2.5)
    t = np.array([0.1, 0.5, 0.9])
    assert np.allclose(hazard_rate(Uniform(), t), 1 / (1 - t))
    ln = LogNormal(LogNormalParams(1.0, 1.25))
    r = hazard_rate(ln, 10.0 ** np.arange(1, 7))
    assert np.all(np.diff(r) < 0) and r[-1] < 0.01 * r[0]
    with pytest.raises(SaturationError):
        hazard_rate(Uniform(), 1.0)


def test_long_tail_verdicts():
    assert long_tail_diagnostic(LogNormal(LogNormalParams(1.0, 1.25))) == "long_tailed"
    assert long_tail_diagnostic(Exponential(1.0)) == "not_long_tailed"
    assert long_tail_diagnostic(JohnsonSB(FIG1)) == "not_long_tailed"


@pytest.mark.parametrize("dist,mean", [
    (Exponential(0.5), 2.0),
    (Uniform(1, 3), 2.0),
    (LogNormal(LogNormalParams(1.0, 1.25)), math.exp(1 + 1.25 ** 2 / 2)),
    (Pareto(3.0, 2.0), 3.0),
])
def test_numeric_mean(dist, mean):
    assert numeric_mean(dist) == pytest.approx(mean, rel=1e-6)
    assert dist.mean() == pytest.approx(mean, rel=1e-6)


def test_infinite_mean_detected():
    assert numeric_mean(Pareto(0.8)) == math.inf


def test_handles_consistent():
    rng = np.random.default_rng(0)
    for d in (Normal(NormalParams(1, 2)), LogNormal(LogNormalParams(0.2, 0.5, 1.0)),
              JohnsonSB(FIG1), Exponential(3.0), Uniform(-1, 2), Pareto(2.5)):
        q = np.array([0.01, 0.3, 0.7, 0.99])
        assert np.allclose(d.cdf(d.ppf(q)), q, atol=1e-10)
        assert np.allclose(d.sf(d.isf(q)), q, atol=1e-10)
        x = d.ppf(q)
        assert np.allclose(np.exp(d.logpdf(x)), d.pdf(x))
        assert np.allclose(np.exp(d.logsf(x)), d.sf(x))
        s = d.sample(rng, 20_000)
        assert stats.kstest(s, d.cdf).pvalue > 1e-4


def test_sb_mean_matches_quadrature():
    d = JohnsonSB(SbParams(0.5, 0.7, 3.0, 1.0))
    val, _ = integrate.quad(lambda x: x * d.pdf(x), 1.0, 4.0, limit=200)
    assert d.mean() == pytest.approx(val, rel=1e-8)
    assert np.isfinite(sb_logpdf(2.0, d.params))
