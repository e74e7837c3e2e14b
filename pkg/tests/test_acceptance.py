"""Acceptance criteria 1-13; each test prints one PASS/FAIL line in the session summary."""
import math
import time

import numpy as np
import pytest
from scipy import stats

from oracles import bitmask_naive_closure, model_table, random_formula
from slshard.cnf import CnfFormula
from slshard.cli import check_embedding
from slshard.distributions import (Exponential, JohnsonSB, LogNormal, LogNormalParams, SbParams,
                                   Uniform, lognormal_sample, sb_cdf, sb_sample, sb_scale,
                                   shifted_reciprocal_sb)
from slshard.experiment import ExperimentPlan, run_experiment
from slshard.fitting import bootstrap_test, chi2_statistic, ks_distance, mle_fit_sb
from slshard.generators import GenSpec, generate
from slshard.resolution import res_w_star, sample_extension
from slshard.restarts import RuntimeModel, r_functional, restarted_mean_mc, restarts_useful
from slshard.solvers import PROBSAT_EXP, PROBSAT_POLY, SRWA, SolverConfig, check_witness, solve
from slshard.theory import PqrModel, check_log_binomial_mean, simulate_P, simulate_QR_paired

pytestmark = pytest.mark.acceptance

PS = np.round(np.arange(0.05, 0.951, 0.05), 2)


def random_3cnf(rng, max_vars=10, max_clauses=30):
    n = int(rng.integers(3, max_vars + 1))
    clauses = []
    for _ in range(int(rng.integers(1, max_clauses + 1))):
        vs = rng.choice(n, 3, replace=False) + 1
        clauses.append(tuple(int(v) if rng.random() < 0.5 else -int(v) for v in vs))
    return CnfFormula(n, tuple(clauses))


def test_criterion_01_resolution_oracle():
    res_w_star([(1, 2), (-1, 3)], None)  # warm the compiled engines
    res_w_star([(1, 2), (-1, 3)], 2)
    rng = np.random.default_rng(2024)
    elapsed = 0.0
    for _ in range(50):
        f = random_3cnf(rng)
        for w in (f.num_vars, 2, 3):
            t = time.perf_counter()
            got, stats = res_w_star(f.clauses, w)
            elapsed += time.perf_counter() - t
            assert not stats.truncated
            assert {frozenset(c) for c in got} == bitmask_naive_closure(f.clauses, f.num_vars, w)
    assert elapsed < 10.0, f"closure time {elapsed:.1f}s"


def test_criterion_02_extension_equivalence():
    rng = np.random.default_rng(7)
    t = time.perf_counter()
    sizes = []
    for i in range(100):
        f = random_formula(rng, max_vars=12, max_clauses=30, max_width=3)
        ext = sample_extension(f, 4, 0.5, seed=i)
        sizes.append(len(ext))
        assert np.array_equal(model_table(f), model_table(f.extended(ext.resolvents)))
    assert sum(sizes) > 0
    assert time.perf_counter() - t < 30


def test_criterion_03_solver_soundness():
    t = time.perf_counter()
    solved = {SRWA: 0, PROBSAT_POLY: 0, PROBSAT_EXP: 0}
    for i in range(1000):
        n = 5 + i % 26
        f, _ = generate(GenSpec("planted", n, 3, 4.267, seed=i))
        for algo in solved:
            out = solve(f, SolverConfig(algo, None, 10**6, seed=i))
            if out.solved:
                assert check_witness(f, out)
                solved[algo] += 1
    assert all(k >= 990 for k in solved.values()), solved
    assert time.perf_counter() - t < 120


@pytest.mark.parametrize("mu,sigma,c", [(0, 1, 1), (1, 0.5, 2), (-1, 2, 0.5)])
def test_criterion_04_reciprocal_shift(mu, sigma, c):
    ln = LogNormalParams(mu, sigma)
    y = 1.0 / (c + lognormal_sample(ln, np.random.default_rng(11), 10**5))
    sb = shifted_reciprocal_sb(ln, c)
    assert stats.kstest(y, lambda t: sb_cdf(t, sb)).statistic < 0.01


@pytest.mark.parametrize("g", [0.1, 3.0, 100.0])
def test_criterion_05_scale_identity(g):
    p = SbParams(0.7, 1.3, 25.0, 4.0)
    x = np.linspace(p.xi, p.xi + p.lam, 1002)[1:-1]
    diff = np.abs(sb_cdf(g * x, sb_scale(p, g)) - sb_cdf(x, p))
    assert diff.max() <= 1e-12


def test_criterion_06_embedding():
    doc = check_embedding(1.0, 0.8)
    assert doc["sigma"] == pytest.approx(1.25)
    assert doc["strictly_decreasing"] and doc["distances"][-1] < 1e-2, doc["distances"]


def test_criterion_07_r_quadrature():
    ex = RuntimeModel.from_distribution(Exponential(1.0))
    un = RuntimeModel.from_distribution(Uniform())
    assert max(abs(r_functional(ex, p) - p) for p in PS) < 1e-9
    assert max(abs(r_functional(un, p) - p - p * (1 - p)) for p in PS) < 1e-9


def test_criterion_08_restarts_useful_lognormal():
    t = time.perf_counter()
    d = LogNormal(LogNormalParams(1.0, 1.25))
    v = restarts_useful(RuntimeModel.from_distribution(d))
    assert v.useful
    est, se = restarted_mean_mc(d, v.witness_threshold, 10**5, np.random.default_rng(8))
    assert d.mean() - est > 3 * se, (d.mean(), est, se)
    assert time.perf_counter() - t < 30


def _pqr_samples(size, rng):
    m = PqrModel(n_in=size, n_out=size, n_unsat_L=2 * size, p=0.3)
    return [simulate_P(m, 10**5, rng), *simulate_QR_paired(m, 10**5, rng)]


def test_criterion_09_pqr_asymptotics():
    t = time.perf_counter()
    failures = []
    ks = {}
    for size in (200, 1000, 5000):
        for s in _pqr_samples(size, np.random.default_rng(size)):
            d = JohnsonSB(mle_fit_sb(s.values).params)
            ks[s.name, size] = ks_distance(s.values, d)
            if size == 1000:
                pv = chi2_statistic(s.values, d).pvalue
                if pv < 0.01:
                    failures.append(f"{s.name}: chi2 p={pv:.2g} < 0.01")
    tol = 0.5 / math.sqrt(10**5)
    for name in "PQR":
        seq = [ks[name, s] for s in (200, 1000, 5000)]
        if not all(b < a + tol for a, b in zip(seq, seq[1:])):
            failures.append(f"{name}: KS not decreasing {seq}")
    assert not failures, "; ".join(failures)
    assert time.perf_counter() - t < 60


@pytest.mark.parametrize("p", [0.1, 0.5])
def test_criterion_10_log_binomial_moments(p):
    rep = check_log_binomial_mean(10**4, p, 4000, np.random.default_rng(int(p * 100)))
    assert rep.ok(), rep.to_dict()


def test_criterion_11_bootstrap_calibration():
    truth = SbParams(0.5, 0.7, 100.0, 10.0)
    rejects = 0
    for trial in range(200):
        rng = np.random.default_rng(10_000 + trial)
        clean = sb_sample(truth, rng, 200)
        var = clean ** 2 / 20 / 25
        y = clean + rng.normal(0, np.sqrt(var))
        rejects += bootstrap_test(y, "SB", N=200, noise_var=var, seed=trial).verdict == "reject"
    rate = rejects / 200
    print(f"type-1 rejection rate {rate:.3f}")
    assert abs(rate - 0.05) <= 0.03, rate


BASE_SEEDS = (0, 4, 6, 8, 10)  # first five uniform n=50 seeds that pass the SRWA screen


def desk_plan(seed):
    return ExperimentPlan(base={"kind": "uniform", "n": 50, "k": 3, "ratio": 4.267, "seed": seed},
                          modifications=200, runs_per_mod=20, w=4, target_ratio=0.1,
                          algorithm=SRWA, master_seed=7)


@pytest.fixture(scope="session")
def desk_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    out = {}
    for s in BASE_SEEDS:
        path = root / f"base{s}_w1.csv"
        out[s] = (path, run_experiment(desk_plan(s), path, workers=1))
    return root, out


def test_criterion_12_desk_table_analog(desk_runs):
    _, runs = desk_runs
    verdicts = {}
    for s, (_, ds) in runs.items():
        assert len(ds.rows) == 200
        v, nv = ds.values(), ds.noise_variances()
        verdicts[s] = tuple(bootstrap_test(v, fam, N=200, alpha=0.05, noise_var=nv, seed=1).verdict
                            for fam in ("SB", "LogNormal"))
    sb = sum(a == "reject" for a, _ in verdicts.values())
    ln = sum(b == "reject" for _, b in verdicts.values())
    truncated = [s for s, (_, ds) in runs.items() if ds.meta["closure_truncated"]]
    msg = f"verdicts {verdicts}; SB rejects {sb}/5, LogNormal rejects {ln}/5; truncated pools {truncated}"
    print(msg)
    assert sb <= 1 and ln <= sb + 1, msg


def test_criterion_13_worker_determinism(desk_runs):
    root, runs = desk_runs
    for s, (path, _) in runs.items():
        for workers in (4, 8):
            other = root / f"base{s}_w{workers}.csv"
            run_experiment(desk_plan(s), other, workers=workers)
            assert other.read_bytes() == path.read_bytes(), (s, workers)
        again = root / f"base{s}_w1b.csv"
        run_experiment(desk_plan(s), again, workers=1)
        assert again.read_bytes() == path.read_bytes(), (s, 1)
