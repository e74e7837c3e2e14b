"""Command-line interface: ``slshard <subcommand> ...``.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 numeric failure.
Every subcommand prints its effective configuration as JSON on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _write(path, data, mode="w"):
    if path in (None, "-"):
        if isinstance(data, bytes):
            sys.stdout.buffer.write(data)
            sys.stdout.flush()
        else:
            sys.stdout.write(data)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, bytes):
        Path(path).write_bytes(data)
    else:
        Path(path).write_text(data)


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, default=_json_default) + "\n"


# --- subcommands ------------------------------------------------------------

def cmd_generate(args):
    from .cnf import emit_dimacs
    from .generators import GenSpec, generate, sidecar
    spec = GenSpec(args.kind, args.n, args.k, args.ratio, args.seed)
    f, hidden = generate(spec)
    _write(args.out, emit_dimacs(f, [f"generated kind={spec.kind} n={spec.n} k={spec.k} "
                                     f"ratio={spec.ratio} seed={spec.seed}"]))
    if args.sidecar:
        _write(args.sidecar, sidecar(spec, hidden) + "\n")
    elif hidden is not None and args.out not in (None, "-"):
        _write(str(args.out) + ".json", sidecar(spec, hidden) + "\n")
    return EXIT_OK


def cmd_extend(args):
    from .cnf import emit_dimacs, parse_dimacs
    from .resolution import Limits, calibrate_p_from_size, extension_pool, sample_extension
    f = parse_dimacs(Path(args.input).read_bytes())
    w = None if args.w < 0 else args.w
    pool = extension_pool(f, w, Limits(max_clauses=args.max_clauses))
    if args.p is not None:
        p = args.p
    else:
        p = calibrate_p_from_size(len(pool), args.target_ratio * len(f.clauses))
    ext = sample_extension(f, w, p, args.seed, pool=pool)
    if args.combined:
        data = emit_dimacs(f.extended(ext.resolvents), ext.header_comments())
    else:
        data = ext.to_dimacs(f.num_vars)
    _write(args.out, data)
    print(_dumps({"pool_size": len(pool), "p": p, "extension_size": len(ext),
                  "truncated": ext.truncated}), file=sys.stderr, end="")
    return EXIT_OK


def cmd_solve(args):
    from .cnf import parse_dimacs
    from .solvers import SolverConfig, batch_to_csv, check_witness, run_batch
    f = parse_dimacs(Path(args.input).read_bytes())
    cfg = SolverConfig(args.algorithm, args.t_restart, args.max_flips, args.seed, args.cb)
    batch = run_batch(f, cfg, args.runs)
    for o in batch.outcomes:
        if o.solved and not check_witness(f, o):
            raise ArithmeticError("solver returned a non-satisfying witness")
    _write(args.out, batch_to_csv(Path(args.input).name, batch))
    return EXIT_OK


def cmd_experiment(args):
    from .experiment import ExperimentPlan, run_experiment
    if args.plan:
        doc = json.loads(Path(args.plan).read_text())
    else:
        doc = {}
    if args.base is not None:
        doc["base"] = args.base
    elif "base" not in doc:
        doc["base"] = {"kind": args.kind, "n": args.n, "k": 3, "ratio": args.ratio,
                       "seed": args.instance_seed}
    for key in ("modifications", "runs_per_mod", "w", "p", "target_ratio", "algorithm",
                "max_flips", "cb", "t_restart"):
        v = getattr(args, key)
        if v is not None:
            doc[key] = v
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if args.trusted:
        doc["trusted"] = True
    plan = ExperimentPlan.from_dict(doc)
    print(_dumps({"plan": plan.to_dict(), "digest": plan.digest()}), file=sys.stderr, end="")
    out = Path(args.out_dir) / "dataset.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    ds = run_experiment(plan, out, workers=args.workers)
    _write(Path(args.out_dir) / "meta.json", _dumps(ds.meta))
    return EXIT_OK


def _load_values(path):
    from .experiment import read_values
    vals, var, runs = read_values(path)
    return vals, var, runs


def plot_tables(values, dist) -> dict[str, str]:
    """Tidy CSVs: ecdf vs fitted cdf, log-log lower tail, log-log survival."""
    from .fitting import ecdf
    x = np.unique(np.asarray(values, dtype=float))
    e = np.asarray(ecdf(values, x), dtype=float)
    f = np.asarray(dist.cdf(x), dtype=float)
    sf = np.asarray(dist.sf(x), dtype=float)
    x, e, f, sf = x.tolist(), e.tolist(), f.tolist(), sf.tolist()
    out = {"ecdf_cdf.csv": "t,ecdf,fitted_cdf\n" + "".join(
        f"{t!r},{a!r},{b!r}\n" for t, a, b in zip(x, e, f))}
    with np.errstate(divide="ignore"):
        lt = "log10_t,log10_ecdf,log10_fitted_cdf\n" + "".join(
            f"{math.log10(t)!r},{math.log10(a)!r},{math.log10(b) if b > 0 else float('-inf')!r}\n"
            for t, a, b in zip(x, e, f) if t > 0 and a > 0)
        es = [1.0 - a for a in e]
        st = "log10_t,log10_empirical_sf,log10_fitted_sf\n" + "".join(
            f"{math.log10(t)!r},{math.log10(a)!r},{math.log10(b) if b > 0 else float('-inf')!r}\n"
            for t, a, b in zip(x, es, sf) if t > 0 and a > 0)
    out["left_tail.csv"] = lt
    out["survival.csv"] = st
    return out


def cmd_fit(args):
    from .fitting import FitDataError, FitResult, bootstrap_test, fit_report
    vals, var, runs = _load_values(args.input)
    if vals.size < 25:
        raise FitDataError(f"need at least 25 usable rows, got {vals.size}")
    if args.bootstrap > 0:
        rep = bootstrap_test(vals, args.family, args.bootstrap, args.alpha,
                             noise_var=var, seed=args.seed)
    else:
        rep = fit_report(vals, args.family, seed=args.seed)
    dist = FitResult(rep.family, rep.params, rep.loglik).distribution()
    _write(args.out, rep.to_json() + "\n")
    if args.plots:
        for name, text in plot_tables(vals, dist).items():
            _write(Path(args.plots) / name, text)
    return EXIT_OK


def cmd_goftest(args):
    from .fitting import bootstrap_test
    vals, var, runs = _load_values(args.input)
    if args.noise_var is not None:
        var = np.full(vals.size, args.noise_var)
    rep = bootstrap_test(vals, args.family, args.N, args.alpha, noise_var=var, seed=args.seed)
    _write(args.out, rep.to_json() + "\n")
    return EXIT_OK if rep.verdict == "accept" or not args.fail_on_reject else EXIT_NUMERIC


def cmd_restart_analyze(args):
    from .distributions import LogNormal, LogNormalParams
    from .fitting import mle_fit_lognormal
    from .restarts import RuntimeModel, restarts_useful
    doc = {}
    if args.input:
        vals, _, _ = _load_values(args.input)
        doc["empirical"] = restarts_useful(RuntimeModel.from_sample(vals)).to_dict()
        fit = mle_fit_lognormal(vals, three_param=not args.two_param)
        params = fit.params
        doc["fitted_params"] = params.to_dict()
    elif args.lognormal:
        mu, sigma, *rest = args.lognormal
        params = LogNormalParams(mu, sigma, rest[0] if rest else 0.0)
    else:
        raise UsageError("give a data file or --lognormal MU SIGMA [XI]")
    doc["parametric"] = restarts_useful(RuntimeModel.from_distribution(LogNormal(params))).to_dict()
    _write(args.out, _dumps(doc))
    return EXIT_OK


def cmd_simulate_pqr(args):
    from .distributions import JohnsonSB
    from .fitting import chi2_statistic, ks_distance, mle_fit_sb
    from .rng import numpy_rng
    from .theory import PqrModel, simulate_P, simulate_Q, simulate_QR_paired, simulate_R
    model = PqrModel(args.n_in, args.n_out, args.n_unsat_L, args.m_F, args.p, args.ell)
    rng = numpy_rng(args.seed)
    if args.which == "QR":
        samples = list(simulate_QR_paired(model, args.reps, rng))
    else:
        sim = {"P": simulate_P, "Q": simulate_Q, "R": simulate_R}[args.which]
        samples = [sim(model, args.reps, rng)]
    report = {"model": model.to_dict(), "reps": args.reps, "seed": args.seed, "samples": []}
    out_dir = Path(args.out_dir) if args.out_dir else None
    for s in samples:
        entry = s.summary()
        if args.fit and np.unique(s.values).size > 1:
            fit = mle_fit_sb(s.values)
            d = JohnsonSB(fit.params)
            c = chi2_statistic(s.values, d)
            entry["sb_fit"] = {"params": fit.params.to_dict(), "loglik": fit.loglik,
                               "chi2": c.chi2, "bins": c.bins, "dof": c.dof,
                               "chi2_pvalue": c.pvalue, "ks": ks_distance(s.values, d)}
        report["samples"].append(entry)
        if out_dir is not None:
            _write(out_dir / f"{s.name}.csv", s.to_csv())
        elif len(samples) == 1:
            _write(None, s.to_csv())
    if out_dir is not None:
        _write(out_dir / "report.json", _dumps(report))
    else:
        print(_dumps(report), file=sys.stderr, end="")
    return EXIT_OK


CHECK_ALIASES = {"54": "reciprocal-shift", "55": "log-binomial"}


def cmd_check_lemma(args):
    from .rng import numpy_rng
    which = CHECK_ALIASES.get(args.which, args.which)
    rng = numpy_rng(args.seed)
    if which == "reciprocal-shift":
        doc = check_reciprocal_shift(args.mu, args.sigma, args.c, args.reps, rng)
        ok = doc["ks"] < 0.01
    elif which == "log-binomial":
        from .theory import check_log_binomial_mean
        rep = check_log_binomial_mean(args.n, args.p, args.reps, rng)
        doc, ok = rep.to_dict(), rep.ok()
    else:
        doc = check_embedding(args.mu, args.delta)
        ok = doc["strictly_decreasing"] and doc["distances"][-1] < 1e-2
    doc["ok"] = bool(ok)
    _write(args.out, _dumps(doc))
    return EXIT_OK if ok else EXIT_NUMERIC


def check_reciprocal_shift(mu, sigma, c, reps, rng) -> dict:
    """KS distance between Monte Carlo 1/(c + LogN(mu, sigma^2)) and its SB law."""
    from scipy import stats
    from .distributions import LogNormalParams, lognormal_sample, sb_cdf, shifted_reciprocal_sb
    p = shifted_reciprocal_sb(LogNormalParams(mu, sigma), c)
    y = 1.0 / (c + lognormal_sample(LogNormalParams(mu, sigma), rng, reps))
    ks = float(stats.kstest(y, lambda t: sb_cdf(t, p)).statistic)
    return {"mu": mu, "sigma": sigma, "c": c, "reps": reps, "sb": p.to_dict(), "ks": ks}


EMBEDDING_BS = (10.0, 1e2, 1e3, 1e4)


def check_embedding(mu, delta, a=0.0, bs=EMBEDDING_BS, grid=None) -> dict:
    """Sup-grid pdf distance between the SB embedding and its limiting lognormal."""
    from .distributions import LogNormalParams, lognormal_embedding_sb, lognormal_pdf, sb_pdf
    grid = np.linspace(a + 0.01, a + 50.0, 5000) if grid is None else np.asarray(grid)
    ln = lognormal_pdf(grid, LogNormalParams(mu, 1.0 / delta, a))
    dists = [float(np.max(np.abs(sb_pdf(grid, lognormal_embedding_sb(mu, delta, a, b)) - ln)))
             for b in bs]
    return {"mu": mu, "delta": delta, "sigma": 1.0 / delta, "a": a, "b": list(bs),
            "distances": dists,
            "strictly_decreasing": bool(all(x > y for x, y in zip(dists, dists[1:])))}


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    from .solvers import ALGORITHMS, DEFAULT_MAX_FLIPS
    ap = _Parser(prog="slshard", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="random or planted k-CNF as DIMACS")
    g.add_argument("--kind", choices=["uniform", "planted"], default="uniform")
    g.add_argument("--n", type=int, default=50)
    g.add_argument("--k", type=int, default=3)
    g.add_argument("--ratio", type=float, default=4.267)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-")
    g.add_argument("--sidecar", help="JSON sidecar path (planted: holds the hidden assignment)")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("extend", help="sample an extension set of implied resolvents")
    e.add_argument("input")
    e.add_argument("--w", type=int, default=4, help="resolvent width bound (-1: none)")
    e.add_argument("--p", type=float)
    e.add_argument("--target-ratio", type=float, default=0.1,
                   help="expected extension size as a fraction of |F| (when --p is absent)")
    e.add_argument("--max-clauses", type=int, default=10**6)
    e.add_argument("--combined", action="store_true", help="emit F plus the extension")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default="-")
    e.set_defaults(func=cmd_extend)

    s = sub.add_parser("solve", help="run an SLS solver several times")
    s.add_argument("input")
    s.add_argument("--algorithm", choices=ALGORITHMS, default="srwa")
    s.add_argument("--runs", type=int, default=1)
    s.add_argument("--max-flips", type=int, default=DEFAULT_MAX_FLIPS)
    s.add_argument("--t-restart", type=int)
    s.add_argument("--cb", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_solve)

    x = sub.add_parser("experiment", help="hardness distribution over random extensions")
    x.add_argument("--plan", help="JSON plan file; flags override its fields")
    x.add_argument("--base", help="base DIMACS file (default: generate one)")
    x.add_argument("--kind", choices=["uniform", "planted"], default="uniform")
    x.add_argument("--n", type=int, default=50)
    x.add_argument("--ratio", type=float, default=4.267)
    x.add_argument("--instance-seed", type=int, default=0)
    x.add_argument("--modifications", type=int)
    x.add_argument("--runs-per-mod", type=int)
    x.add_argument("--w", type=int)
    x.add_argument("--p", type=float)
    x.add_argument("--target-ratio", type=float)
    x.add_argument("--algorithm", choices=ALGORITHMS)
    x.add_argument("--max-flips", type=int)
    x.add_argument("--cb", type=float)
    x.add_argument("--t-restart", type=int)
    x.add_argument("--trusted", action="store_true")
    x.add_argument("--workers", type=int)
    x.add_argument("--seed", type=int, help="master seed")
    x.add_argument("--out-dir", required=True)
    x.set_defaults(func=cmd_experiment)

    for name, func, hlp in (("fit", cmd_fit, "fit SB or lognormal to a dataset"),
                            ("goftest", cmd_goftest, "bootstrap chi-square test")):
        f = sub.add_parser(name, help=hlp)
        f.add_argument("input")
        f.add_argument("--family", default="SB", help="SB, LogNormal3 or LogNormal2")
        f.add_argument("--alpha", type=float, default=0.05)
        f.add_argument("--seed", type=int, default=0)
        f.add_argument("--out", default="-")
        if name == "fit":
            f.add_argument("--bootstrap", type=int, default=0, help="replicates (0: none)")
            f.add_argument("--plots", help="directory for plot CSVs")
        else:
            f.add_argument("--N", type=int, default=200)
            f.add_argument("--noise-var", type=float, help="constant per-point noise variance")
            f.add_argument("--fail-on-reject", action="store_true")
        f.set_defaults(func=func)

    r = sub.add_parser("restart-analyze", help="are restarts useful for this runtime?")
    r.add_argument("input", nargs="?")
    r.add_argument("--lognormal", type=float, nargs="+", metavar="MU_SIGMA_XI")
    r.add_argument("--two-param", action="store_true")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default="-")
    r.set_defaults(func=cmd_restart_analyze)

    q = sub.add_parser("simulate-pqr", help="Monte Carlo of the flip-probability ratios")
    q.add_argument("--which", choices=["P", "Q", "R", "QR"], default="P")
    q.add_argument("--n-in", type=int, default=1000)
    q.add_argument("--n-out", type=int, default=1000)
    q.add_argument("--n-unsat-L", type=int, default=2000)
    q.add_argument("--m-F", type=int, default=50)
    q.add_argument("--p", type=float, default=0.3)
    q.add_argument("--ell", type=int, default=3)
    q.add_argument("--reps", type=int, default=10**5)
    q.add_argument("--fit", action="store_true", help="add an SB fit to the report")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out-dir")
    q.set_defaults(func=cmd_simulate_pqr)

    c = sub.add_parser("check-lemma", help="numerical checks of the distribution identities")
    c.add_argument("which", choices=["reciprocal-shift", "log-binomial", "embedding", "54", "55"])
    c.add_argument("--mu", type=float, default=1.0)
    c.add_argument("--sigma", type=float, default=1.25)
    c.add_argument("--c", type=float, default=1.0)
    c.add_argument("--delta", type=float, default=0.8)
    c.add_argument("--n", type=int, default=10**4)
    c.add_argument("--p", type=float, default=0.5)
    c.add_argument("--reps", type=int, default=10**5)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_check_lemma)
    return ap


def main(argv=None) -> int:
    from .cnf import DimacsError
    from .distributions import SaturationError
    from .experiment import PlanError
    from .fitting import FitDataError, FitError
    from .solvers import EmptyClauseError
    from .theory import SparseModelError

    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    print(_dumps({"command": args.command, "config": _config(args)}), file=sys.stderr, end="")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FitDataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FitError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SaturationError, SparseModelError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DimacsError, PlanError, EmptyClauseError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
