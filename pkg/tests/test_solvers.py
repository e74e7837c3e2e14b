import numpy as np
import pytest
from scipy import stats

from slshard.cnf import Assignment, CnfFormula, clause_satisfied, evaluate
from slshard.generators import GenSpec, generate
from slshard.rng import derive_seed
from slshard.solvers import (ALGORITHMS, EXHAUSTED, PROBSAT_EXP, PROBSAT_POLY, SOLVED, SRWA,
                             EmptyClauseError, SolveOutcome, SolverConfig, batch_to_csv,
                             check_witness, probsat_solve, run_batch, solve, srwa_solve,
                             summarize)


@pytest.fixture(scope="module")
def planted():
    return generate(GenSpec(kind="planted", n=25, ratio=4.2, seed=3))


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_override_already_satisfying(algo, planted):
    f, hidden = planted
    out = solve(f, SolverConfig(algo, initial_assignment_override=hidden))
    assert out.solved and out.flips == 0 and out.witness == hidden


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_unit_clause_forced_flip(algo):
    out = solve(CnfFormula(1, ((1,),)), SolverConfig(algo, initial_assignment_override=Assignment([0])))
    assert out.solved and out.flips == 1


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_deterministic(algo, planted):
    f, _ = planted
    cfg = SolverConfig(algo, seed=12345)
    assert solve(f, cfg) == solve(f, cfg)


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_trace_replay(algo, planted):
    """Every flip picks an unsatisfied clause and makes the chosen literal true."""
    f, _ = planted
    start = Assignment(np.zeros(f.num_vars, dtype=np.uint8))
    out, trace = solve(f, SolverConfig(algo, seed=7, initial_assignment_override=start),
                       trace=100000)
    assert out.solved and out.restarts_used == 0
    a = start.copy()
    for c, lit in trace:
        clause = f.clauses[c]
        assert not clause_satisfied(clause, a)
        assert lit in clause
        a.values[abs(lit) - 1] = 1 if lit > 0 else 0
    assert len(trace) == out.flips
    assert evaluate(f, a) and a == out.witness


def test_budget_and_restarts():
    unsat = CnfFormula(2, ((1, 2), (-1, 2), (1, -2), (-1, -2)))
    out = srwa_solve(unsat, SolverConfig(max_flips=1000, t_restart=7, seed=1))
    assert out.status == EXHAUSTED and out.flips == 1000 and out.witness is None
    assert out.restarts_used == 1000 // 7
    assert not check_witness(unsat, out)


def test_empty_clause_rejected():
    with pytest.raises(EmptyClauseError):
        srwa_solve(CnfFormula(1, ((),)), SolverConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig("walksat")
    with pytest.raises(ValueError):
        SolverConfig(t_restart=0)
    with pytest.raises(ValueError):
        SolverConfig(max_flips=0)
    assert SolverConfig(PROBSAT_POLY).break_exponent == 2.38
    assert SolverConfig(PROBSAT_EXP, cb=3.0).to_dict()["cb"] == 3.0
    assert SolverConfig().to_dict()["cb"] is None


def _first_literal_counts(f, cfg, start, reps):
    counts = {}
    for s in range(reps):
        _, trace = solve(f, SolverConfig(cfg.algorithm, seed=derive_seed(1, "pick", s), cb=cfg.cb,
                                         initial_assignment_override=start), trace=1)
        counts[trace[0][1]] = counts.get(trace[0][1], 0) + 1
    return counts


def test_srwa_literal_choice_uniform():
    f = CnfFormula(3, ((1, 2, 3),))
    counts = _first_literal_counts(f, SolverConfig(SRWA), Assignment([0, 0, 0]), 3000)
    assert stats.chisquare([counts.get(v, 0) for v in (1, 2, 3)]).pvalue > 1e-3


@pytest.mark.parametrize("algo,cb", [(PROBSAT_EXP, 2.5), (PROBSAT_POLY, 2.0)])
def test_probsat_break_weights(algo, cb):
    # all-false: (1 2) is the only unsatisfied clause; flipping 1 breaks (-1 3), flipping 2 breaks nothing
    f = CnfFormula(3, ((1, 2), (-1, 3)))
    counts = _first_literal_counts(f, SolverConfig(algo, cb=cb), Assignment([0, 0, 0]), 4000)
    w1, w2 = (cb ** -1, 1.0) if algo == PROBSAT_EXP else ((1.0 + 1) ** -cb, 1.0 ** -cb)
    res = stats.binomtest(counts.get(1, 0), 4000, w1 / (w1 + w2))
    assert res.pvalue > 1e-3


def test_probsat_equal_breaks_uniform():
    f = CnfFormula(3, ((1, 2, 3),))
    counts = _first_literal_counts(f, SolverConfig(PROBSAT_EXP), Assignment([0, 0, 0]), 3000)
    assert stats.chisquare([counts.get(v, 0) for v in (1, 2, 3)]).pvalue > 1e-3


def test_wrappers_pick_family(planted):
    f, _ = planted
    assert srwa_solve(f, SolverConfig(PROBSAT_EXP, seed=3)) == solve(f, SolverConfig(SRWA, seed=3))
    assert probsat_solve(f, SolverConfig(SRWA, seed=3)) == solve(f, SolverConfig(PROBSAT_EXP, seed=3))


def test_summarize_policy():
    outs = [SolveOutcome(SOLVED, x, 0) for x in (10, 20, 30)]
    b = summarize(outs)
    assert b.mean_flips == 20 and b.var_flips == 100 and not b.censored
    b = summarize(outs + [SolveOutcome(EXHAUSTED, 100, 0)])
    assert b.mean_flips == 20 and b.censored and b.solved_runs == 3
    assert summarize([SolveOutcome(SOLVED, 0, 0)] * 2).mean_flips == 0


def test_run_batch_seeds_and_csv(planted):
    f, _ = planted
    b = run_batch(f, SolverConfig(seed=5), 4)
    assert b.seeds == [derive_seed(5, "run", j) for j in range(4)]
    assert all(check_witness(f, o) for o in b.outcomes)
    text = batch_to_csv("inst", b)
    assert text.splitlines()[0] == "# schema: slshard.batch/1"
    assert len(text.splitlines()) == 6
    with pytest.raises(ValueError):
        run_batch(f, SolverConfig(), 0)
