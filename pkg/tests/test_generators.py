import json

import pytest

from slshard.cnf import CnfFormula, evaluate
from slshard.generators import (GenSpec, gen_planted, gen_uniform, generate, screen_satisfiable,
                                sidecar)


def test_uniform_shape():
    f, hidden = generate(GenSpec(n=50, ratio=4.267, seed=1))
    assert hidden is None
    assert len(f.clauses) == 213
    assert all(len(c) == 3 and len({abs(x) for x in c}) == 3 for c in f.clauses)
    assert f == gen_uniform(GenSpec(n=50, ratio=4.267, seed=1))


def test_planted_satisfied():
    for seed in range(20):
        f, hidden = gen_planted(GenSpec(kind="planted", n=20, ratio=4.267, seed=seed))
        assert len(f.clauses) == 85
        assert evaluate(f, hidden)


def test_seeds_give_distinct_formulas():
    fs = {generate(GenSpec(kind="planted", n=20, seed=s))[0].clauses for s in range(100)}
    assert len(fs) == 100


@pytest.mark.parametrize("kw", [dict(kind="x"), dict(k=1), dict(n=2, k=3), dict(ratio=0)])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        GenSpec(**kw)


def test_kind_mismatch():
    with pytest.raises(ValueError):
        gen_uniform(GenSpec(kind="planted"))
    with pytest.raises(ValueError):
        gen_planted(GenSpec())


def test_threshold_mix_of_sat_and_unsat():
    # near the threshold some uniform n=20 formulas are satisfiable and some are not
    fs = [generate(GenSpec(n=20, ratio=4.267, seed=s))[0] for s in range(60)]
    kept = screen_satisfiable(fs)
    assert 0 < len(kept) < len(fs)
    assert all(evaluate(f, w) for f, w in kept)


def test_screen_rules():
    contradiction = CnfFormula(1, ((1,), (-1,)))
    f, hidden = generate(GenSpec(kind="planted", n=60, ratio=4.2, seed=2))
    kept = screen_satisfiable([contradiction, f], witnesses=[None, hidden])
    assert kept == [(f, hidden)]
    # a large formula without a known witness goes to the solver
    kept = screen_satisfiable([f], budget=10**6)
    assert len(kept) == 1 and evaluate(f, kept[0][1])


def test_sidecar():
    spec = GenSpec(kind="planted", n=5, seed=1)
    f, hidden = generate(spec)
    doc = json.loads(sidecar(spec, hidden))
    assert doc["label"] == "planted-simple" and doc["hidden_assignment"] == hidden.tolist()
    assert json.loads(sidecar(GenSpec(), None))["label"] == "uniform"
