import numpy as np
import pytest

from slshard.experiment import (DATASET_SCHEMA, ExperimentPlan, PlanError, read_dataset,
                                read_values, run_experiment, write_values)

BASE = {"kind": "planted", "n": 5, "k": 3, "ratio": 4.267, "seed": 3}


def plan(**kw):
    d = dict(base=BASE, modifications=2, runs_per_mod=2, master_seed=11)
    d.update(kw)
    return ExperimentPlan(**d)


def test_plan_validation():
    with pytest.raises(PlanError):
        plan(modifications=0)
    with pytest.raises(PlanError):
        plan(runs_per_mod=0)
    with pytest.raises(PlanError):
        ExperimentPlan.from_dict({"base": BASE, "bogus": 1})
    assert ExperimentPlan.from_dict(plan().to_dict()) == plan()
    assert plan().digest() != plan(master_seed=12).digest()


def test_tiny_run_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    ds = run_experiment(plan(), a, workers=1)
    run_experiment(plan(), b, workers=1)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == DATASET_SCHEMA
    assert len(ds.rows) == 2 and [r.mod_index for r in ds.rows] == [0, 1]
    assert all(r.mean_flips > 0 or r.censored for r in ds.rows)
    assert read_dataset(a).to_csv() == a.read_text()


def test_empty_pool_gives_identical_modifications():
    ds = run_experiment(plan(modifications=4, runs_per_mod=3, w=0, p=1.0), workers=1)
    assert ds.meta["pool_size"] == 0
    assert all(r.extension_size == 0 for r in ds.rows)
    # only the run seeds differ between rows
    assert len({r.extension_seed for r in ds.rows}) == 4


def test_resume_after_stop(tmp_path):
    p = plan(modifications=5)
    full, part = tmp_path / "full.csv", tmp_path / "part.csv"
    run_experiment(p, full, workers=1)
    ds = run_experiment(p, part, workers=1, stop_after=2)
    assert len(ds.rows) == 2
    run_experiment(p, part, workers=1)
    assert part.read_bytes() == full.read_bytes()


def test_resume_drops_torn_line(tmp_path):
    p = plan(modifications=3)
    full, part = tmp_path / "full.csv", tmp_path / "part.csv"
    run_experiment(p, full, workers=1)
    text = full.read_text()
    part.write_text(text[: len(text) - 5])
    run_experiment(p, part, workers=1)
    assert part.read_bytes() == full.read_bytes()


def test_resume_rejects_other_plan(tmp_path):
    out = tmp_path / "d.csv"
    run_experiment(plan(), out, workers=1)
    with pytest.raises(PlanError):
        run_experiment(plan(master_seed=99), out, workers=1)


def test_worker_count_independence(tmp_path):
    p = plan(modifications=4)
    run_experiment(p, tmp_path / "w1.csv", workers=1)
    run_experiment(p, tmp_path / "w2.csv", workers=2)
    assert (tmp_path / "w1.csv").read_bytes() == (tmp_path / "w2.csv").read_bytes()


def test_unsatisfiable_base_rejected(tmp_path):
    cnf = tmp_path / "u.cnf"
    cnf.write_text("p cnf 1 2\n1 0\n-1 0\n")
    with pytest.raises(PlanError):
        run_experiment(ExperimentPlan(base=str(cnf), modifications=1, runs_per_mod=1,
                                      max_flips=1000))


def test_read_values(tmp_path):
    out = tmp_path / "d.csv"
    ds = run_experiment(plan(modifications=3, runs_per_mod=3), out, workers=1)
    vals, var, runs = read_values(out)
    assert runs == 3 and vals.size == var.size
    assert np.allclose(vals, [r.mean_flips for r in ds.rows if not r.censored])
    s = tmp_path / "s.csv"
    s.write_text(write_values([1.5, 2.0, 3.25]))
    vals, var, runs = read_values(s)
    assert vals.tolist() == [1.5, 2.0, 3.25] and var is None and runs == 1
