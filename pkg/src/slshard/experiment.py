"""Hardness-distribution experiment: many random extensions of one base formula.

For modification i the extension seed is ``derive_seed(master, "extension", i)``
and run j of it uses ``derive_seed(master, "run/<i>", j)``; the dataset is
therefore a function of the plan alone, whatever the worker count or the
order in which workers finish. Rows are appended in index order and flushed,
so an interrupted experiment resumes where it stopped.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import multiprocessing as mp
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cnf import CnfFormula, parse_dimacs
from .generators import GenSpec, generate, screen_satisfiable
from .resolution import DEFAULT_W, cached_extension_pool, calibrate_p_from_size, sample_extension
from .rng import derive_seed
from .solvers import SRWA, SolverConfig, run_batch

log = logging.getLogger(__name__)

DATASET_SCHEMA = "# schema: slshard.hardness/1"
DATASET_COLUMNS = ["mod_index", "extension_seed", "extension_size", "mean_flips",
                   "var_flips", "runs", "censored"]
DESK_MODIFICATIONS = 200
DESK_RUNS = 20


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentPlan:
    base: str | dict  # DIMACS path, or GenSpec fields
    modifications: int = DESK_MODIFICATIONS
    runs_per_mod: int = DESK_RUNS
    w: int | None = DEFAULT_W
    p: float | None = None  # explicit inclusion probability wins over target_ratio
    target_ratio: float = 0.1  # expected |L| as a fraction of |F|
    algorithm: str = SRWA
    max_flips: int = 10**7
    cb: float | None = None
    t_restart: int | None = None
    master_seed: int = 0
    trusted: bool = False  # skip the satisfiability screen of the base formula

    def __post_init__(self):
        if self.modifications < 1 or self.runs_per_mod < 1:
            raise PlanError("modifications and runs_per_mod must be >= 1")
        if self.p is not None and not 0 < self.p <= 1:
            raise PlanError("p must lie in (0, 1]")
        if self.target_ratio <= 0:
            raise PlanError("target_ratio must be positive")
        SolverConfig(self.algorithm, self.t_restart, self.max_flips, 0, self.cb)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise PlanError(f"unknown plan fields: {sorted(extra)}")
        return cls(**d)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(self.algorithm, self.t_restart, self.max_flips, 0, self.cb)

    def digest(self) -> str:
        doc = self.to_dict()
        if isinstance(self.base, str):
            doc["base"] = {"path_sha256": hashlib.sha256(Path(self.base).read_bytes()).hexdigest()}
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def load_base(plan: ExperimentPlan) -> tuple[CnfFormula, object]:
    if isinstance(plan.base, str):
        return parse_dimacs(Path(plan.base).read_bytes()), None
    return generate(GenSpec(**plan.base))


@dataclass(frozen=True)
class HardnessRow:
    mod_index: int
    extension_seed: int
    extension_size: int
    mean_flips: float
    var_flips: float
    runs: int
    censored: int

    def csv_fields(self) -> list:
        return [self.mod_index, self.extension_seed, self.extension_size,
                repr(self.mean_flips), repr(self.var_flips), self.runs, self.censored]


@dataclass
class HardnessDataset:
    rows: list
    plan_digest: str
    meta: dict = field(default_factory=dict)

    def values(self, include_censored: bool = False) -> np.ndarray:
        return np.array([r.mean_flips for r in self.rows
                         if include_censored or not r.censored], dtype=float)

    def noise_variances(self) -> np.ndarray:
        """Per-row variance of the mean: run variance divided by runs."""
        return np.array([r.var_flips / r.runs for r in self.rows if not r.censored], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        _write_header(buf, self.plan_digest)
        w = csv.writer(buf, lineterminator="\n")
        for r in self.rows:
            w.writerow(r.csv_fields())
        return buf.getvalue()


def _write_header(fh, digest: str):
    fh.write(DATASET_SCHEMA + "\n")
    fh.write(f"# plan_digest: {digest}\n")
    fh.write(",".join(DATASET_COLUMNS) + "\n")


def _parse_row(rec: list[str]) -> HardnessRow:
    return HardnessRow(int(rec[0]), int(rec[1]), int(rec[2]), float(rec[3]), float(rec[4]),
                       int(rec[5]), int(rec[6]))


def read_dataset(path) -> HardnessDataset:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or lines[0] != DATASET_SCHEMA:
        raise PlanError(f"{path}: missing dataset schema line")
    digest = ""
    body = []
    for line in lines[1:]:
        if line.startswith("# plan_digest:"):
            digest = line.split(":", 1)[1].strip()
        elif line.startswith("#") or not line.strip():
            continue
        else:
            body.append(line)
    if not body or body[0].split(",") != DATASET_COLUMNS:
        raise PlanError(f"{path}: unexpected column header")
    rows = [_parse_row(rec) for rec in csv.reader(body[1:])]
    return HardnessDataset(rows, digest)


# --- worker side ------------------------------------------------------------

_STATE: dict = {}


def _init_worker(formula, pool, p, w, cfg, master, runs):
    _STATE.update(formula=formula, pool=pool, p=p, w=w, cfg=cfg, master=master, runs=runs)


def _run_modification(i: int) -> HardnessRow:
    s = _STATE
    ext_seed = derive_seed(s["master"], "extension", i)
    ext = sample_extension(s["formula"], s["w"], s["p"], ext_seed, pool=s["pool"])
    g = s["formula"].extended(ext.resolvents)
    tag = f"run/{i}"
    batch = run_batch(g, s["cfg"], s["runs"],
                      seed_stream=lambda j: derive_seed(s["master"], tag, j))
    censored = len(batch.outcomes) - batch.solved_runs
    flips = np.array([o.flips for o in batch.outcomes], dtype=float)
    if censored:
        # censored runs count with their full budget: the mean is a lower bound
        mean, var = float(flips.mean()), float(flips.var(ddof=1)) if flips.size > 1 else 0.0
    else:
        mean, var = batch.mean_flips, batch.var_flips
    return HardnessRow(i, ext_seed, len(ext), mean, var, s["runs"], censored)


# --- coordinator ------------------------------------------------------------

@dataclass(frozen=True)
class PreparedPlan:
    formula: CnfFormula
    pool: object
    p: float


def prepare(plan: ExperimentPlan) -> PreparedPlan:
    f, hidden = load_base(plan)
    if not plan.trusted:
        kept = screen_satisfiable([f], budget=plan.max_flips, seed=plan.master_seed,
                                  witnesses=[hidden])
        if not kept:
            raise PlanError("base formula could not be certified satisfiable "
                            "(pass trusted=true to skip the screen)")
    pool = cached_extension_pool(f, plan.w)
    if plan.p is not None:
        p = plan.p
    elif len(pool) == 0:
        p = 1.0
    else:
        p = calibrate_p_from_size(len(pool), plan.target_ratio * len(f.clauses))
    return PreparedPlan(f, pool, p)


def _completed_rows(path: Path, digest: str) -> list[HardnessRow]:
    """Rows already on disk for this plan; a torn last line is dropped."""
    if not path.exists():
        return []
    raw = path.read_bytes()
    if not raw.endswith(b"\n"):
        raw = raw[: raw.rfind(b"\n") + 1]
        path.write_bytes(raw)
    ds = read_dataset(path) if raw else None
    if ds is None:
        return []
    if ds.plan_digest != digest:
        raise PlanError(f"{path} belongs to a different plan (digest {ds.plan_digest[:12]})")
    for k, r in enumerate(ds.rows):
        if r.mod_index != k:
            raise PlanError(f"{path}: rows out of order at line for mod {r.mod_index}")
    return ds.rows


def run_experiment(plan: ExperimentPlan, out_path=None, workers: int | None = None,
                   stop_after: int | None = None) -> HardnessDataset:
    """Run (or resume) the experiment; rows stream to ``out_path`` when given.

    ``stop_after`` ends the run once that many rows exist (used to test resumption).
    """
    digest = plan.digest()
    prep = prepare(plan)
    out = Path(out_path) if out_path is not None else None
    done = _completed_rows(out, digest) if out is not None else []
    todo = list(range(len(done), plan.modifications))
    if stop_after is not None:
        todo = [i for i in todo if i < stop_after]
    rows = list(done)
    fh = None
    if out is not None:
        fresh = not out.exists() or out.stat().st_size == 0
        fh = open(out, "a", newline="")
        if fresh:
            _write_header(fh, digest)
            fh.flush()
    writer = csv.writer(fh, lineterminator="\n") if fh else None
    args = (prep.formula, prep.pool, prep.p, plan.w, plan.solver_config(),
            plan.master_seed, plan.runs_per_mod)
    workers = workers or os.cpu_count() or 1
    try:
        if workers <= 1 or len(todo) <= 1:
            _init_worker(*args)
            results = map(_run_modification, todo)
            _consume(results, rows, writer, fh)
        else:
            ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
            with ctx.Pool(workers, initializer=_init_worker, initargs=args) as pool:
                # imap yields in submission order, whatever order workers finish in
                _consume(pool.imap(_run_modification, todo, chunksize=1), rows, writer, fh)
    finally:
        if fh:
            fh.close()
    meta = {"p": prep.p, "pool_size": len(prep.pool), "base_clauses": len(prep.formula.clauses),
            "closure_truncated": prep.pool.stats.truncated}
    return HardnessDataset(rows, digest, meta)


def _consume(results, rows, writer, fh):
    for row in results:
        rows.append(row)
        if writer is not None:
            writer.writerow(row.csv_fields())
            fh.flush()


# --- sample files -----------------------------------------------------------

SAMPLE_SCHEMA = "# schema: slshard.sample/1"


def read_values(path) -> tuple[np.ndarray, np.ndarray | None, int]:
    """Values (and per-point noise variances when known) from a dataset or sample CSV.

    Returns (values, noise_var or None, runs-per-point). Censored dataset rows
    and non-positive means are dropped.
    """
    text = Path(path).read_text()
    first = text.splitlines()[0] if text else ""
    if first == DATASET_SCHEMA:
        ds = read_dataset(path)
        keep = [r for r in ds.rows if not r.censored and r.mean_flips > 0]
        vals = np.array([r.mean_flips for r in keep], dtype=float)
        var = np.array([r.var_flips / r.runs for r in keep], dtype=float)
        runs = keep[0].runs if keep else 1
        return vals, var, runs
    vals = []
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            vals.append(float(s.split(",")[0]))
        except ValueError:
            if vals:
                raise PlanError(f"{path}: non-numeric value {s!r}") from None
            continue  # column header
    return np.array(vals, dtype=float), None, 1


def write_values(values, name: str = "value") -> str:
    buf = io.StringIO()
    buf.write(SAMPLE_SCHEMA + "\n")
    buf.write(name + "\n")
    for v in values:
        buf.write(f"{float(v)!r}\n")
    return buf.getvalue()
