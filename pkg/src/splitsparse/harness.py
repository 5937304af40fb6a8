"""Success-rate sweeps over sparsity levels.

Trial ``t`` at sparsity ``K`` uses instance seed
``sub_seed(master_seed, f"trial/{K}/{t}")``; every solver in the trial sees
that same instance. Results do not depend on the worker count.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import islice

import numpy as np

from .core import hard_threshold
from .seeding import sub_seed
from .solvers import DEFAULT_MAX_ITERS, KINDS, SolverConfig, iterates, solve
from .synthetic import SUCCESS_TOL, InstanceSpec, gen_instance, relative_error

CSV_COLUMNS = ("solver", "K", "trials", "successes", "success_rate", "mean_time_s", "mean_iters")
DEFAULT_BUDGETS = (3, 4, 5, 6, 7)


class SpecError(ValueError):
    """A sweep specification is malformed."""


def default_K_grid(m):
    """Sparsity grid scaled from the m = 1000 protocol (start 20, step 5), up to 0.55 m."""
    start = max(1, round(0.02 * m))
    step = max(1, round(0.005 * m))
    return list(range(start, int(0.55 * m) + 1, step))


@dataclass
class SweepSpec:
    m: int
    p: int
    K_grid: list
    trials_per_K: int = 100
    solvers: list = field(default_factory=lambda: ["TSAA"])
    noise_level: float = 0.0
    master_seed: int = 0
    max_iters: dict = field(default_factory=dict)
    timing: bool = False  # wall-clock means make the CSV non-reproducible
    workers: int = 1

    def __post_init__(self):
        if self.m < 2 or self.p < 2:
            raise SpecError("need m >= 2 and p >= 2")
        if not self.K_grid:
            raise SpecError("K_grid must not be empty")
        if self.trials_per_K < 1:
            raise SpecError("trials_per_K must be >= 1")
        if not self.solvers:
            raise SpecError("solvers must not be empty")
        unknown = [s for s in self.solvers if s not in KINDS]
        if unknown:
            raise SpecError(f"unknown solvers {unknown}; expected a subset of {KINDS}")
        bad_k = [K for K in self.K_grid if not 0 <= K <= self.m]
        if bad_k:
            raise SpecError(f"K values out of range [0, m]: {bad_k}")
        if self.noise_level < 0:
            raise SpecError("noise_level must be >= 0")

    @classmethod
    def from_dict(cls, doc):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known - {"budgets"}
        if extra:
            raise SpecError(f"unknown spec keys: {sorted(extra)}")
        try:
            doc = {k: v for k, v in doc.items() if k in known}
            if "K_grid" not in doc and "m" in doc:
                doc["K_grid"] = default_K_grid(int(doc["m"]))
            return cls(**doc)
        except TypeError as exc:
            raise SpecError(str(exc)) from exc

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SpecError(f"{path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise SpecError(f"{path}: top level must be an object")
        return cls.from_dict(doc)

    def iters_for(self, solver):
        return int(self.max_iters.get(solver, DEFAULT_MAX_ITERS.get(solver, 100)))


@dataclass
class TrialRecord:
    K: int
    trial_index: int
    solver: str
    success: bool
    iterations: int
    wall_time_seconds: float
    final_relative_error: float
    stop_reason: str
    budget: int | None = None


@dataclass
class SweepReport:
    spec: SweepSpec
    records: list
    rows: list

    def to_csv(self):
        return _rows_to_csv(self.rows, CSV_COLUMNS)

    def rate(self, solver, K):
        for row in self.rows:
            if row["solver"] == solver and row["K"] == K:
                return row["success_rate"]
        raise KeyError((solver, K))


@dataclass
class FewIterationReport:
    spec: SweepSpec
    budgets: list
    records: list
    rows: list

    def to_csv(self):
        return _rows_to_csv(self.rows, ("budget",) + CSV_COLUMNS)

    def rate(self, solver, K, budget):
        for row in self.rows:
            if row["solver"] == solver and row["K"] == K and row["budget"] == budget:
                return row["success_rate"]
        raise KeyError((solver, K, budget))


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _rows_to_csv(rows, columns):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _error(x_hat, x_star):
    if not np.any(x_star):
        return 0.0 if not np.any(x_hat) else math.inf
    return relative_error(x_hat, x_star)


def _trial_seed(master_seed, K, t):
    return sub_seed(master_seed, f"trial/{K}/{t}")


def _run_trial(args):
    spec, K, t = args
    inst = gen_instance(InstanceSpec(_trial_seed(spec.master_seed, K, t), spec.m, spec.p, K,
                                     spec.noise_level))
    out = []
    for kind in spec.solvers:
        cfg = SolverConfig(K=K, max_iters=spec.iters_for(kind))
        t0 = time.perf_counter()
        try:
            res = solve(kind, inst.A, inst.y, cfg)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            elapsed = time.perf_counter() - t0
            out.append(TrialRecord(K, t, kind, False, 0, elapsed, math.inf,
                                   f"error: {type(exc).__name__}"))
            continue
        elapsed = time.perf_counter() - t0
        err = _error(res.x_hat, inst.x_star)
        out.append(TrialRecord(K, t, kind, err <= SUCCESS_TOL, res.iterations, elapsed, err,
                               res.stop_reason))
    return out


def _run_budget_trial(args):
    """One instance per trial; each solver runs once to the largest budget.

    Without other stopping rules the iterate after ``b`` steps does not
    depend on the total budget, so reading it off one run is equivalent to
    separate runs per budget.
    """
    spec, budgets, K, t = args
    inst = gen_instance(InstanceSpec(_trial_seed(spec.master_seed, K, t), spec.m, spec.p, K,
                                     spec.noise_level))
    wanted = set(budgets)
    top = max(budgets)
    out = []
    for kind in spec.solvers:
        cfg = SolverConfig(K=K, max_iters=top, residual_tol=None, iterate_tol=None)
        x = np.zeros(inst.A.n)
        done = 0
        t0 = time.perf_counter()
        snapshots = {}
        if 0 in wanted:
            snapshots[0] = (x, 0.0)
        try:
            for done, x in enumerate(islice(iterates(kind, inst.A, inst.y, cfg), top), start=1):
                if done in wanted:
                    snapshots[done] = (x, time.perf_counter() - t0)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            for b in budgets:
                out.append(TrialRecord(K, t, kind, False, 0, 0.0, math.inf,
                                       f"error: {type(exc).__name__}", budget=b))
            continue
        for b in budgets:
            # OMP stops early; later budgets reuse its final iterate
            xb, elapsed = snapshots.get(b, (x, time.perf_counter() - t0))
            if kind == "FISTA":
                xb = hard_threshold(xb, K)
            err = _error(xb, inst.x_star)
            out.append(TrialRecord(K, t, kind, err <= SUCCESS_TOL, min(b, done), elapsed, err,
                                   "max-iters", budget=b))
    return out


def _map(fn, items, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items, chunksize=4))
    return [fn(item) for item in items]


def _aggregate(records, keys, timing):
    groups = {}
    for rec in records:
        groups.setdefault(tuple(getattr(rec, k) for k in keys), []).append(rec)
    rows = []
    for key, recs in groups.items():
        n = len(recs)
        wins = sum(r.success for r in recs)
        row = dict(zip(keys, key))
        row.update(
            trials=n,
            successes=wins,
            success_rate=wins / n,
            mean_time_s=float(np.mean([r.wall_time_seconds for r in recs])) if timing else math.nan,
            mean_iters=float(np.mean([r.iterations for r in recs])),
        )
        rows.append(row)
    return rows


def run_sweep(spec):
    items = [(spec, K, t) for K in spec.K_grid for t in range(spec.trials_per_K)]
    records = [r for batch in _map(_run_trial, items, spec.workers) for r in batch]
    order = {s: i for i, s in enumerate(spec.solvers)}
    records.sort(key=lambda r: (order[r.solver], spec.K_grid.index(r.K), r.trial_index))
    return SweepReport(spec, records, _aggregate(records, ("solver", "K"), spec.timing))


def run_few_iteration_study(spec, it_budgets=DEFAULT_BUDGETS):
    """Success rate versus K when each solver is stopped after a fixed iteration count."""
    budgets = sorted(set(int(b) for b in it_budgets))
    if not budgets or budgets[0] < 0:
        raise SpecError("budgets must be a non-empty list of non-negative integers")
    items = [(spec, budgets, K, t) for K in spec.K_grid for t in range(spec.trials_per_K)]
    records = [r for batch in _map(_run_budget_trial, items, spec.workers) for r in batch]
    order = {s: i for i, s in enumerate(spec.solvers)}
    records.sort(key=lambda r: (r.budget, order[r.solver], spec.K_grid.index(r.K), r.trial_index))
    rows = _aggregate(records, ("budget", "solver", "K"), spec.timing)
    return FewIterationReport(spec, budgets, records, rows)


def records_to_dicts(records):
    return [asdict(r) for r in records]
