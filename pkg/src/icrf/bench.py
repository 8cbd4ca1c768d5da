"""Replicated-experiment orchestration: per-scenario replicate runs,
oracle-error and OOB aggregation, rule/prediction comparisons, and
sample-size sweeps. Replicates are keyed by seed, sharded to disk, and
resumable; re-running a completed spec changes nothing.
"""

from __future__ import annotations

import concurrent.futures
import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .dataio import atomic_write, _fmt
from .forest import ForestParams, fit, predict
from .simgen import Scenario, draw_covariates, generate, truth_eval
from .splits import SplitRule
from .tree import TreeParams

RAW_COLUMNS = [
    "scenario", "M", "n", "rule", "prediction", "replicate", "fold",
    "eps_int", "eps_sup", "oob", "k_opt", "seconds",
]

VALUE_COLUMNS = ["eps_int", "eps_sup", "oob", "seconds"]


@dataclass(frozen=True)
class ExperimentSpec:
    scenarios: tuple = (1,)
    m_values: tuple = (1,)
    n_values: tuple = (300,)
    n_replicates: int = 20
    rules: tuple = ("GWRS",)
    predictions: tuple = ("quasi_honest",)
    seed: int = 0
    n_tree: int = 50
    n_fold: int = 5
    n_min: int = 6
    mtry: int | None = None
    subsample: float = 0.95
    initial_smooth: bool = True
    monitor_metric: str = "imse1"
    glr_sign: str = "difference"
    n_test: int = 100
    grid_resolution: int = 201
    n_jobs: int = 1
    out_dir: str | None = None

    def cells(self):
        for sc in self.scenarios:
            for m in self.m_values:
                for n in self.n_values:
                    for rule in self.rules:
                        for pred in self.predictions:
                            yield (sc, m, n, rule, pred)


def _rep_entropy(spec: ExperimentSpec, cell, rep: int) -> list[int]:
    sc, m, n, rule, pred = cell
    rule_ix = ("GWRS", "GLR", "SWRS", "SLR").index(rule)
    pred_ix = ("quasi_honest", "exploitative").index(pred)
    return [spec.seed, sc, m, n, rule_ix, pred_ix, rep]


def run_replicate(spec: ExperimentSpec, cell, rep: int) -> list[dict]:
    """One (cell, replicate): generate, fit, score every fold."""
    sc, m, n, rule, pred = cell
    entropy = _rep_entropy(spec, cell, rep)
    data_seed = int(
        np.random.SeedSequence(entropy).generate_state(1, np.uint32)[0]
    )
    sim = generate(Scenario(id=sc, n=n, M=m, seed=data_seed))
    test_rng = np.random.default_rng(np.random.SeedSequence(entropy + [1]))
    x_test = draw_covariates(sc, spec.n_test, test_rng)

    params = ForestParams(
        n_tree=spec.n_tree,
        n_fold=spec.n_fold,
        subsample=spec.subsample,
        initial_smooth=spec.initial_smooth,
        monitor_metric=spec.monitor_metric,
        seed=data_seed,
        tree=TreeParams(
            mtry=spec.mtry,
            n_min=spec.n_min,
            rule=SplitRule(rule, glr_sign=spec.glr_sign),
            prediction=pred,
        ),
    )
    t0 = time.perf_counter()
    model = fit(sim.dataset, params)
    seconds = time.perf_counter() - t0

    tau = sim.dataset.tau
    grid = np.linspace(0.0, tau, spec.grid_resolution)
    truth_rows = np.vstack([truth_eval(sc, grid, x) for x in x_test])
    rows = []
    for k in range(1, spec.n_fold + 1):
        est = predict(model, x_test, grid, fold=k, smoothed=True)
        diff = np.abs(truth_rows - est)
        rows.append(
            {
                "scenario": sc, "M": m, "n": n, "rule": rule, "prediction": pred,
                "replicate": rep, "fold": k,
                "eps_int": float(np.trapezoid(diff, grid, axis=1).mean()),
                "eps_sup": float(diff.max(axis=1).mean()),
                "oob": model.folds[k - 1].oob_error,
                "k_opt": model.k_opt,
                "seconds": seconds,
            }
        )
    return rows


def _shard_name(cell, rep: int) -> str:
    sc, m, n, rule, pred = cell
    return f"s{sc}_M{m}_n{n}_{rule}_{pred}_rep{rep}.csv"


def _rows_to_csv(rows, columns) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(
            ",".join(
                _fmt(row[c]) if isinstance(row[c], float) else str(row[c])
                for c in columns
            )
        )
    return "\n".join(lines) + "\n"


def _read_rows(path, columns):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        out = []
        for rec in reader:
            row = {}
            for c in columns:
                v = rec[c]
                if c in ("scenario", "M", "n", "replicate", "fold", "k_opt"):
                    row[c] = int(v)
                elif c in VALUE_COLUMNS:
                    row[c] = float(v)
                else:
                    row[c] = v
            out.append(row)
        return out


def _replicate_task(args):
    spec, cell, rep, shard_path = args
    if shard_path is not None and os.path.exists(shard_path):
        return _read_rows(shard_path, RAW_COLUMNS), None
    try:
        rows = run_replicate(spec, cell, rep)
    except Exception as exc:  # recorded, run continues
        return [], f"{cell} rep {rep}: {type(exc).__name__}: {exc}"
    if shard_path is not None:
        atomic_write(shard_path, _rows_to_csv(rows, RAW_COLUMNS))
    return rows, None


def run_experiment(spec: ExperimentSpec) -> list[dict]:
    """All (cell, replicate) runs; returns raw rows, writes raw.csv and
    summary.csv when ``spec.out_dir`` is set."""
    shard_dir = None
    if spec.out_dir is not None:
        shard_dir = os.path.join(spec.out_dir, "shards")
        os.makedirs(shard_dir, exist_ok=True)
    tasks = []
    for cell in spec.cells():
        for rep in range(spec.n_replicates):
            shard = (
                os.path.join(shard_dir, _shard_name(cell, rep))
                if shard_dir
                else None
            )
            tasks.append((spec, cell, rep, shard))

    if spec.n_jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(spec.n_jobs) as pool:
            results = list(pool.map(_replicate_task, tasks))
    else:
        results = [_replicate_task(t) for t in tasks]

    rows, failures = [], []
    for rws, err in results:
        rows.extend(rws)
        if err is not None:
            failures.append(err)

    rows.sort(
        key=lambda r: (
            r["scenario"], r["M"], r["n"], r["rule"], r["prediction"],
            r["replicate"], r["fold"],
        )
    )
    if spec.out_dir is not None:
        atomic_write(
            os.path.join(spec.out_dir, "raw.csv"), _rows_to_csv(rows, RAW_COLUMNS)
        )
        summary = aggregate(rows)
        cols = list(summary[0].keys()) if summary else []
        atomic_write(
            os.path.join(spec.out_dir, "summary.csv"), _rows_to_csv(summary, cols)
        )
        if failures:
            atomic_write(
                os.path.join(spec.out_dir, "failures.txt"), "\n".join(failures) + "\n"
            )
    return rows


GROUP_KEYS = ("scenario", "M", "n", "rule", "prediction", "fold")


def aggregate(rows, group_keys=GROUP_KEYS, value_columns=VALUE_COLUMNS) -> list[dict]:
    """Mean and 1st/3rd quartile per group (linear-interpolation
    quantiles); order-invariant in the input rows."""
    groups: dict = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in group_keys), []).append(row)
    out = []
    for key in sorted(groups):
        members = groups[key]
        rec = dict(zip(group_keys, key))
        rec["n_rows"] = len(members)
        for col in value_columns:
            vals = np.asarray([m[col] for m in members], dtype=float)
            rec[f"{col}_mean"] = float(vals.mean())
            rec[f"{col}_q1"] = float(np.quantile(vals, 0.25))
            rec[f"{col}_q3"] = float(np.quantile(vals, 0.75))
        out.append(rec)
    return out
