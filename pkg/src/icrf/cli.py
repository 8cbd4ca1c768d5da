"""Command-line surface: fit, predict, simulate, evaluate, importance,
bench. Every command is deterministic under --seed; outputs are CSV
tables written atomically."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .bench import ExperimentSpec, run_experiment
from .dataio import (
    Dataset,
    _fmt,
    atomic_write,
    load_csv,
    parse_config,
    read_truth_csv,
    write_csv,
    write_truth_csv,
)
from .exceptions import IcrfError, MissingTruth, ParseError
from .forest import (
    ForestParams,
    fit,
    imse1_on_rows,
    imse2_on_rows,
    monitor_grid,
    predict,
    variable_importance,
)
from .serialize import load_model, save_model
from .simgen import Scenario, generate, truth_eval
from .splits import SplitRule
from .tree import TreeParams

TRUTH_GRID_N = 1001


def _parse_grid(spec: str) -> np.ndarray:
    try:
        start, stop, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ParseError(f"grid must be start:stop:step, got {spec!r}") from None
    if step <= 0 or stop < start:
        raise ParseError(f"bad grid spec {spec!r}")
    num = int(round((stop - start) / step)) + 1
    return np.linspace(start, stop, num)


def _forest_params(cfg: dict, n: int, seed: int | None, n_jobs: int | None) -> ForestParams:
    sub = cfg.get("subsample")
    if "s" in cfg:
        sub = cfg["s"] / n
    rule = SplitRule(cfg.get("rule", "GWRS"), glr_sign=cfg.get("glr_sign", "difference"))
    tree = TreeParams(
        mtry=cfg.get("mtry"),
        n_min=cfg.get("n_min", 6),
        rule=rule,
        prediction=cfg.get("prediction", "quasi_honest"),
    )
    return ForestParams(
        n_tree=cfg.get("n_tree", 300),
        n_fold=cfg.get("n_fold", 10),
        subsample=sub if sub is not None else 0.95,
        tree=tree,
        initial_smooth=cfg.get("initial_smooth", True),
        monitor_metric=cfg.get("monitor_metric", "imse1"),
        seed=seed if seed is not None else cfg.get("seed", 0),
        n_jobs=n_jobs if n_jobs is not None else cfg.get("n_jobs", 1),
        update_curves=cfg.get("update_curves", "full"),
        c_override=cfg.get("c_override"),
    )


def cmd_fit(args) -> int:
    cfg = parse_config(args.config) if args.config else {}
    tau = args.tau if args.tau is not None else cfg.get("tau")
    if tau is None:
        raise ParseError("tau must be given via --tau or the config file")
    data = load_csv(args.data, tau=tau, exact_time_mode=args.exact_times)
    params = _forest_params(cfg, data.n, args.seed, args.jobs)
    model = fit(data, params)
    save_model(model, args.out)
    lines = [f"fold,oob_{params.monitor_metric},is_k_opt"]
    for fold in model.folds:
        mark = 1 if fold.fold_index == model.k_opt else 0
        lines.append(f"{fold.fold_index},{_fmt(fold.oob_error)},{mark}")
    atomic_write(args.report, "\n".join(lines) + "\n")
    print(f"fitted {params.n_fold} folds x {params.n_tree} trees; k_opt={model.k_opt}")
    return 0


def _load_query(path: str, p: int) -> np.ndarray:
    import csv as _csv

    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    if any(len(r) != p for r in rows):
        raise ParseError(f"{path}: expected {p} covariate columns")
    return np.asarray(rows, dtype=float)


def cmd_predict(args) -> int:
    model = load_model(args.model)
    x = _load_query(args.query, len(model.feature_names))
    grid = _parse_grid(args.grid)
    values = predict(model, x, grid, fold=args.fold, smoothed=args.smoothed)
    lines = ["query_id,t,survival"]
    for i in range(x.shape[0]):
        for t, v in zip(grid, values[i]):
            lines.append(f"{i},{_fmt(t)},{_fmt(v)}")
    atomic_write(args.out, "\n".join(lines) + "\n")
    print(f"wrote {x.shape[0]} x {grid.size} curve points to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    sc = Scenario(id=args.scenario, n=args.n, M=args.M, seed=args.seed)
    sim = generate(sc)
    write_csv(sim.dataset, args.out)
    if args.truth:
        grid = np.linspace(0.0, sc.tau, TRUTH_GRID_N)
        s0 = np.vstack([truth_eval(sc.id, grid, x) for x in sim.dataset.X])
        write_truth_csv(args.truth, sim.latent_times, s0, grid)
    print(f"scenario {sc.id}: wrote {sim.dataset.n} rows, {sim.dataset.p} covariates")
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    data = load_csv(args.test, tau=model.tau)
    mgrid = monitor_grid(model.tau)
    rows = predict(model, data.X, mgrid, smoothed=True)
    report = [
        ("imse1", imse1_on_rows(rows, data.lefts, data.rights, model.tau, mgrid), data.n),
        ("imse2", imse2_on_rows(rows, data.lefts, data.rights, model.tau, mgrid), data.n),
    ]
    if args.truth:
        _, s0, grid = read_truth_csv(args.truth)
        if s0.shape[0] != data.n:
            raise ParseError("truth sidecar row count does not match the test set")
        est = predict(model, data.X, grid, smoothed=True)
        diff = np.abs(s0 - est)
        report.append(("eps_int", float(np.trapezoid(diff, grid, axis=1).mean()), data.n))
        report.append(("eps_sup", float(diff.max(axis=1).mean()), data.n))
    elif args.require_truth:
        raise MissingTruth("oracle metrics requested but no --truth sidecar given")
    lines = ["metric,value,n"] + [f"{m},{_fmt(v)},{n}" for m, v, n in report]
    atomic_write(args.out, "\n".join(lines) + "\n")
    for m, v, _ in report:
        print(f"{m} = {v:.6f}")
    return 0


def cmd_importance(args) -> int:
    model = load_model(args.model)
    data = load_csv(args.data, tau=model.tau)
    res = variable_importance(
        model, data, n_perm=args.nperm, metric=args.metric, seed=args.seed
    )
    lines = ["feature,raw,rescaled"]
    for name, r, s in zip(model.feature_names, res.raw, res.rescaled):
        lines.append(f"{name},{_fmt(float(r))},{_fmt(float(s))}")
    lines.append(f"_multiplier,{_fmt(res.multiplier)},1")
    atomic_write(args.out, "\n".join(lines) + "\n")
    top = model.feature_names[int(np.argmax(res.raw))]
    print(f"top feature: {top} (multiplier {res.multiplier:.6g})")
    return 0


BENCH_KEYS = {
    "scenarios": lambda v: tuple(int(x) for x in v.split(",")),
    "m_values": lambda v: tuple(int(x) for x in v.split(",")),
    "n_values": lambda v: tuple(int(x) for x in v.split(",")),
    "rules": lambda v: tuple(x.strip() for x in v.split(",")),
    "predictions": lambda v: tuple(x.strip() for x in v.split(",")),
    "n_replicates": int,
    "seed": int,
    "n_tree": int,
    "n_fold": int,
    "n_min": int,
    "mtry": int,
    "subsample": float,
    "n_test": int,
    "grid_resolution": int,
    "n_jobs": int,
    "glr_sign": str,
    "monitor_metric": str,
}


def _parse_bench_spec(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{ln}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in BENCH_KEYS:
                raise ParseError(f"{path}:{ln}: unknown key {key!r}")
            out[key] = BENCH_KEYS[key](val)
    return out


def cmd_bench(args) -> int:
    kw = _parse_bench_spec(args.spec)
    if args.jobs is not None:
        kw["n_jobs"] = args.jobs
    spec = ExperimentSpec(out_dir=args.out, **kw)
    rows = run_experiment(spec)
    print(f"bench: {len(rows)} rows -> {args.out}/raw.csv, summary.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="icrf", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a recursive forest")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--exact-times", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="emit survival curves for queries")
    p.add_argument("--model", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--grid", required=True, help="start:stop:step")
    p.add_argument("--smoothed", action="store_true")
    p.add_argument("--fold", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="draw a benchmark scenario dataset")
    p.add_argument("--scenario", type=int, required=True)
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--M", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="error metrics of a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--truth", default=None)
    p.add_argument("--require-truth", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("importance", help="permutation variable importance")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--nperm", type=int, default=10)
    p.add_argument("--metric", default="imse1", choices=("imse1", "imse2"))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("bench", help="replicated experiment harness")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IcrfError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
