"""Recursive forest driver: per-fold ensembles with 95% subsampling,
carried-curve updates between folds, OOB convergence monitoring,
best-fold selection, prediction, and permutation variable importance.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from .curves import EPS_MASS, StepSurvival, refine_uniform
from .dataio import Dataset
from .exceptions import (
    DimensionMismatch,
    EmptyOob,
    InsufficientData,
    InvalidFold,
)
from .npmle import npmle_fit, tail_correct
from .smooth import bandwidth, curve_atoms, smooth_curve, smoothed_values_matrix
from .splits import slr_scores, swrs_scores
from .tree import FoldContext, Tree, TreeParams, grow_tree_ctx, support_bound_of

MONITOR_GRID_N = 201  # trapezoid resolution for smoothed-curve metrics
GRID_REFINE_N = 64  # uniform refinement of (0, tau] added to the knot grid
TREE_BATCH = 8  # fixed batching so results do not depend on worker count


@dataclass(frozen=True)
class ForestParams:
    n_tree: int = 300
    n_fold: int = 10
    subsample: float = 0.95
    tree: TreeParams = field(default_factory=TreeParams)
    initial_smooth: bool = True
    monitor_metric: str = "imse1"
    seed: int = 0
    n_jobs: int = 1
    update_curves: str = "full"  # or "oob": carried curves from OOB trees only
    c_override: float | None = None

    def __post_init__(self):
        if self.n_tree < 1 or self.n_fold < 1:
            raise InsufficientData("n_tree and n_fold must be >= 1")
        if not 0.0 < self.subsample <= 1.0:
            raise InsufficientData("subsample must be in (0, 1]")
        if self.monitor_metric not in ("imse1", "imse2"):
            raise InsufficientData(f"unknown monitor metric {self.monitor_metric!r}")


@dataclass
class ForestFold:
    fold_index: int
    trees: list[Tree]
    per_tree_oob: np.ndarray

    @property
    def oob_error(self) -> float:
        return float(np.nanmean(self.per_tree_oob))


@dataclass
class IcrfModel:
    params: ForestParams
    feature_names: list[str]
    tau: float
    h: float
    initial_marginal: StepSurvival
    folds: list[ForestFold]
    k_opt: int

    @property
    def oob_errors(self) -> np.ndarray:
        return np.asarray([f.oob_error for f in self.folds])


def monitor_grid(tau: float) -> np.ndarray:
    return np.linspace(0.0, tau, MONITOR_GRID_N)


# -- shared knot grid -------------------------------------------------------


def build_grid(data: Dataset, extra=()) -> tuple[np.ndarray, int]:
    """All finite positive interval endpoints, a uniform refinement of
    (0, tau], and tau itself; returns (grid, #columns <= tau)."""
    tau = data.tau
    pieces = [
        data.lefts[data.lefts > 0.0],
        data.rights[np.isfinite(data.rights)],
        np.linspace(0.0, tau, GRID_REFINE_N + 1)[1:],
        np.asarray(extra, dtype=float),
    ]
    grid = np.unique(np.concatenate(pieces))
    grid = grid[grid > 0.0]
    m_split = int(np.searchsorted(grid, tau, side="right"))
    return grid, m_split


# -- carried-curve update ---------------------------------------------------


def _carried_rows(base_rows, s_left, s_right, data: Dataset, grid: np.ndarray):
    """Materialize per-subject full-conditional curves on the grid.

    base_rows: (n, m) covariate-conditional values (row broadcast allowed);
    s_left/s_right: exact S(L_i|X_i), S(R_i|X_i).
    """
    n, m = data.n, grid.size
    tau = data.tau
    out = np.empty((n, m))
    for i in range(n):
        left, right = data.lefts[i], data.rights[i]
        row = base_rows[i] if base_rows.shape[0] > 1 else base_rows[0]
        if np.isinf(right):
            if s_left[i] <= EPS_MASS:
                v = np.where(grid > left, np.exp(-(grid - left) / tau), 1.0)
            else:
                v = np.minimum(row / s_left[i], 1.0)
                v = np.where(grid <= left, 1.0, v)
        else:
            denom = s_left[i] - s_right[i]
            if denom <= EPS_MASS:
                hi = min(right, tau) if min(right, tau) > left else right
                v = np.interp(grid, [left, hi], [1.0, 0.0])
                v = np.where(grid > hi, 0.0, v)
            else:
                v = np.clip((row - s_right[i]) / denom, 0.0, 1.0)
                v = np.where(grid <= left, 1.0, v)
                v = np.where(grid > right, 0.0, v)
        out[i] = np.minimum.accumulate(v)
    return out


def _endpoint_values_from_curve(eval_fn, data: Dataset):
    s_l = np.asarray(
        [1.0 if l <= 0.0 else float(eval_fn(l)) for l in data.lefts]
    )
    s_r = np.asarray(
        [0.0 if np.isinf(r) else float(eval_fn(r)) for r in data.rights]
    )
    return s_l, s_r


def _endpoint_values_from_rows(rows, data: Dataset, grid: np.ndarray):
    li = np.searchsorted(grid, data.lefts)
    ri = np.searchsorted(grid, np.where(np.isinf(data.rights), grid[-1], data.rights))
    s_l = np.where(
        data.lefts <= 0.0, 1.0, rows[np.arange(data.n), np.minimum(li, grid.size - 1)]
    )
    s_r = np.where(np.isinf(data.rights), 0.0, rows[np.arange(data.n), ri])
    return s_l, s_r


# -- smoothed-curve metrics on a fixed grid ---------------------------------


def _seg_integral(grid, vals, a, b, one_minus: bool) -> float:
    """Trapezoid of S^2 (or (1-S)^2) on [a, b] with exact endpoints."""
    if b <= a:
        return 0.0
    inside = grid[(grid > a) & (grid < b)]
    xs = np.concatenate(([a], inside, [b]))
    ys = np.interp(xs, grid, vals)
    f = (1.0 - ys) ** 2 if one_minus else ys**2
    return float(np.trapezoid(f, xs))


def imse1_on_rows(rows, lefts, rights, tau, grid) -> float:
    """IMSE1 of per-subject survival rows sampled on ``grid``."""
    terms = []
    for i in range(rows.shape[0]):
        lo = min(lefts[i], tau)
        hi = min(rights[i], tau)
        length = tau - hi + lo
        if length <= 0.0:
            continue
        num = _seg_integral(grid, rows[i], 0.0, lo, True) + _seg_integral(
            grid, rows[i], hi, tau, False
        )
        terms.append(num / length)
    return float(np.mean(terms)) if terms else np.nan


def imse2_on_rows(rows, lefts, rights, tau, grid) -> float:
    """IMSE2 of per-subject covariate-conditional rows on ``grid``; the
    full-conditional side is the pointwise projection of each row."""
    terms = np.empty(rows.shape[0])
    for i in range(rows.shape[0]):
        v = rows[i]
        left, right = lefts[i], rights[i]
        s_l = 1.0 if left <= 0.0 else float(np.interp(left, grid, v))
        if np.isinf(right):
            if s_l <= EPS_MASS:
                cond = np.where(grid > left, np.exp(-(grid - left) / tau), 1.0)
            else:
                cond = np.where(grid <= left, 1.0, np.minimum(v / s_l, 1.0))
        else:
            s_r = float(np.interp(right, grid, v))
            denom = s_l - s_r
            if denom <= EPS_MASS:
                hi = min(right, tau) if min(right, tau) > left else right
                cond = np.interp(grid, [left, hi], [1.0, 0.0])
                cond = np.where(grid > hi, 0.0, cond)
            else:
                cond = np.clip((v - s_r) / denom, 0.0, 1.0)
                cond = np.where(grid <= left, 1.0, cond)
                cond = np.where(grid > right, 0.0, cond)
        terms[i] = np.trapezoid((cond - v) ** 2, grid) / tau
    return float(terms.mean()) if terms.size else np.nan


def _tree_leaf_smoothed_rows(tree: Tree, leaf_ids, h, grid) -> dict[int, np.ndarray]:
    # masses are spread uniformly within their intervals before smoothing
    atoms = [curve_atoms(refine_uniform(tree.leaves[i].curve)) for i in leaf_ids]
    rows = smoothed_values_matrix(
        [a[0] for a in atoms], [a[1] for a in atoms], h, grid
    )
    return {leaf: rows[j] for j, leaf in enumerate(leaf_ids)}


def _tree_oob_error(tree, ctx: FoldContext, oob, h, grid, metric) -> float:
    if oob.size == 0:
        return np.nan
    leaf_of = tree.apply(ctx.X[oob])
    row_map = _tree_leaf_smoothed_rows(tree, sorted(set(int(v) for v in leaf_of)), h, grid)
    rows = np.vstack([row_map[int(v)] for v in leaf_of])
    fn = imse1_on_rows if metric == "imse1" else imse2_on_rows
    return fn(rows, ctx.lefts[oob], ctx.rights[oob], ctx.tau, grid)


# -- tree batch construction -------------------------------------------------


def _build_tree_batch(args):
    (ctx, tparams, seed, fold_k, b_list, s_size, h, mgrid, metric, update_mode) = args
    n = ctx.n
    trees, oob_errs = [], []
    pred_sum = np.zeros((n, ctx.grid.size))
    oob_sum = np.zeros((n, ctx.grid.size)) if update_mode == "oob" else None
    oob_cnt = np.zeros(n) if update_mode == "oob" else None
    for b in b_list:
        rng = np.random.default_rng(np.random.SeedSequence([seed, fold_k, b]))
        inbag = np.sort(rng.choice(n, size=s_size, replace=False))
        oob = np.setdiff1d(np.arange(n), inbag)
        tree = grow_tree_ctx(ctx, inbag, tparams, rng)
        oob_errs.append(_tree_oob_error(tree, ctx, oob, h, mgrid, metric))
        # leaf curves enter the forest through their within-interval
        # (uniform-density) interpolation, not the right-endpoint step
        leaf_rows = np.vstack([leaf.curve.interpolate(ctx.grid) for leaf in tree.leaves])
        rows = leaf_rows[tree.apply(ctx.X)]
        pred_sum += rows
        if update_mode == "oob":
            oob_sum[oob] += rows[oob]
            oob_cnt[oob] += 1.0
        trees.append(tree)
    return b_list[0], trees, oob_errs, pred_sum, oob_sum, oob_cnt


def fit(data: Dataset, params: ForestParams) -> IcrfModel:
    """Fit the recursive forest (Algorithm: marginal init, K folds of
    extremely randomized trees on carried full-conditional curves, OOB
    monitoring, best-fold selection)."""
    n, p = data.n, data.p
    n_min = params.tree.n_min
    if n < 2 * n_min:
        raise InsufficientData(f"need at least {2 * n_min} subjects, got {n}")
    if p < 1:
        raise InsufficientData("at least one covariate required")
    s_size = int(np.ceil(params.subsample * n))
    if s_size >= n and params.n_fold > 1:
        raise EmptyOob("subsample leaves no out-of-bag subjects; monitoring impossible")
    params.tree.resolved_mtry(p)

    marginal = tail_correct(
        npmle_fit(data.lefts, data.rights), data.has_unbounded(), tau=data.tau
    )
    if params.c_override is not None:
        h = float(params.c_override * n_min ** (-0.2))
    else:
        h = bandwidth(marginal, n_min, tau=data.tau)

    bound = support_bound_of(data.lefts, data.rights, data.tau)
    grid, m_split = build_grid(data, extra=[bound])
    mgrid = monitor_grid(data.tau)

    if params.initial_smooth:
        cov_eval = smooth_curve(refine_uniform(marginal), h, data.tau).eval
    else:
        # raw marginal consumed through within-interval interpolation
        cov_eval = marginal.interpolate
    base_rows = np.asarray(cov_eval(grid))[None, :]
    s_l, s_r = _endpoint_values_from_curve(cov_eval, data)

    folds: list[ForestFold] = []
    for k in range(1, params.n_fold + 1):
        carried = _carried_rows(base_rows, s_l, s_r, data, grid)
        ctx = FoldContext(
            X=data.X,
            lefts=data.lefts,
            rights=data.rights,
            tau=data.tau,
            grid=grid,
            m_split=m_split,
            values=carried,
            sw=swrs_scores(s_l, s_r),
            slr=slr_scores(s_l, s_r),
            support_bound=bound,
        )
        batches = [
            list(range(b0, min(b0 + TREE_BATCH, params.n_tree)))
            for b0 in range(0, params.n_tree, TREE_BATCH)
        ]
        jobs = [
            (ctx, params.tree, params.seed, k, b_list, s_size, h, mgrid,
             params.monitor_metric, params.update_curves)
            for b_list in batches
        ]
        if params.n_jobs > 1:
            with concurrent.futures.ProcessPoolExecutor(params.n_jobs) as pool:
                results = list(pool.map(_build_tree_batch, jobs))
        else:
            results = [_build_tree_batch(j) for j in jobs]
        results.sort(key=lambda r: r[0])

        trees: list[Tree] = []
        oob_errs: list[float] = []
        pred_sum = np.zeros((n, grid.size))
        oob_sum = np.zeros((n, grid.size)) if params.update_curves == "oob" else None
        oob_cnt = np.zeros(n) if params.update_curves == "oob" else None
        for _, batch_trees, batch_errs, psum, osum, ocnt in results:
            trees.extend(batch_trees)
            oob_errs.extend(batch_errs)
            pred_sum += psum
            if osum is not None:
                oob_sum += osum
                oob_cnt += ocnt
        folds.append(ForestFold(k, trees, np.asarray(oob_errs)))

        pred_rows = pred_sum / params.n_tree
        if params.update_curves == "oob":
            have = oob_cnt > 0
            rows = pred_rows.copy()
            rows[have] = oob_sum[have] / oob_cnt[have, None]
            pred_rows = rows
        base_rows = pred_rows
        s_l, s_r = _endpoint_values_from_rows(base_rows, data, grid)

    errors = np.asarray([f.oob_error for f in folds])
    k_opt = int(np.nanargmin(errors)) + 1
    return IcrfModel(
        params=params,
        feature_names=list(data.feature_names),
        tau=data.tau,
        h=h,
        initial_marginal=marginal,
        folds=folds,
        k_opt=k_opt,
    )


# -- prediction --------------------------------------------------------------


def _fold_leaf_rows(model: IcrfModel, fold: ForestFold, grid, smoothed: bool):
    """Per-tree matrices of leaf-curve values on ``grid``."""
    out = []
    for tree in fold.trees:
        if smoothed:
            atoms = [curve_atoms(refine_uniform(leaf.curve)) for leaf in tree.leaves]
            rows = smoothed_values_matrix(
                [a[0] for a in atoms], [a[1] for a in atoms], model.h, grid
            )
        else:
            rows = np.vstack([leaf.curve.interpolate(grid) for leaf in tree.leaves])
        out.append(rows)
    return out


def _check_fold(model: IcrfModel, fold: int | None) -> ForestFold:
    f = model.k_opt if fold is None else fold
    if not 1 <= f <= len(model.folds):
        raise InvalidFold(f"fold must be in 1..{len(model.folds)}, got {f}")
    return model.folds[f - 1]


def predict(model: IcrfModel, X, grid, fold: int | None = None, smoothed: bool = True) -> np.ndarray:
    """Survival values on ``grid`` for each query row of X: the
    equal-weight average of the routed (smoothed) leaf curves."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != len(model.feature_names):
        raise DimensionMismatch(
            f"query has {X.shape[1]} features, model expects {len(model.feature_names)}"
        )
    grid = np.asarray(grid, dtype=float)
    fobj = _check_fold(model, fold)
    acc = np.zeros((X.shape[0], grid.size))
    for tree, rows in zip(fobj.trees, _fold_leaf_rows(model, fobj, grid, smoothed)):
        acc += rows[tree.apply(X)]
    return acc / len(fobj.trees)


def oob_error(fold: ForestFold, data: Dataset, metric: str = "imse1", h: float = None) -> float:
    """Recompute the fold's OOB error from scratch (mean per-tree metric
    of the smoothed tree prediction on its own held-out subjects)."""
    from .tree import FoldContext as FC

    mgrid = monitor_grid(data.tau)
    ctx = FC(
        X=data.X, lefts=data.lefts, rights=data.rights, tau=data.tau,
        grid=np.asarray([data.tau]), m_split=1,
        values=np.ones((data.n, 1)), sw=np.zeros(data.n), slr=np.zeros(data.n),
    )
    errs = []
    for tree in fold.trees:
        oob = np.setdiff1d(np.arange(data.n), tree.inbag_ids)
        if oob.size == 0:
            raise EmptyOob("a tree has no out-of-bag subjects")
        errs.append(_tree_oob_error(tree, ctx, oob, h, mgrid, metric))
    return float(np.nanmean(errs))


# -- permutation variable importance -----------------------------------------


@dataclass(frozen=True)
class ImportanceResult:
    raw: np.ndarray
    rescaled: np.ndarray
    multiplier: float
    metric: str
    n_perm: int


def variable_importance(
    model: IcrfModel,
    data: Dataset,
    n_perm: int = 10,
    metric: str = "imse1",
    seed: int | None = None,
) -> ImportanceResult:
    """Mean increase in the metric when one covariate column is permuted
    across the sample, per feature; raw plus max-rescaled values."""
    if metric not in ("imse1", "imse2"):
        raise InsufficientData(f"unknown importance metric {metric!r}")
    fobj = _check_fold(model, None)
    grid = monitor_grid(model.tau)
    rows_by_tree = _fold_leaf_rows(model, fobj, grid, smoothed=True)
    n_tree = len(fobj.trees)

    def metric_of(X):
        acc = np.zeros((data.n, grid.size))
        for tree, rows in zip(fobj.trees, rows_by_tree):
            acc += rows[tree.apply(X)]
        acc /= n_tree
        fn = imse1_on_rows if metric == "imse1" else imse2_on_rows
        return fn(acc, data.lefts, data.rights, data.tau, grid)

    base = metric_of(data.X)
    entropy = model.params.seed if seed is None else seed
    rng = np.random.default_rng(np.random.SeedSequence([entropy, 0x1C8F]))
    p = data.p
    raw = np.zeros(p)
    for j in range(p):
        deltas = []
        for _ in range(n_perm):
            perm = rng.permutation(data.n)
            Xp = data.X.copy()
            Xp[:, j] = Xp[perm, j]
            deltas.append(metric_of(Xp) - base)
        raw[j] = float(np.mean(deltas))
    multiplier = float(raw.max())
    rescaled = raw / multiplier if multiplier != 0.0 else raw.copy()
    return ImportanceResult(raw, rescaled, multiplier, metric, n_perm)
