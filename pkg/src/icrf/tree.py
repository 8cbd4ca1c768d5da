"""Modified extremely-randomized survival tree.

At each node, mtry features are drawn without replacement; each gets one
cut-off drawn uniformly from the open interval between its in-node min
and max; candidates whose children would fall below n_min are invalid;
the best-scoring valid candidate wins (first index on ties). A node is
terminal when its size is below 2*n_min, no valid candidate exists, or
every candidate scores zero.

Terminal prediction is either quasi-honest (NPMLE refit on the members'
raw intervals, tail-corrected) or exploitative (mean of the members'
carried full-conditional curves).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .curves import ConditionalCurveSet, StepSurvival
from .exceptions import DimensionMismatch, InsufficientData
from .npmle import npmle_fit, tail_correct
from .splits import (
    GLR,
    GWRS,
    SLR,
    SWRS,
    SplitRule,
    glr_from_sums,
    gwrs_from_sums,
    pooled_grid,
    slr_scores,
    swrs_scores,
    values_matrix,
)

QUASI_HONEST = "quasi_honest"
EXPLOITATIVE = "exploitative"

LEAF_MASS_TOL = 1e-15


@dataclass(frozen=True)
class TreeParams:
    mtry: int | None = None  # None -> ceil(sqrt(p))
    n_min: int = 6
    rule: SplitRule = field(default_factory=SplitRule)
    prediction: str = QUASI_HONEST
    rng_seed: int = 0

    def resolved_mtry(self, p: int) -> int:
        m = self.mtry if self.mtry is not None else int(np.ceil(np.sqrt(p)))
        if not 1 <= m <= p:
            raise InsufficientData(f"mtry must be in [1, {p}], got {m}")
        return m


@dataclass
class FoldContext:
    """Everything a tree needs, on one shared knot grid.

    ``values`` holds the carried full-conditional curves row-wise at
    ``grid``; columns [:m_split] are the knots <= tau with tau last.
    ``support_bound`` is the end of the observed time range; leaf NPMLEs
    confine right-unbounded intervals to it.
    """

    X: np.ndarray
    lefts: np.ndarray
    rights: np.ndarray
    tau: float
    grid: np.ndarray
    m_split: int
    values: np.ndarray
    sw: np.ndarray
    slr: np.ndarray
    support_bound: float = np.inf

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass
class Leaf:
    curve: StepSurvival
    member_ids: np.ndarray
    size: int


class Tree:
    """Array-backed binary tree; feature == -1 marks a leaf node."""

    def __init__(self, feature, cutoff, left, right, leaf_idx, leaves, inbag_ids):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.cutoff = np.asarray(cutoff, dtype=float)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.leaf_idx = np.asarray(leaf_idx, dtype=np.int32)
        self.leaves: list[Leaf] = leaves
        self.inbag_ids = np.asarray(inbag_ids, dtype=np.int64)

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for each row of X (x <= cutoff routes left)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        idx = np.zeros(X.shape[0], dtype=np.int32)
        active = self.feature[idx] >= 0
        while active.any():
            rows = np.nonzero(active)[0]
            nodes = idx[rows]
            go_left = X[rows, self.feature[nodes]] <= self.cutoff[nodes]
            idx[rows] = np.where(go_left, self.left[nodes], self.right[nodes])
            active[rows] = self.feature[idx[rows]] >= 0
        return self.leaf_idx[idx]


def _node_score(rule: SplitRule, ctx_arrays, mask: np.ndarray, counts) -> float:
    """Score of one candidate partition from cached node arrays."""
    kind = rule.kind
    n_left, n_right = counts
    if kind in (GWRS, GLR):
        vn, total = ctx_arrays
        left_sum = mask @ vn
        right_sum = total - left_sum
        if kind == GWRS:
            return abs(gwrs_from_sums(left_sum, n_left, right_sum, n_right) - 0.5)
        stat = glr_from_sums(left_sum, n_left, right_sum, n_right, sign=rule.glr_sign)
        return 0.0 if np.isnan(stat) else abs(stat)
    scores, total = ctx_arrays
    left_sum = mask @ scores
    return abs(left_sum / n_left - (total - left_sum) / n_right)


def _terminal_curve(ctx: FoldContext, members: np.ndarray, prediction: str) -> StepSurvival:
    if prediction == QUASI_HONEST:
        return terminal_predict_quasi_honest(
            ctx.lefts[members],
            ctx.rights[members],
            tau=ctx.tau,
            support_bound=ctx.support_bound,
        )
    mean = ctx.values[members].mean(axis=0)
    return curve_from_grid_values(ctx.grid, mean)


def curve_from_grid_values(grid: np.ndarray, vals: np.ndarray) -> StepSurvival:
    """Compress grid values to a step curve.

    Keeps the actual drops plus the flat knot preceding each drop, so
    the interval carrying each mass survives compression (flat stretches
    stay flat under within-interval interpolation)."""
    vals = np.minimum.accumulate(np.clip(vals, 0.0, 1.0))
    prev = np.concatenate(([1.0], vals[:-1]))
    drops = (prev - vals) > LEAF_MASS_TOL
    keep = drops.copy()
    keep[:-1] |= drops[1:]
    return StepSurvival(grid[keep], vals[keep])


def grow_tree_ctx(ctx: FoldContext, inbag: np.ndarray, params: TreeParams,
                  rng: np.random.Generator) -> Tree:
    """Grow one tree on the in-bag subjects (internal fast path)."""
    inbag = np.asarray(inbag, dtype=np.int64)
    n_min = params.n_min
    if inbag.size < n_min:
        raise InsufficientData(f"in-bag size {inbag.size} < n_min {n_min}")
    mtry = params.resolved_mtry(ctx.p)
    kind = params.rule.kind
    split_cols = slice(0, ctx.m_split)

    feature, cutoff, left, right, leaf_idx = [], [], [], [], []
    leaves: list[Leaf] = []

    def new_node():
        feature.append(-1)
        cutoff.append(np.nan)
        left.append(-1)
        right.append(-1)
        leaf_idx.append(-1)
        return len(feature) - 1

    def make_leaf(node_id, members):
        leaf_idx[node_id] = len(leaves)
        leaves.append(
            Leaf(
                curve=_terminal_curve(ctx, members, params.prediction),
                member_ids=members,
                size=members.size,
            )
        )

    root = new_node()
    stack = [(root, inbag)]
    while stack:
        node_id, members = stack.pop()
        size = members.size
        if size < 2 * n_min:
            make_leaf(node_id, members)
            continue

        xn = ctx.X[members]
        if kind in (GWRS, GLR):
            vn = ctx.values[members, split_cols]
            node_arrays = (vn, vn.sum(axis=0))
        else:
            scores = (ctx.sw if kind == SWRS else ctx.slr)[members]
            node_arrays = (scores, scores.sum())

        feats = rng.choice(ctx.p, size=mtry, replace=False)
        best = (0.0, None)  # (score, (f, c, mask))
        for f in feats:
            col = xn[:, f]
            lo, hi = col.min(), col.max()
            if not lo < hi:
                continue  # constant feature: empty open interval
            c = rng.uniform(lo, hi)
            mask = (col <= c).astype(float)
            n_left = int(mask.sum())
            if n_left < n_min or size - n_left < n_min:
                continue
            s = _node_score(params.rule, node_arrays, mask, (n_left, size - n_left))
            if s > best[0]:
                best = (s, (f, c, mask))

        if best[1] is None:
            make_leaf(node_id, members)
            continue
        f, c, mask = best[1]
        feature[node_id] = int(f)
        cutoff[node_id] = float(c)
        left_id = new_node()
        right_id = new_node()
        left[node_id] = left_id
        right[node_id] = right_id
        lmask = mask.astype(bool)
        # left child processed first (DFS), so push right first
        stack.append((right_id, members[~lmask]))
        stack.append((left_id, members[lmask]))

    return Tree(feature, cutoff, left, right, leaf_idx, leaves, inbag)


def support_bound_of(lefts, rights, tau: float) -> float:
    """End of the observed time range: max finite endpoint (and tau),
    strictly above every left endpoint."""
    lefts = np.asarray(lefts, dtype=float)
    rights = np.asarray(rights, dtype=float)
    finite = rights[np.isfinite(rights)]
    hi = max(float(tau), float(finite.max()) if finite.size else 0.0)
    max_l = float(lefts.max()) if lefts.size else 0.0
    return max(hi, max_l * (1.0 + 1e-9) + 1e-12)


def context_from_curves(data, carried, cov_curves=None, rule: SplitRule | None = None) -> FoldContext:
    """Build a FoldContext from explicit curve lists (public path)."""
    curves = carried.curves if isinstance(carried, ConditionalCurveSet) else list(carried)
    if len(curves) != data.n:
        raise DimensionMismatch("one carried curve per subject required")
    tau = data.tau
    full = np.unique(
        np.concatenate(
            [np.asarray([tau])] + [c.times[np.isfinite(c.times)] for c in curves]
        )
    )
    full = full[full > 0.0]
    m_split = int(np.searchsorted(full, tau, side="right"))
    values = values_matrix(curves, full)
    if cov_curves is not None:
        s_l = np.asarray(
            [1.0 if l <= 0 else float(c.eval(l)) for c, l in zip(cov_curves, data.lefts)]
        )
        s_r = np.asarray(
            [0.0 if np.isinf(r) else float(c.eval(r)) for c, r in zip(cov_curves, data.rights)]
        )
        sw = swrs_scores(s_l, s_r)
        slr = slr_scores(s_l, s_r)
    else:
        sw = np.zeros(data.n)
        slr = np.zeros(data.n)
    return FoldContext(
        X=data.X,
        lefts=data.lefts,
        rights=data.rights,
        tau=tau,
        grid=full,
        m_split=m_split,
        values=values,
        sw=sw,
        slr=slr,
        support_bound=support_bound_of(data.lefts, data.rights, tau),
    )


def grow_tree(data, carried, cov_curves, inbag, params: TreeParams) -> Tree:
    """Public entry point matching the module contract; wraps the fast path."""
    ctx = context_from_curves(data, carried, cov_curves, params.rule)
    rng = np.random.default_rng(np.random.SeedSequence(params.rng_seed))
    return grow_tree_ctx(ctx, np.asarray(inbag, dtype=np.int64), params, rng)


def terminal_predict_quasi_honest(
    lefts, rights, tau: float | None = None, support_bound: float | None = None
) -> StepSurvival:
    """NPMLE of the members' raw intervals.

    With ``support_bound`` (the forest path), right-unbounded intervals
    are confined to the observed time range before fitting and the final
    mass stays there; re-allocating a small node's large final mass
    exponentially over (a, inf) inflates the whole ensemble. Without it,
    the fit is on the raw intervals with the exponential tail correction.
    """
    lefts = np.asarray(lefts, dtype=float)
    rights = np.asarray(rights, dtype=float)
    if support_bound is not None:
        capped = np.minimum(rights, support_bound)
        if np.any(capped <= lefts):
            raise InsufficientData("support_bound must exceed every left endpoint")
        return npmle_fit(lefts, capped).curve
    fit = npmle_fit(lefts, rights)
    return tail_correct(fit, bool(np.any(np.isinf(rights))), tau=tau)


def terminal_predict_exploitative(member_curves) -> StepSurvival:
    """Equal-weight pointwise average of the members' carried curves."""
    from .curves import average_curves

    return average_curves(list(member_curves))


def tree_predict(tree: Tree, x, smoothed=None):
    """Route x to its leaf and return the leaf curve.

    ``smoothed`` may be a SmoothedSurvival factory (curve -> smoothed);
    None returns the raw step curve.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("tree_predict expects a single covariate vector")
    leaf = tree.leaves[int(tree.apply(x[None, :])[0])]
    if smoothed is None:
        return leaf.curve
    return smoothed(leaf.curve)
