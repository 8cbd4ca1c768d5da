"""Error functionals: oracle errors against a known truth and the
data-only integrated squared errors IMSE1 / IMSE2."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import StepSurvival, IntervalObservation, uniform_interval_curve
from .exceptions import AllSkipped
from .smooth import SmoothedSurvival

DEFAULT_GRID_N = 1001
SMOOTH_SEG_N = 201  # per-segment trapezoid resolution for continuous curves


@dataclass(frozen=True)
class ErrorReport:
    metric: str
    value: float
    n: int
    per_subject: np.ndarray | None = None


def _oracle_grid(tau: float, grid_resolution: int) -> np.ndarray:
    if grid_resolution < 100:
        raise ValueError("grid_resolution must be >= 100")
    return np.linspace(0.0, tau, grid_resolution)


def eps_int(est_eval, truth_eval, x_set, tau: float, grid_resolution: int = DEFAULT_GRID_N) -> float:
    """Mean over x of trapezoid integral of |S0 - S_hat| on [0, tau].

    ``est_eval(x, grid)`` and ``truth_eval(x, grid)`` return survival
    values on the grid.
    """
    grid = _oracle_grid(tau, grid_resolution)
    vals = [
        np.trapezoid(np.abs(np.asarray(truth_eval(x, grid)) - np.asarray(est_eval(x, grid))), grid)
        for x in x_set
    ]
    return float(np.mean(vals))


def eps_sup(est_eval, truth_eval, x_set, tau: float, grid_resolution: int = DEFAULT_GRID_N) -> float:
    """Mean over x of the grid supremum of |S0 - S_hat| on [0, tau]."""
    grid = _oracle_grid(tau, grid_resolution)
    vals = [
        np.max(np.abs(np.asarray(truth_eval(x, grid)) - np.asarray(est_eval(x, grid))))
        for x in x_set
    ]
    return float(np.mean(vals))


# -- exact / generic segment integrals -------------------------------------


def _step_segments(curve: StepSurvival, lo: float, hi: float):
    """(start, end, value_at_start, tail_flag) pieces of a step curve on
    [lo, hi]; tail pieces are integrated in closed form."""
    cuts = curve.times[(curve.times > lo) & (curve.times < hi)]
    pts = np.concatenate(([lo], cuts, [hi]))
    last_t = curve.times[-1] if curve.times.size else 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        in_tail = curve.tail_rate is not None and a >= last_t
        yield a, b, float(curve.eval(a)), in_tail


def _integrate_sq(curve, lo: float, hi: float, one_minus: bool) -> float:
    """Integral of S^2 (or (1-S)^2) on [lo, hi]; exact for step curves."""
    if hi <= lo:
        return 0.0
    if isinstance(curve, StepSurvival):
        total = 0.0
        rate = curve.tail_rate or 0.0
        for a, b, va, in_tail in _step_segments(curve, lo, hi):
            width = b - a
            if not in_tail or rate == 0.0:
                total += ((1.0 - va) ** 2 if one_minus else va**2) * width
                continue
            # S(t) = va * exp(-rate (t - a)) on [a, b]
            e1 = (va / rate) * (1.0 - np.exp(-rate * width))
            e2 = (va**2 / (2 * rate)) * (1.0 - np.exp(-2 * rate * width))
            total += (width - 2 * e1 + e2) if one_minus else e2
        return total
    grid = np.linspace(lo, hi, SMOOTH_SEG_N)
    vals = np.asarray(curve.eval(grid))
    f = (1.0 - vals) ** 2 if one_minus else vals**2
    return float(np.trapezoid(f, grid))


def imse1_curve_terms(curve, left: float, right: float, tau: float):
    """(numerator, known-status length) of one subject's IMSE1 term."""
    lo_len = min(left, tau)
    hi_start = min(right, tau)
    length = tau - hi_start + lo_len
    if length <= 0.0:
        return None
    num = _integrate_sq(curve, 0.0, lo_len, one_minus=True) + _integrate_sq(
        curve, hi_start, tau, one_minus=False
    )
    return num, length


def imse1(predict, dataset, return_report: bool = False):
    """IMSE1: squared discrepancy from the known survival status, averaged
    over each subject's known-status region then over retained subjects.

    ``predict(x)`` returns a survival curve (step or smoothed). Subjects
    whose interval covers [0, tau] entirely are skipped.
    """
    per_subject = []
    for left, right, x in zip(dataset.lefts, dataset.rights, dataset.X):
        terms = imse1_curve_terms(predict(x), left, right, dataset.tau)
        if terms is None:
            continue
        num, length = terms
        per_subject.append(num / length)
    if not per_subject:
        raise AllSkipped("every subject has zero known-status length")
    per_subject = np.asarray(per_subject)
    value = float(per_subject.mean())
    if return_report:
        return ErrorReport("imse1", value, per_subject.size, per_subject)
    return value


def imse2(
    cov_predict,
    dataset,
    full_cond=None,
    grid_resolution: int = DEFAULT_GRID_N,
    return_report: bool = False,
):
    """IMSE2: mean over subjects of (1/tau) * int (S(t|X,I) - S(t|X))^2 dt.

    ``full_cond(x, interval)`` defaults to the conditional projection of
    ``cov_predict``'s curve onto the subject's interval.
    """
    tau = dataset.tau
    grid = np.linspace(0.0, tau, grid_resolution)
    per_subject = np.empty(dataset.n)
    for i, (left, right, x) in enumerate(zip(dataset.lefts, dataset.rights, dataset.X)):
        curve = cov_predict(x)
        v_cov = np.asarray(curve.eval(grid))
        obs = IntervalObservation(left, right)
        if full_cond is not None:
            cond = full_cond(x, obs)
            v_cond = np.asarray(cond.eval(grid))
        else:
            v_cond = _project_values(curve, v_cov, obs, grid, tau)
        per_subject[i] = np.trapezoid((v_cond - v_cov) ** 2, grid) / tau
    value = float(per_subject.mean())
    if return_report:
        return ErrorReport("imse2", value, dataset.n, per_subject)
    return value


def _project_values(curve, v_cov, obs, grid, tau) -> np.ndarray:
    """Pointwise conditional projection of curve values on a grid."""
    left, right = obs.left, obs.right
    s_l = 1.0 if left <= 0.0 else float(curve.eval(left))
    if np.isinf(right):
        if s_l <= 1e-12:
            return np.asarray(uniform_interval_curve(left, right, tau).eval(grid))
        out = np.minimum(v_cov / s_l, 1.0)
        out[grid <= left] = 1.0
        return out
    s_r = float(curve.eval(right))
    denom = s_l - s_r
    if denom <= 1e-12:
        return np.asarray(uniform_interval_curve(left, right, tau).interpolate(grid))
    out = np.clip((v_cov - s_r) / denom, 0.0, 1.0)
    out[grid <= left] = 1.0
    out[grid > right] = 0.0
    return out
