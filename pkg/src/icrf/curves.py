"""Step survival curves and the full-conditional projection.

A step survival curve is stored as its jump knots: strictly increasing
times with the curve value *at and after* each knot (right-continuous).
Before the first knot the curve is 1. An optional exponential tail,
``values[-1] * exp(-tail_rate * (t - times[-1]))``, extends the curve
beyond the last knot; without it the curve stays flat there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateInterval, InvariantViolation

EPS_MASS = 1e-12

# knot count used when a degenerate projection falls back to the
# uniform-on-(L, R] curve; a step curve cannot be literally uniform
UNIFORM_FALLBACK_KNOTS = 16


@dataclass(frozen=True)
class IntervalObservation:
    """One subject's censoring interval (left, right] plus covariates."""

    left: float
    right: float
    covariates: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        if not (self.left >= 0.0):
            raise InvariantViolation(f"left endpoint must be >= 0, got {self.left}")
        if not (self.left < self.right):
            raise InvariantViolation(
                f"interval must satisfy left < right, got ({self.left}, {self.right}]"
            )
        if np.isinf(self.left):
            raise InvariantViolation("left endpoint must be finite")
        object.__setattr__(
            self, "covariates", np.asarray(self.covariates, dtype=float)
        )


@dataclass(frozen=True)
class StepSurvival:
    """Right-continuous, non-increasing step survival function."""

    times: np.ndarray
    values: np.ndarray
    tail_rate: float | None = None

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if times.shape != values.shape or times.ndim != 1:
            raise InvariantViolation("times and values must be 1-d and equal length")
        if times.size:
            if not np.all(np.isfinite(times)) or times[0] <= 0.0:
                raise InvariantViolation("jump times must be finite and > 0")
            if np.any(np.diff(times) <= 0.0):
                raise InvariantViolation("jump times must be strictly increasing")
            if np.any(values < -1e-12) or np.any(values > 1.0 + 1e-12):
                raise InvariantViolation("values must lie in [0, 1]")
            if np.any(np.diff(values) > 1e-12):
                raise InvariantViolation("values must be non-increasing")
            values = np.clip(values, 0.0, 1.0)
        if self.tail_rate is not None and not (self.tail_rate >= 0.0):
            raise InvariantViolation("tail_rate must be >= 0")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    # -- evaluation ---------------------------------------------------

    def eval(self, t) -> np.ndarray | float:
        """Right-continuous value S(t)."""
        return self._eval(t, side="right")

    def eval_left(self, t) -> np.ndarray | float:
        """Left limit S(t-)."""
        return self._eval(t, side="left")

    def eval_check(self, t) -> np.ndarray | float:
        """The half-mass-shifted value 0.5*S(t) + 0.5*S(t-)."""
        return 0.5 * (self.eval(t) + self.eval_left(t))

    def _eval(self, t, side):
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        if self.times.size == 0:
            out = np.ones_like(t_arr)
            if self.tail_rate is not None:
                out = np.exp(-self.tail_rate * np.maximum(t_arr, 0.0))
        else:
            idx = np.searchsorted(self.times, t_arr, side=side) - 1
            out = np.where(idx < 0, 1.0, self.values[np.clip(idx, 0, None)])
            if self.tail_rate is not None:
                last_t, last_v = self.times[-1], self.values[-1]
                beyond = t_arr > last_t
                if np.any(beyond):
                    out = np.where(
                        beyond,
                        last_v * np.exp(-self.tail_rate * (t_arr - last_t)),
                        out,
                    )
        return float(out[0]) if scalar else out

    def jump_masses(self) -> np.ndarray:
        """Probability mass dropped at each knot (>= 0, excludes the tail)."""
        if self.times.size == 0:
            return np.empty(0)
        prev = np.concatenate(([1.0], self.values[:-1]))
        return prev - self.values

    def interpolate(self, grid) -> np.ndarray:
        """Within-interval uniform (piecewise-linear) interpolation.

        Linear between consecutive knots starting from (0, 1); pinned to
        the step values at the knots; exponential beyond the last knot
        when a tail is present, flat otherwise.
        """
        grid = np.atleast_1d(np.asarray(grid, dtype=float))
        if self.times.size == 0:
            return self.eval(grid)
        xs = np.concatenate(([0.0], self.times))
        ys = np.concatenate(([1.0], self.values))
        out = np.interp(grid, xs, ys)
        beyond = grid > self.times[-1]
        if np.any(beyond):
            out = np.where(beyond, self.eval(grid), out)
        return out

    def quantile(self, q: float) -> float:
        """inf{t : S(t) <= q}; may be +inf for defective curves."""
        hit = np.nonzero(self.values <= q)[0]
        if hit.size:
            return float(self.times[hit[0]])
        if self.tail_rate is not None and self.tail_rate > 0.0:
            last_t = self.times[-1] if self.times.size else 0.0
            last_v = self.values[-1] if self.times.size else 1.0
            if last_v > 0.0:
                return float(last_t + np.log(last_v / q) / self.tail_rate)
        return np.inf

    def mass_beyond_knots(self) -> float:
        """Mass not dropped at any knot (tail and/or defect)."""
        return float(self.values[-1]) if self.times.size else 1.0


def constant_curve() -> StepSurvival:
    """The curve S == 1 (no jumps)."""
    return StepSurvival(np.empty(0), np.empty(0))


@dataclass(frozen=True)
class ConditionalCurveSet:
    """Per-subject full-conditional curves carried between recursion folds."""

    curves: list
    fold_index: int = 0

    def __post_init__(self):
        if self.fold_index < 0:
            raise InvariantViolation("fold_index must be >= 0")


def uniform_interval_curve(
    left: float, right: float, tau: float, n_knots: int = UNIFORM_FALLBACK_KNOTS
) -> StepSurvival:
    """Fallback full-conditional curve when projection is degenerate.

    Uniform mass on (left, right & tau] discretized into ``n_knots`` equal
    steps; for right = +inf, exponential on (left, inf) with rate 1/tau.
    """
    if np.isinf(right):
        if left <= 0.0:
            return StepSurvival(np.empty(0), np.empty(0), tail_rate=1.0 / tau)
        return StepSurvival([left], [1.0], tail_rate=1.0 / tau)
    hi = min(right, tau) if right > tau else right
    if hi <= left:
        hi = right  # interval entirely beyond tau; keep it
    ts = np.linspace(left, hi, n_knots + 1)
    vs = np.linspace(1.0, 0.0, n_knots + 1)
    if left <= 0.0:
        ts, vs = ts[1:], vs[1:]
    return StepSurvival(ts, vs)


def conditional_project(
    s_x: StepSurvival, interval: IntervalObservation, grid=None
) -> StepSurvival:
    """Project a covariate-conditional curve onto a censoring interval.

    Returns S(t | X, I): 1 on [0, L], clipped renormalization of s_x on
    (L, R], 0 beyond finite R. Knots are s_x's knots inside (L, R) plus
    L and R themselves (plus ``grid`` points, for continuous inputs).

    Raises DegenerateInterval when s_x carries no mass on (L, R].
    """
    left, right = interval.left, interval.right
    knots = np.asarray(s_x.times, dtype=float)
    if grid is not None:
        knots = np.union1d(knots, np.asarray(grid, dtype=float))
    s_left = float(s_x.eval(left)) if left > 0.0 else 1.0

    if np.isinf(right):
        if s_left <= EPS_MASS:
            raise DegenerateInterval(
                f"no mass on ({left}, inf): S(L)={s_left:.3e}"
            )
        inner = knots[knots > left]
        ts = np.concatenate(([left], inner)) if left > 0.0 else inner
        if ts.size == 0:
            return StepSurvival(np.empty(0), np.empty(0), tail_rate=s_x.tail_rate)
        vs = np.minimum(np.asarray(s_x.eval(ts)) / s_left, 1.0)
        vs = np.maximum.accumulate(vs[::-1])[::-1]  # guard fp monotonicity
        return StepSurvival(ts, vs, tail_rate=s_x.tail_rate)

    s_right = float(s_x.eval(right))
    denom = s_left - s_right
    if denom <= EPS_MASS:
        raise DegenerateInterval(
            f"no mass on ({left}, {right}]: S(L)-S(R)={denom:.3e}"
        )
    inner = knots[(knots > left) & (knots < right)]
    ts = np.concatenate(([left], inner, [right])) if left > 0.0 else np.concatenate((inner, [right]))
    vs = np.clip((np.asarray(s_x.eval(ts)) - s_right) / denom, 0.0, 1.0)
    if left > 0.0:
        vs[0] = 1.0
    vs[-1] = 0.0
    vs = np.maximum.accumulate(vs[::-1])[::-1]
    return StepSurvival(ts, vs)


def project_or_fallback(
    s_x: StepSurvival, interval: IntervalObservation, tau: float, grid=None
) -> StepSurvival:
    """conditional_project with the documented degenerate-interval fallback."""
    try:
        return conditional_project(s_x, interval, grid=grid)
    except DegenerateInterval:
        return uniform_interval_curve(interval.left, interval.right, tau)


def refine_uniform(curve: StepSurvival, per_gap: int = 8) -> StepSurvival:
    """Re-discretize each probability mass uniformly over its interval.

    The mass dropping at knot t_j is spread over (t_{j-1}, t_j] (with
    t_0 = 0) in ``per_gap`` equal sub-drops, matching the piecewise-linear
    ``interpolate`` reading of the curve. Zero-jump marker knots keep
    genuinely flat stretches flat. Used before kernel smoothing so that
    wide-interval masses are not treated as right-endpoint atoms.
    """
    if curve.times.size == 0:
        return curve
    masses = curve.jump_masses()
    prev = np.concatenate(([0.0], curve.times[:-1]))
    ts, vs = [], []
    level = 1.0
    eps = np.finfo(float).eps
    for j in range(curve.times.size):
        t0, t1, m = prev[j], curve.times[j], masses[j]
        too_narrow = (t1 - t0) <= 4 * per_gap * eps * max(t1, 1.0)
        if m <= 0.0 or too_narrow:
            level = float(curve.values[j])
            ts.append(t1)
            vs.append(level)
            continue
        sub = np.linspace(t0, t1, per_gap + 1)[1:]
        drops = np.full(per_gap, m / per_gap)
        for t, d in zip(sub, drops):
            level -= d
            ts.append(t)
            vs.append(level)
        level = float(curve.values[j])
        vs[-1] = level  # pin the endpoint exactly
    return StepSurvival(np.asarray(ts), np.asarray(vs), tail_rate=curve.tail_rate)


def average_curves(curves, weights=None) -> StepSurvival:
    """Pointwise (convex) average of step curves on the union of knots.

    Exact at every knot of every input; beyond the last knot the average
    plateaus at the mean of the inputs' own extensions there.
    """
    if len(curves) == 0:
        raise InvariantViolation("cannot average zero curves")
    if weights is None:
        weights = np.full(len(curves), 1.0 / len(curves))
    else:
        weights = np.asarray(weights, dtype=float)
        weights = weights / weights.sum()
    knots = np.unique(np.concatenate([c.times for c in curves]))
    if knots.size == 0:
        return constant_curve()
    acc = np.zeros_like(knots)
    for w, c in zip(weights, curves):
        acc += w * np.asarray(c.eval(knots))
    acc = np.maximum.accumulate(acc[::-1])[::-1]
    return StepSurvival(knots, np.clip(acc, 0.0, 1.0))
