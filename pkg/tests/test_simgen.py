"""Scenario generators, monitoring intervals, and the oracle truth."""

import numpy as np
import pytest
from scipy import stats

from icrf import Scenario, generate, intervals_from_monitoring, truth_eval
from icrf.exceptions import InvariantViolation
from icrf.simgen import (
    SCENARIO_P,
    draw_covariates,
    draw_failure_times,
    mu_bar,
    mu_of,
)


class TestIntervals:
    def test_bracketing_pair(self):
        assert intervals_from_monitoring(2.0, [1.0, 3.0, 4.0]) == (1.0, 3.0)

    def test_beyond_last_monitor(self):
        assert intervals_from_monitoring(5.0, [1.0, 2.0, 3.0]) == (3.0, np.inf)

    def test_current_status_left_side(self):
        assert intervals_from_monitoring(0.5, [1.0]) == (0.0, 1.0)

    def test_boundary_is_right_closed(self):
        # T == U: the interval (previous, U] contains T
        assert intervals_from_monitoring(2.0, [2.0, 4.0]) == (0.0, 2.0)


class TestTruth:
    def test_scenario1_closed_form_at_origin(self):
        x = np.zeros(25)
        t = np.array([0.0, 1.0, 2.0])
        want = np.exp(-t * np.exp(0.1))
        np.testing.assert_allclose(truth_eval(1, t, x), want, atol=1e-12)

    def test_scenario1_at_conditional_mean(self):
        x = np.zeros(25)
        mu = float(mu_of(1, x[None, :])[0])
        assert np.isclose(truth_eval(1, mu, x), np.exp(-1.0))

    def test_scenario3_gamma_shape_one_is_exponential(self):
        x = np.zeros(25)
        x[10:15] = 1.0 / 3.0  # sum 5/3 -> mu = 0.5 + 0.3*5/3 = 1
        t = np.linspace(0.0, 5.0, 7)
        np.testing.assert_allclose(truth_eval(3, t, x), np.exp(-t / 2.0), atol=1e-12)

    def test_scenario2_ranges(self):
        rng = np.random.default_rng(51)
        X = draw_covariates(2, 2000, rng)
        assert X.min() >= 0.0 and X.max() <= 1.0
        mu = mu_of(2, X)
        assert mu.min() > 0.0 and mu.max() <= 3.0

    def test_monotone_and_one_at_zero(self):
        rng = np.random.default_rng(52)
        t = np.linspace(0.0, 5.0, 400)
        for sc in range(1, 7):
            x = rng.standard_normal(SCENARIO_P[sc])
            if sc == 2:
                x = rng.uniform(size=10)
            vals = np.asarray(truth_eval(sc, t, x))
            assert vals[0] == 1.0
            assert np.all(np.diff(vals) <= 1e-12)

    def test_scenario6_survival_flat_on_gaps(self):
        x = np.zeros(25)
        # T never lies in (1/2, 3/4]: survival constant there
        a = truth_eval(6, 0.5, x)
        b = truth_eval(6, 0.74, x)
        assert np.isclose(a, b)

    def test_scenario6_matches_monte_carlo(self):
        x = np.zeros(25)
        mu = float(mu_of(6, x[None, :])[0])
        rng = np.random.default_rng(53)
        draws = draw_failure_times(6, np.full(1_000_000, mu), rng)
        for t in (0.3, 0.9, 1.4):  # continuity points
            p = float(np.mean(draws > t))
            want = float(truth_eval(6, t, x))
            se = np.sqrt(want * (1 - want) / draws.size)
            assert abs(p - want) < 3 * se + 1e-12


class TestGenerate:
    @pytest.mark.parametrize("sc", [1, 2, 3, 4, 5, 6])
    @pytest.mark.parametrize("m", [1, 3])
    def test_latent_time_in_interval(self, sc, m):
        sim = generate(Scenario(id=sc, n=200, M=m, seed=9))
        ds = sim.dataset
        assert ds.p == SCENARIO_P[sc]
        assert np.all(ds.lefts < sim.latent_times)
        assert np.all(sim.latent_times <= ds.rights)

    def test_seeded_reproducibility(self):
        a = generate(Scenario(id=1, n=50, M=1, seed=4))
        b = generate(Scenario(id=1, n=50, M=1, seed=4))
        np.testing.assert_array_equal(a.dataset.lefts, b.dataset.lefts)
        np.testing.assert_array_equal(a.dataset.X, b.dataset.X)
        c = generate(Scenario(id=1, n=50, M=1, seed=5))
        assert not np.array_equal(a.dataset.lefts, c.dataset.lefts)

    def test_mu_bar_is_cached_constant(self):
        assert mu_bar(1) == mu_bar(1)
        assert 1.0 < mu_bar(1) < 2.0  # near E[mu] for scenario 1

    def test_invalid_scenario(self):
        with pytest.raises(InvariantViolation):
            Scenario(id=7)

    @pytest.mark.parametrize("sc", [1, 2, 3, 4, 5, 6])
    def test_failure_law_matches_truth_small(self, sc):
        # small-scale distribution check; the full 1e5-draw KS gate lives
        # in the acceptance suite
        rng = np.random.default_rng(54)
        x = rng.standard_normal(SCENARIO_P[sc]) * 0.5
        if sc == 2:
            x = rng.uniform(size=10)
        mu = float(mu_of(sc, x[None, :])[0])
        draws = draw_failure_times(sc, np.full(20_000, mu), rng)
        cdf = lambda t: 1.0 - np.asarray(truth_eval(sc, t, x))
        d = stats.ks_1samp(draws, cdf).statistic
        assert d < 0.03
