import math
import warnings

import numpy as np
import pytest
from scipy.optimize import bisect

from isgd.timemodel import (ModelValidityWarning, SystemModel, iter_time, loss_after_time,
                            optimal_batch, time_curve, time_for_loss)


def bound_loss(t, n_b, c1, c2):
    """Loss bound after time t, composed directly from iteration cost and update count."""
    T = t / (n_b / c1 + c2)
    return 1 / math.sqrt(n_b * T) + 1 / T


def bisect_time(psi, n_b, c1, c2):
    """Bisection on the raw composition; loss decreases monotonically in t."""
    f = lambda t: bound_loss(t, n_b, c1, c2) - psi
    hi = 1.0
    while f(hi) > 0:
        hi *= 2
    return bisect(f, 1e-300, hi, xtol=1e-300, rtol=1e-15, maxiter=5000)


class TestIterTime:
    def test_unit_throughput(self):
        assert iter_time(1000, SystemModel(1000, 0)) == 1.0

    def test_substitution(self):
        assert iter_time(500, SystemModel(1000, 0.5)) == 1.0

    def test_sync_dominates_small_batch(self):
        assert iter_time(1e-12, SystemModel(1000, 0.3)) == pytest.approx(0.3)

    def test_invalid_system(self):
        with pytest.raises(ValueError):
            SystemModel(0, 0)
        with pytest.raises(ValueError):
            SystemModel(1, -1)


class TestLossAfterTime:
    def test_one_update_one_example(self):
        sys = SystemModel(1.0, 0.0)
        assert loss_after_time(1.0, 1, sys) == pytest.approx(2.0)

    def test_compositional(self):
        sys = SystemModel(1000, 0.1)
        t_iter = 100 / 1000 + 0.1
        T = 100 / t_iter
        assert loss_after_time(100, 100, sys) == pytest.approx(1 / math.sqrt(100 * T) + 1 / T,
                                                              rel=1e-15)

    def test_decreasing_in_time(self):
        sys = SystemModel(1000, 0.1)
        ts = np.linspace(1, 500, 200)
        psi = [loss_after_time(t, 64, sys) for t in ts]
        assert np.all(np.diff(psi) < 0)

    def test_outside_validity_warns(self):
        with pytest.warns(ModelValidityWarning):
            loss_after_time(0.1, 100, SystemModel(100, 1.0))
        with pytest.raises(ValueError):
            loss_after_time(0, 1, SystemModel(1, 0))


class TestTimeForLoss:
    def test_golden_ratio_case(self):
        t = time_for_loss(1.0, 1, SystemModel(1, 0))
        assert t == pytest.approx(((1 + math.sqrt(5)) / 2) ** 2, abs=1e-12)
        assert round(t, 6) == 2.618034

    def test_matches_bisection(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            psi = 10 ** rng.uniform(-3, 0.5)
            n_b = float(rng.integers(1, 5000))
            c1 = 10 ** rng.uniform(0, 4)
            c2 = rng.uniform(0, 2)
            t = time_for_loss(psi, n_b, SystemModel(c1, c2))
            ref = bisect_time(psi, n_b, c1, c2)
            assert abs(t - ref) <= 1e-9 * ref

    def test_vectorized(self):
        sys = SystemModel(2000, 0.05)
        grid = np.arange(1, 50)
        t = time_for_loss(0.1, grid, sys)
        assert t.shape == grid.shape
        assert t[10] == time_for_loss(0.1, 11, sys)

    def test_infinite_throughput_limit(self):
        ts = [time_for_loss(0.5, 10, SystemModel(c1, 0)) for c1 in (1e2, 1e4, 1e6, 1e8)]
        assert all(a > b for a, b in zip(ts, ts[1:]))
        assert ts[-1] < 1e-5

    def test_monotone_in_target(self):
        sys = SystemModel(1000, 0.1)
        psis = np.linspace(0.01, 1, 50)
        ts = [time_for_loss(p, 100, sys) for p in psis]
        assert np.all(np.diff(ts) <= 0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            time_for_loss(0, 1, SystemModel(1, 0))
        with pytest.raises(ValueError):
            time_for_loss(1, 0, SystemModel(1, 0))


class TestOptimalBatch:
    def test_zero_sync_picks_smallest(self):
        sys = SystemModel(1000, 0.0)
        grid, t = time_curve(0.05, sys, 1, 3000)
        assert np.all(np.diff(t) >= 0)
        assert optimal_batch(0.05, sys, 1, 3000)[0] == 1
        assert optimal_batch(0.05, sys, 17, 3000)[0] == 17

    def test_exhaustive_and_idempotent(self):
        sys = SystemModel(1500, 0.2)
        nb, t = optimal_batch(0.02, sys, 1, 3000)
        grid, ts = time_curve(0.02, sys, 1, 3000)
        assert t == ts.min() and nb == grid[np.argmin(ts)]
        assert optimal_batch(0.02, sys, 1, 3000) == (nb, t)

    def test_ties_go_to_smaller_batch(self, monkeypatch):
        import isgd.timemodel as tm
        monkeypatch.setattr(tm, "time_for_loss", lambda psi, nb, sys: np.ones_like(nb, dtype=float))
        assert tm.optimal_batch(0.1, SystemModel(1, 1), 5, 9)[0] == 5

    def test_faster_system_prefers_larger_batch(self):
        slow = SystemModel(1000, 0.5)
        fast = SystemModel(4000, 0.5)
        assert optimal_batch(0.01, fast)[0] >= optimal_batch(0.01, slow)[0]

    def test_bad_range(self):
        with pytest.raises(ValueError):
            optimal_batch(0.1, SystemModel(1, 1), 10, 5)
