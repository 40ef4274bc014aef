import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featuredrift.adwin import Adwin


class BruteAdwin:
    """Reference detector: keeps every element and tests every split point."""

    def __init__(self, delta=0.002, min_window_length=5, grace_period=10):
        self.delta = delta
        self.min_len = min_window_length
        self.grace = grace_period
        self.window = []

    def _cut(self):
        w = np.array(self.window)
        n = len(w)
        if n <= self.min_len * 2:
            return False
        v = w.var()
        d = math.log(2.0 * math.log(n) / self.delta)
        n0 = np.arange(self.min_len, n - self.min_len + 1)
        n1 = n - n0
        head = np.cumsum(w)[n0 - 1]
        m = 1.0 / (n0 - self.min_len + 1) + 1.0 / (n1 - self.min_len + 1)
        eps = np.sqrt(2 * m * v * d) + 2.0 / 3.0 * d * m
        return bool(np.any(np.abs(head / n0 - (w.sum() - head) / n1) > eps))

    def update(self, x):
        self.window.append(float(x))
        changed = False
        if len(self.window) > self.grace:
            while self._cut():
                self.window.pop(0)
                changed = True
        return changed


def first_alarm(det, stream):
    for i, x in enumerate(stream):
        if det.update(x):
            return i
    return None


class TestStatistics:
    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(0, 20), min_size=1, max_size=200))
    def test_sums_exact_and_variance(self, values):
        det = Adwin(clock=1)
        for i, x in enumerate(values):
            det.update(x)
            retained = np.array(values[: i + 1][-det.width:], dtype=float)
            assert det.width == sum(det.bucket_counts())
            assert det.total == retained.sum()
            assert det.mean == pytest.approx(retained.mean(), rel=1e-12)
            assert det.variance == pytest.approx(retained.var() * det.width, rel=1e-9, abs=1e-9)

    def test_bucket_capacity(self):
        det = Adwin(max_buckets=5)
        for x in range(1000):
            det.update(x % 3)
        for lv in det.levels:
            assert len(lv.totals) <= 5

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Adwin().update(float("nan"))

    @pytest.mark.parametrize("kw", [{"delta": 0.0}, {"delta": 1.0}, {"max_buckets": 1}])
    def test_bad_parameters(self, kw):
        with pytest.raises(ValueError):
            Adwin(**kw)


class TestDetection:
    def test_constant_never_flags(self):
        det = Adwin(clock=1)
        assert first_alarm(det, [0.5] * 10_000) is None
        assert det.width == 10_000

    @pytest.mark.parametrize("clock", [1, 32])
    def test_alternating_never_flags(self, clock):
        stream = [i % 2 for i in range(5000)]
        assert first_alarm(Adwin(clock=clock), stream) is None

    def test_alternating_brute_force_oracle(self):
        stream = [i % 2 for i in range(300)]
        assert first_alarm(BruteAdwin(), stream) is None

    @pytest.mark.parametrize("seed", range(5))
    def test_bernoulli_shift_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        stream = np.r_[rng.random(1000) < 0.2, rng.random(400) < 0.8].astype(float)
        ours = first_alarm(Adwin(clock=1), stream)
        ref = first_alarm(BruteAdwin(), stream[:1300])
        assert ref is not None and 1000 <= ref < 1300
        assert ours is not None and 1000 <= ours < 1300

    def test_detection_shrinks_window_to_recent(self):
        det = Adwin(clock=1)
        for x in [0.0] * 500 + [1.0] * 200:
            det.update(x)
        assert det.width < 300
        assert det.mean > 0.9

    @pytest.mark.slow
    def test_stationary_false_alarms(self):
        counts = []
        for seed in range(30):
            rng = np.random.default_rng(seed)
            det = Adwin()
            counts.append(sum(det.update(x) for x in (rng.random(10_000) < 0.5).astype(float)))
        assert max(counts) <= 1
        assert np.median(counts) == 0
