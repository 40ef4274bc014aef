import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featuredrift.data import FEATURES, Scaler
from featuredrift.drift import (
    DriftScenario,
    ScenarioError,
    alarms_to_frame,
    batch_errors,
    detect,
    inject_outlier_drift,
    load_scenarios,
    segment_stream,
)


def raw_windows(n=20, seed=0):
    s = Scaler.from_reference_stats()
    rng = np.random.default_rng(seed)
    return s, s.mean + s.std * rng.normal(size=(n, 5, 5))


class TestScenario:
    def test_unknown_feature(self):
        with pytest.raises(ScenarioError):
            DriftScenario("light")

    @pytest.mark.parametrize("mag", [0.0, float("inf"), float("nan")])
    def test_bad_magnitude(self, mag):
        with pytest.raises(ScenarioError):
            DriftScenario("co2", magnitude=mag)

    def test_load_names_and_dicts(self):
        out = load_scenarios(["pir", {"feature": "co2", "magnitude": -2.0}])
        assert out[0] == DriftScenario("pir")
        assert out[1].magnitude == -2.0


class TestInjection:
    def test_temperature_raw(self):
        scaler, x = raw_windows()
        out = inject_outlier_drift(x, DriftScenario("temperature"), scaler)
        np.testing.assert_allclose(out[:, :, FEATURES.index("temperature")], 24.86, atol=1e-12)

    def test_humidity_standardized(self):
        x = np.random.default_rng(0).normal(size=(10, 5, 5))
        out = inject_outlier_drift(x, DriftScenario("humidity"))
        assert np.all(out[:, :, FEATURES.index("humidity")] == 2.0)

    def test_negative_sign(self):
        x = np.zeros((3, 5, 5))
        out = inject_outlier_drift(x, DriftScenario("co2", magnitude=-2.0))
        assert np.all(out[:, :, 0] == -2.0)

    def test_onset_last_window(self):
        x = np.random.default_rng(1).normal(size=(8, 5, 5))
        out = inject_outlier_drift(x, DriftScenario("pressure", onset=7))
        np.testing.assert_array_equal(out[:7], x[:7])
        assert np.all(out[7, :, FEATURES.index("pressure")] == 2.0)

    def test_onset_outside_stream(self):
        with pytest.raises(ScenarioError):
            inject_outlier_drift(np.zeros((4, 5, 5)), DriftScenario("co2", onset=4))

    def test_input_untouched(self):
        x = np.random.default_rng(2).normal(size=(4, 5, 5))
        before = x.copy()
        inject_outlier_drift(x, DriftScenario("co2"))
        np.testing.assert_array_equal(x, before)

    def test_noise_is_seeded(self):
        x = np.zeros((6, 5, 5))
        a = inject_outlier_drift(x, DriftScenario("co2", noise=0.1, seed=3))
        b = inject_outlier_drift(x, DriftScenario("co2", noise=0.1, seed=3))
        np.testing.assert_array_equal(a, b)
        assert a[:, :, 0].std() > 0

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(FEATURES), st.integers(0, 19), st.floats(-4, 4).filter(lambda k: abs(k) > 1e-3),
           st.integers(0, 100))
    def test_locality_and_idempotence(self, feature, onset, k, seed):
        scaler, x = raw_windows(seed=seed)
        sc = DriftScenario(feature, onset=onset, magnitude=k)
        once = inject_outlier_drift(x, sc, scaler)
        q = FEATURES.index(feature)
        keep = [i for i in range(5) if i != q]
        np.testing.assert_array_equal(once[:, :, keep], x[:, :, keep])
        np.testing.assert_array_equal(once[:onset], x[:onset])
        np.testing.assert_array_equal(inject_outlier_drift(once, sc, scaler), once)


class TestErrorStream:
    def test_batch_mae(self):
        pred = np.array([1, 2, 3, 4, 5, 6, 7.0])
        np.testing.assert_allclose(batch_errors(pred, np.zeros(7), 5), [3.0, 6.5])

    def test_nonnegative(self):
        rng = np.random.default_rng(0)
        assert np.all(batch_errors(rng.normal(size=50), rng.normal(size=50)) >= 0)

    def test_empty(self):
        assert len(batch_errors([], [])) == 0

    def test_detect_logs_window_index(self):
        rng = np.random.default_rng(4)
        stream = np.r_[0.1 + 0.02 * rng.random(100), 1.0 + 0.02 * rng.random(60)]
        alarms = detect(stream, batch_size=5, clock=1)
        assert alarms
        first = alarms[0]
        assert 100 <= first.batch_index < 130
        assert first.window_index == 5 * first.batch_index
        assert first.detector_mean_after > first.detector_mean_before
        df = alarms_to_frame(alarms)
        assert list(df.columns) == ["batch_index", "window_index", "detector_mean_before", "detector_mean_after"]

    def test_flat_stream_no_alarm(self):
        assert detect(np.full(200, 0.3), clock=1) == []
        assert len(alarms_to_frame([])) == 0


class TestSegment:
    def test_no_alarms(self):
        normal, drifting = segment_stream(50, [])
        assert normal == [range(0, 50)] and drifting == []

    def test_one_alarm_at_batch(self):
        normal, drifting = segment_stream(50, [5 * 4])
        assert normal == [range(0, 20)]
        assert drifting == [range(20, 50)]

    def test_alarm_at_start(self):
        normal, drifting = segment_stream(50, [0])
        assert normal == [range(0, 0)]
        assert drifting == [range(0, 50)]

    @given(st.integers(1, 200), st.lists(st.integers(0, 250), max_size=8))
    def test_contiguous_partition(self, n, alarms):
        normal, drifting = segment_stream(n, sorted(alarms))
        covered = [i for r in normal + drifting for i in r]
        assert covered == list(range(n))
