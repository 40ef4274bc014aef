import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featuredrift.data import FEATURES, prepare
from featuredrift.drift import DriftScenario, inject_outlier_drift
from featuredrift.fde import (
    EmptyReferenceError,
    LatentReference,
    build_latent_reference,
    channel_losses,
    channel_reconstruction_diff,
    counterfactual_replace,
    localize_drift,
    median_representative,
    minkowski_mean_distance,
)
from featuredrift.models import Autoencoder, Regressor, train_autoencoder, train_regressor
from featuredrift.nn import TrainConfig
from featuredrift.synthetic import SyntheticSpec, generate_synthetic


def brute_mean_distance(l, ref, r):
    return np.mean([sum(abs(a - b) ** r for a, b in zip(row, l)) ** (1.0 / r) for row in ref])


@pytest.fixture(scope="module")
def trained():
    prep = prepare(generate_synthetic(SyntheticSpec(length=1500, seed=1)), target="target")
    train, test = prep.standardized("train"), prep.standardized("test")
    cfg = TrainConfig(lr=3e-3, max_epochs=25, patience=8)
    reg, _ = train_regressor(train.inputs, train.targets, config=cfg, seed=0)
    acts = reg.capture_activations(train.inputs)
    ae, _ = train_autoencoder(acts, config=cfg, seed=0)
    ref = build_latent_reference(reg, ae, train.inputs)
    return reg, ae, ref, train, test


class TestMinkowski:
    def test_three_four_five(self):
        assert minkowski_mean_distance([3.0, 4.0], [[0.0, 0.0]], 2) == 5.0

    def test_singleton_identical(self):
        assert minkowski_mean_distance([1.5, -2.0], [[1.5, -2.0]]) == 0.0

    def test_manhattan_mean(self):
        assert minkowski_mean_distance([1.0, 0.0], [[0.0, 0.0], [2.0, 0.0]], 1) == 1.0

    def test_empty_reference(self):
        with pytest.raises(EmptyReferenceError):
            minkowski_mean_distance([1.0], np.zeros((0, 1)))

    def test_order_below_one(self):
        with pytest.raises(ValueError):
            minkowski_mean_distance([1.0], [[0.0]], 0.5)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            minkowski_mean_distance([1.0, 2.0], [[0.0, 0.0, 0.0]])

    @settings(max_examples=50)
    @given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 12), st.sampled_from([1.0, 2.0, 3.0, 1.5]))
    def test_brute_force(self, seed, p, n, r):
        rng = np.random.default_rng(seed)
        ref = rng.normal(size=(n, p))
        lat = rng.normal(size=(3, p))
        got = minkowski_mean_distance(lat, ref, r, chunk=2)
        np.testing.assert_allclose(got, [brute_mean_distance(l, ref, r) for l in lat], rtol=1e-12)
        assert np.all(got >= 0)

    @settings(max_examples=50)
    @given(st.integers(0, 10_000))
    def test_singleton_equals_euclidean_norm(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=16) * rng.uniform(0.01, 100), rng.normal(size=16)
        assert minkowski_mean_distance(a, b[None]) == np.linalg.norm(a - b, axis=-1)

    def test_zero_only_if_equal_to_all(self):
        assert minkowski_mean_distance([0.0, 0.0], [[0.0, 0.0], [0.0, 1e-9]]) > 0


class TestCounterfactual:
    def test_fixed_point(self):
        w = np.random.default_rng(0).normal(size=(5, 5))
        w[:, 2] = 0.0
        np.testing.assert_array_equal(counterfactual_replace(w, 2, np.zeros(5)), w)

    def test_drifted_column_reset(self):
        w = np.random.default_rng(1).normal(size=(5, 5))
        w[:, 0] = 2.0
        out = counterfactual_replace(w, 0, np.zeros(5))
        assert np.all(out[:, 0] == 0.0)
        np.testing.assert_array_equal(out[:, 1:], w[:, 1:])

    @given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 1000))
    def test_commutes(self, q1, q2, seed):
        rng = np.random.default_rng(seed)
        w, rep = rng.normal(size=(5, 5)), rng.normal(size=5)
        a = counterfactual_replace(counterfactual_replace(w, q1, rep), q2, rep)
        b = counterfactual_replace(counterfactual_replace(w, q2, rep), q1, rep)
        np.testing.assert_array_equal(a, b)
        other = [i for i in range(5) if i not in (q1, q2)]
        np.testing.assert_array_equal(a[:, other], w[:, other])

    def test_bad_feature(self):
        with pytest.raises(IndexError):
            counterfactual_replace(np.zeros((5, 5)), 5, np.zeros(5))

    def test_median_representative(self):
        x = np.arange(50.0).reshape(2, 5, 5)
        np.testing.assert_array_equal(median_representative(x), np.median(x.reshape(-1, 5), axis=0))


class TestReference:
    def test_size_and_dim(self, trained):
        reg, ae, ref, train, _ = trained
        assert len(ref) == len(train) == ref.n_source
        assert ref.p == 16
        np.testing.assert_array_equal(ref.representative, np.zeros(5))

    def test_duplicates(self):
        reg, ae = Regressor(seed=1), Autoencoder(seed=1)
        w = np.random.default_rng(0).normal(size=(5, 5))
        ref = build_latent_reference(reg, ae, np.stack([w, w]))
        np.testing.assert_array_equal(ref.latents[0], ref.latents[1])

    def test_empty(self):
        with pytest.raises(EmptyReferenceError):
            build_latent_reference(Regressor(), Autoencoder(), np.zeros((0, 5, 5)))

    def test_cap_is_seeded(self):
        reg, ae = Regressor(seed=1), Autoencoder(seed=1)
        x = np.random.default_rng(0).normal(size=(40, 5, 5))
        a = build_latent_reference(reg, ae, x, max_size=10, seed=3)
        b = build_latent_reference(reg, ae, x, max_size=10, seed=3)
        assert len(a) == 10 and a.n_source == 40
        np.testing.assert_array_equal(a.latents, b.latents)


class TestLocalize:
    def test_drifted_f1_found(self, trained):
        reg, ae, ref, _, test = trained
        drifted = inject_outlier_drift(test.inputs, DriftScenario("co2"))
        report = localize_drift(drifted[:120], ref, reg, ae)
        assert report.predicted == "co2"
        assert report.accuracy("co2") > 0.5
        assert sorted(report.ranking) == sorted(FEATURES)
        assert report.votes.sum() == 120

    def test_permutation_invariance(self, trained):
        reg, ae, ref, _, test = trained
        drifted = inject_outlier_drift(test.inputs[:60], DriftScenario("temperature"))
        base = localize_drift(drifted, ref, reg, ae)
        perm = np.random.default_rng(0).permutation(len(ref))
        shuffled_ref = LatentReference(ref.latents[perm], ref.representative, ref.features, ref.n_source)
        wperm = np.random.default_rng(1).permutation(len(drifted))
        other = localize_drift(drifted[wperm], shuffled_ref, reg, ae)
        np.testing.assert_allclose(other.scores, base.scores[wperm], rtol=1e-12)
        np.testing.assert_array_equal(other.winners, base.winners[wperm])
        assert other.predicted == base.predicted

    def test_tie_break_by_mean_distance(self, monkeypatch):
        from featuredrift import fde

        class Fixed:
            features = FEATURES

        scores = np.array([[1.0, 2.0, 3, 3, 3], [2.0, 1.0, 3, 3, 3], [1.5, 2.0, 3, 3, 3], [2.0, 1.2, 3, 3, 3]])
        monkeypatch.setattr(fde, "score_windows", lambda *a, **k: scores)
        report = localize_drift(np.zeros((4, 5, 5)), Fixed(), None, None)
        # co2 and temperature both win 2 windows; temperature has the smaller mean distance
        assert list(report.votes[:2]) == [2, 2]
        assert report.predicted == "temperature"

    def test_empty_section(self, trained):
        reg, ae, ref, _, _ = trained
        with pytest.raises(ValueError):
            localize_drift(np.zeros((0, 5, 5)), ref, reg, ae)

    def test_report_serializes(self, trained):
        reg, ae, ref, _, test = trained
        report = localize_drift(test.inputs[:3], ref, reg, ae, window_indices=[10, 11, 12])
        d = report.to_dict()
        assert [w["window_index"] for w in d["per_window"]] == [10, 11, 12]
        assert {s["rank"] for s in d["feature_scores"]} == {1, 2, 3, 4, 5}
        assert len(list(report.distance_rows())) == 15


class TestChannels:
    def test_equal_sets_zero(self, trained):
        reg, ae, _, train, _ = trained
        acts = reg.capture_activations(train.inputs[:50])
        for c in channel_reconstruction_diff(ae, acts, acts):
            assert c["undefined"] or c["pct_diff"] == 0.0

    def test_plus_hundred_percent(self):
        class Stub:
            def reconstruct(self, a):
                return np.zeros_like(a)

        normal = np.full((1, 160), np.sqrt(0.001))
        drift = np.full((1, 160), np.sqrt(0.002))
        out = channel_reconstruction_diff(Stub(), normal, drift)
        assert len(out) == 32
        assert all(c["pct_diff"] == pytest.approx(100.0) for c in out)

    def test_undefined_sentinel(self):
        class Stub:
            def reconstruct(self, a):
                return np.zeros_like(a)

        normal = np.zeros((2, 160))
        normal[:, 5::32] = 1.0  # only channel 5 has loss
        out = channel_reconstruction_diff(Stub(), normal, np.ones((2, 160)))
        assert out[5]["undefined"] is False
        assert out[0]["undefined"] is True and out[0]["pct_diff"] is None

    def test_partition_consistency(self, trained):
        reg, ae, _, _, test = trained
        acts = reg.capture_activations(test.inputs[:40])
        per_channel = channel_losses(ae, acts)
        total = np.mean((ae.reconstruct(acts) - acts) ** 2)
        assert per_channel.shape == (32,)
        assert per_channel.mean() == pytest.approx(total, rel=1e-12)

    def test_empty_sets(self, trained):
        _, ae, _, _, _ = trained
        with pytest.raises(ValueError):
            channel_reconstruction_diff(ae, np.zeros((0, 160)), np.zeros((1, 160)))


@pytest.mark.slow
def test_no_op_section_has_no_dominant_feature():
    """Training windows presented as 'drifting' should not favour any feature."""
    shares = []
    prep = prepare(generate_synthetic(SyntheticSpec(length=1500, seed=2)), target="target")
    train = prep.standardized("train")
    for seed in range(3):
        cfg = TrainConfig(lr=3e-3, max_epochs=15, patience=5)
        reg, _ = train_regressor(train.inputs, train.targets, config=cfg, seed=seed)
        ae, _ = train_autoencoder(reg.capture_activations(train.inputs), config=cfg, seed=seed)
        ref = build_latent_reference(reg, ae, train.inputs)
        pick = np.random.default_rng(seed).choice(len(train), 200, replace=False)
        report = localize_drift(train.inputs[pick], ref, reg, ae)
        shares.append(report.votes.max() / report.votes.sum())
    assert max(shares) <= 0.5, shares


def test_all_feature_pairs_commute_exhaustively():
    w = np.arange(25.0).reshape(5, 5)
    rep = -np.arange(5.0)
    for q1, q2 in itertools.product(range(5), repeat=2):
        a = counterfactual_replace(counterfactual_replace(w, q1, rep), q2, rep)
        b = counterfactual_replace(counterfactual_replace(w, q2, rep), q1, rep)
        np.testing.assert_array_equal(a, b)
