"""Drifting-feature localization in the autoencoder's latent space.

Each feature of a drifting window is swapped, one at a time, for the
training representative value; the modified window goes through the
regressor's first layer and the encoder, and the swap whose latent lands
closest on average to the stored training latents names the drifting feature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import FEATURES
from .models import Autoencoder, Regressor


class EmptyReferenceError(ValueError):
    pass


@dataclass
class LatentReference:
    latents: np.ndarray  # (N, p)
    representative: np.ndarray  # (F,) standardised replacement values
    features: tuple[str, ...] = FEATURES
    n_source: int = 0  # training windows before any subsampling

    @property
    def p(self) -> int:
        return self.latents.shape[1]

    def __len__(self):
        return len(self.latents)


def build_latent_reference(regressor: Regressor, ae: Autoencoder, train_inputs,
                           representative=None, max_size: int | None = 5000, seed: int = 0,
                           features=FEATURES) -> LatentReference:
    """Encode every training window's first-layer activation.

    ``representative`` defaults to zeros (the training mean in standardised
    space). With more than ``max_size`` windows a seeded uniform subsample is kept.
    """
    x = np.asarray(train_inputs, dtype=np.float64)
    if len(x) == 0:
        raise EmptyReferenceError("latent reference needs at least one training window")
    if max_size is not None and len(x) > max_size:
        keep = np.sort(np.random.default_rng(seed).choice(len(x), size=max_size, replace=False))
        x_used = x[keep]
    else:
        x_used = x
    latents = ae.encode(regressor.capture_activations(x_used))
    rep = np.zeros(x.shape[-1]) if representative is None else np.asarray(representative, dtype=np.float64)
    return LatentReference(latents, rep, tuple(features), len(x))


def median_representative(train_inputs) -> np.ndarray:
    x = np.asarray(train_inputs, dtype=np.float64)
    return np.median(x.reshape(-1, x.shape[-1]), axis=0)


def counterfactual_replace(window, q: int, representative) -> np.ndarray:
    """Copy of ``window`` (``(history, F)`` or batched) with feature column ``q`` set to ``representative[q]``."""
    w = np.array(window, dtype=np.float64, copy=True)
    rep = np.asarray(representative, dtype=np.float64)
    if not 0 <= q < w.shape[-1]:
        raise IndexError(f"feature index {q} out of range for {w.shape[-1]} features")
    w[..., q] = rep[q]
    return w


def minkowski_mean_distance(latent, reference, order: float = 2.0, chunk: int = 256) -> np.ndarray | float:
    """Mean order-``order`` Minkowski distance from each latent to every reference latent.

    ``latent`` may be ``(p,)`` (returns a float) or ``(K, p)`` (returns ``(K,)``).
    """
    if order < 1:
        raise ValueError("Minkowski order must be >= 1")
    ref = np.asarray(reference, dtype=np.float64)
    if ref.ndim != 2 or len(ref) == 0:
        raise EmptyReferenceError("reference latent set is empty")
    lat = np.asarray(latent, dtype=np.float64)
    single = lat.ndim == 1
    lat = np.atleast_2d(lat)
    if lat.shape[1] != ref.shape[1]:
        raise ValueError(f"latent dim {lat.shape[1]} != reference dim {ref.shape[1]}")
    out = np.empty(len(lat))
    for start in range(0, len(lat), chunk):
        diff = np.abs(lat[start:start + chunk, None, :] - ref[None, :, :])
        if order == 2.0:
            dist = np.linalg.norm(diff, axis=-1)
        elif order == 1.0:
            dist = diff.sum(axis=2)
        else:
            dist = (diff**order).sum(axis=2) ** (1.0 / order)
        out[start:start + chunk] = dist.mean(axis=1)
    return float(out[0]) if single else out


@dataclass
class DriftReport:
    """Localization outcome for one drifting section.

    ``scores[i, q]`` is the mean latent distance of window ``i`` after
    replacing feature ``q``; ``winners[i]`` its argmin.
    """

    features: tuple[str, ...]
    scores: np.ndarray
    winners: np.ndarray
    votes: np.ndarray
    mean_scores: np.ndarray
    ranking: list[str]
    predicted: str
    scenario: dict | None = None
    forced: bool = False
    alarms: list = field(default_factory=list)
    channels: list | None = None
    window_indices: np.ndarray | None = None

    def accuracy(self, feature: str) -> float:
        """Fraction of windows whose own argmin is ``feature``."""
        return float(np.mean(self.winners == self.features.index(feature)))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "forced": self.forced,
            "predicted_feature": self.predicted,
            "ranking": self.ranking,
            "feature_scores": [
                {"feature": f, "mean_distance": float(m), "votes": int(v), "rank": self.ranking.index(f) + 1}
                for f, m, v in zip(self.features, self.mean_scores, self.votes)
            ],
            "per_window": [
                {"window_index": int(w), "winner": self.features[int(k)], "scores": [float(s) for s in row]}
                for w, k, row in zip(self._indices(), self.winners, self.scores)
            ],
            "channel_diagnostics": self.channels,
            "alarms": self.alarms,
        }

    def _indices(self):
        return self.window_indices if self.window_indices is not None else np.arange(len(self.winners))

    def distance_rows(self):
        """``(window_index, feature, distance)`` tuples for profile plots."""
        for w, row in zip(self._indices(), self.scores):
            for f, s in zip(self.features, row):
                yield int(w), f, float(s)


def score_windows(windows, reference: LatentReference, regressor: Regressor, ae: Autoencoder,
                  order: float = 2.0) -> np.ndarray:
    """``(M, F)`` mean latent distances for every window/feature replacement."""
    x = np.asarray(windows, dtype=np.float64)
    m, _, n_feat = x.shape
    swapped = np.stack([counterfactual_replace(x, q, reference.representative) for q in range(n_feat)], axis=1)
    flat = swapped.reshape(m * n_feat, *x.shape[1:])
    latents = ae.encode(regressor.capture_activations(flat))
    return minkowski_mean_distance(latents, reference.latents, order).reshape(m, n_feat)


def localize_drift(windows, reference: LatentReference, regressor: Regressor, ae: Autoencoder,
                   order: float = 2.0, window_indices=None) -> DriftReport:
    """Majority vote of per-window argmin; ties go to the smallest mean distance."""
    x = np.asarray(windows, dtype=np.float64)
    if x.ndim != 3 or len(x) == 0:
        raise ValueError("localize_drift needs a non-empty (M, history, F) drifting section")
    scores = score_windows(x, reference, regressor, ae, order)
    winners = np.argmin(scores, axis=1)
    n_feat = scores.shape[1]
    votes = np.bincount(winners, minlength=n_feat)
    mean_scores = scores.mean(axis=0)
    # sort by (-votes, mean distance, index)
    order_idx = sorted(range(n_feat), key=lambda q: (-votes[q], mean_scores[q], q))
    feats = tuple(reference.features)
    ranking = [feats[q] for q in sorted(range(n_feat), key=lambda q: (mean_scores[q], q))]
    return DriftReport(
        features=feats,
        scores=scores,
        winners=winners,
        votes=votes,
        mean_scores=mean_scores,
        ranking=ranking,
        predicted=feats[order_idx[0]],
        window_indices=None if window_indices is None else np.asarray(window_indices),
    )


def channel_losses(ae: Autoencoder, activations, history: int = 5) -> np.ndarray:
    """Per-channel mean squared reconstruction error (positions averaged over timesteps)."""
    a = np.atleast_2d(np.asarray(activations, dtype=np.float64))
    per_position = np.mean((ae.reconstruct(a) - a) ** 2, axis=0)
    return per_position.reshape(history, -1).mean(axis=0)


def channel_reconstruction_diff(ae: Autoencoder, normal_activations, drifting_activations,
                                history: int = 5) -> list[dict]:
    """Percentage change of per-channel reconstruction loss, drifting vs normal.

    A channel with zero normal loss gets ``pct_diff = None`` and ``undefined = True``.
    """
    normal = np.asarray(normal_activations)
    drifting = np.asarray(drifting_activations)
    if len(normal) == 0 or len(drifting) == 0:
        raise ValueError("channel diagnostics need non-empty normal and drifting sets")
    ln = channel_losses(ae, normal, history)
    ld = channel_losses(ae, drifting, history)
    out = []
    for c, (n, d) in enumerate(zip(ln, ld)):
        undefined = not n > 0
        pct = None if undefined else float(100.0 * (d - n) / n)
        out.append({"channel": c, "normal_loss": float(n), "drift_loss": float(d),
                    "pct_diff": pct, "undefined": undefined})
    return out
