"""Outlier-substitution attack simulation and performance-based detection."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from .adwin import Adwin
from .data import FEATURES, Scaler


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class DriftScenario:
    """Replace ``feature`` with ``mean + magnitude * std`` from window ``onset`` on.

    ``magnitude`` is signed (``-2.0`` gives the low outlier). ``noise`` > 0
    adds seeded Gaussian jitter (in std units) to the substituted value.
    """

    feature: str
    onset: int = 0
    magnitude: float = 2.0
    seed: int = 0
    noise: float = 0.0

    def __post_init__(self):
        if self.feature not in FEATURES:
            raise ScenarioError(f"unknown feature {self.feature!r}; expected one of {FEATURES}")
        if not math.isfinite(self.magnitude) or self.magnitude == 0:
            raise ScenarioError("magnitude must be finite and non-zero")
        if self.onset < 0:
            raise ScenarioError("onset must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


def load_scenarios(entries) -> list[DriftScenario]:
    """Build scenarios from config entries (dicts with the dataclass fields, or bare feature names)."""
    out = []
    for e in entries:
        out.append(DriftScenario(e) if isinstance(e, str) else DriftScenario(**e))
    return out


def inject_outlier_drift(inputs, scenario: DriftScenario, scaler: Scaler | None = None,
                         features=FEATURES) -> np.ndarray:
    """Return a corrupted copy of ``inputs`` ``(N, history, F)``.

    With ``scaler`` the inputs are taken to be in raw units and the outlier is
    ``mu + k*sigma``; without it they are standardised and the outlier is ``k``.
    """
    x = np.array(inputs, dtype=np.float64, copy=True)
    if scenario.feature not in features:
        raise ScenarioError(f"unknown feature {scenario.feature!r}")
    if scenario.onset >= len(x):
        raise ScenarioError(f"onset {scenario.onset} outside stream of length {len(x)}")
    q = list(features).index(scenario.feature)
    if scaler is None:
        value, scale = scenario.magnitude, 1.0
    else:
        i = scaler.index(scenario.feature)
        value = scaler.mean[i] + scenario.magnitude * scaler.std[i]
        scale = scaler.std[i]
    tail = x[scenario.onset:, :, q]
    if scenario.noise > 0:
        rng = np.random.default_rng(scenario.seed)
        tail[...] = value + scenario.noise * scale * rng.standard_normal(tail.shape)
    else:
        tail[...] = value
    return x


def batch_errors(pred, target, batch_size: int = 5) -> np.ndarray:
    """Mean absolute error of consecutive batches; a ragged tail forms a last short batch."""
    err = np.abs(np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64))
    if len(err) == 0:
        return np.zeros(0)
    starts = np.arange(0, len(err), batch_size)
    return np.add.reduceat(err, starts) / np.diff(np.r_[starts, len(err)])


@dataclass
class Alarm:
    batch_index: int
    window_index: int
    detector_mean_before: float
    detector_mean_after: float


def detect(error_stream, batch_size: int = 5, delta: float = 0.002, **adwin_kw) -> list[Alarm]:
    """Feed per-batch errors through ADWIN and log every window shrink."""
    det = Adwin(delta=delta, **adwin_kw)
    alarms = []
    for b, value in enumerate(error_stream):
        before = det.mean
        if det.update(value):
            alarms.append(Alarm(b, b * batch_size, before, det.mean))
    return alarms


def alarms_to_frame(alarms) -> pd.DataFrame:
    cols = ["batch_index", "window_index", "detector_mean_before", "detector_mean_after"]
    return pd.DataFrame([asdict(a) for a in alarms], columns=cols)


def segment_stream(n_windows: int, alarm_windows) -> tuple[list[range], list[range]]:
    """Partition ``range(n_windows)`` at each alarm.

    The section before the first alarm is non-drifting; every section that
    starts at an alarm is drifting. ``alarm_windows`` are window indices
    (first window of the alarming batch), sorted.
    """
    cuts = sorted({int(a) for a in alarm_windows if 0 <= int(a) < n_windows})
    if not cuts:
        return [range(0, n_windows)], []
    normal = [range(0, cuts[0])]
    bounds = cuts + [n_windows]
    drifting = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    return normal, drifting
