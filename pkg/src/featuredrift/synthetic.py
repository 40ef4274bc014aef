"""Synthetic stand-in for the sensor dataset with a known target rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .data import FEATURES, TIMESTAMP


@dataclass(frozen=True)
class SyntheticSpec:
    """Five stationary AR(1) features and ``target[t+h] = w1*f1[t] + w2*f2[t] + noise``.

    ``f1`` is the first feature (``co2``) and ``f2`` the second
    (``temperature``). Features have unit stationary variance.
    """

    length: int = 3000
    ar: tuple[float, ...] = (0.95, 0.9, 0.9, 0.9, 0.8)
    weights: tuple[float, float] = (0.8, 0.1)
    noise_std: float = 0.05
    horizon: int = 5
    seed: int = 0
    start: str = "2021-01-04 08:00"

    def __post_init__(self):
        if len(self.ar) != len(FEATURES):
            raise ValueError(f"need {len(FEATURES)} AR coefficients, got {len(self.ar)}")
        if any(not -1 < a < 1 for a in self.ar):
            raise ValueError("AR coefficients must lie in (-1, 1)")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.length < 1:
            raise ValueError("length must be positive")


def target_rule(f1, f2, weights=(0.8, 0.1), noise=0.0):
    return weights[0] * np.asarray(f1) + weights[1] * np.asarray(f2) + noise


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> pd.DataFrame:
    """Minute-grid frame with the five feature columns plus a ``target`` column.

    ``target`` at row ``t`` is the rule applied to row ``t - horizon``;
    ``horizon`` hidden burn-in rows precede the first emitted row.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.length + spec.horizon
    phi = np.asarray(spec.ar)
    innov = rng.standard_normal((n, len(phi))) * np.sqrt(1.0 - phi**2)
    x = np.empty((n, len(phi)))
    x[0] = rng.standard_normal(len(phi))
    for t in range(1, n):
        x[t] = phi * x[t - 1] + innov[t]
    noise = rng.normal(0.0, spec.noise_std, size=n) if spec.noise_std > 0 else np.zeros(n)
    target = np.full(n, np.nan)
    target[spec.horizon:] = target_rule(x[:-spec.horizon, 0], x[:-spec.horizon, 1], spec.weights,
                                        noise[spec.horizon:])
    idx = pd.date_range(spec.start, periods=spec.length, freq="min", name=TIMESTAMP)
    frame = pd.DataFrame(x[spec.horizon:], index=idx, columns=list(FEATURES))
    frame["target"] = target[spec.horizon:]
    return frame
