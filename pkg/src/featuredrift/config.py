"""Experiment configuration: defaults < config file < command-line overrides."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .data import FEATURES


class ConfigError(ValueError):
    pass


@dataclass
class TrainSettings:
    lr: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 20
    val_fraction: float = 0.1


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    synthetic: dict | None = None
    schema: dict | None = None
    ffill_limit: int = 0
    runs: int = 30
    seed: int = 0
    history: int = 5
    horizon: int = 5
    min_chunk: int = 60
    quantile: float = 0.8
    conv_channels: int = 32
    regressor_hidden: int = 64
    ae_hidden: int = 64
    latent_dim: int = 16
    regressor_train: TrainSettings = field(default_factory=TrainSettings)
    ae_train: TrainSettings = field(default_factory=TrainSettings)
    scenarios: list = field(default_factory=lambda: [{"feature": f} for f in FEATURES])
    onset_fraction: float = 0.5
    detector_batch: int = 5
    delta: float = 0.002
    clock: int = 1
    minkowski_order: float = 2.0
    reference_cap: int | None = 5000
    representative: str = "mean"
    section: str = "detected"
    fig4_baseline: str = "training"
    figures: bool = True

    def validate(self) -> "ExperimentConfig":
        if self.dataset is None and self.synthetic is None:
            raise ConfigError("either 'dataset' (sensor CSV path) or 'synthetic' must be given")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.scenarios:
            raise ConfigError("at least one scenario is required")
        for s in self.scenarios:
            name = s if isinstance(s, str) else s.get("feature")
            if name not in FEATURES:
                raise ConfigError(f"scenario names unknown feature {name!r}")
        if self.minkowski_order < 1:
            raise ConfigError("minkowski_order must be >= 1")
        if not 0 <= self.onset_fraction < 1:
            raise ConfigError("onset_fraction must be in [0, 1)")
        choices = {"representative": ("mean", "median"), "section": ("detected", "forced"),
                   "fig4_baseline": ("training", "paired")}
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        d = dict(d)
        for key in ("regressor_train", "ae_train"):
            if isinstance(d.get(key), dict):
                try:
                    d[key] = TrainSettings(**d[key])
                except TypeError as exc:
                    raise ConfigError(f"{key}: {exc}") from None
        return cls(**d)


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Resolve a config from defaults, an optional YAML/JSON file, then ``overrides``."""
    merged = ExperimentConfig().to_dict()
    if path is not None:
        try:
            doc = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must be a mapping")
        merged = _merge(merged, doc)
    merged = _merge(merged, {k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig.from_dict(merged).validate()
