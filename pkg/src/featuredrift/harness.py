"""End-to-end experiment: prepare, train, inject, detect, localize, diagnose."""

from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np

from . import data as dp
from .config import ConfigError, ExperimentConfig
from .drift import DriftScenario, batch_errors, detect, inject_outlier_drift
from .fde import build_latent_reference, channel_reconstruction_diff, localize_drift, median_representative
from .models import AutoencoderSpec, RegressorSpec, train_autoencoder, train_regressor
from .nn import NumericError, TrainConfig, TrainingError
from .synthetic import SyntheticSpec, generate_synthetic

log = logging.getLogger(__name__)


class DataError(RuntimeError):
    pass


def synthetic_spec(cfg: ExperimentConfig) -> SyntheticSpec:
    raw = dict(cfg.synthetic or {})
    if "ar" in raw:
        raw["ar"] = tuple(raw["ar"])
    if "weights" in raw:
        raw["weights"] = tuple(raw["weights"])
    raw.setdefault("horizon", cfg.horizon)
    try:
        return SyntheticSpec(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"synthetic: {exc}") from None


def load_dataset(cfg: ExperimentConfig) -> dp.Prepared:
    """Build the prepared windows from the sensor CSV or the synthetic generator."""
    try:
        if cfg.dataset is not None:
            path = Path(cfg.dataset)
            if not path.exists():
                raise DataError(f"dataset not found: {path}")
            ingested = dp.ingest_csv(path, cfg.schema)
            frame = dp.resample_and_interpolate(ingested.records, cfg.ffill_limit)
            prep = dp.prepare(frame, cfg.history, cfg.horizon, cfg.min_chunk, cfg.quantile, target="co2")
            prep.skipped_rows = ingested.skipped
        else:
            frame = generate_synthetic(synthetic_spec(cfg))
            prep = dp.prepare(frame, cfg.history, cfg.horizon, cfg.min_chunk, cfg.quantile, target="target")
    except (dp.SchemaError, dp.SplitError, dp.DegenerateScalerError) as exc:
        raise DataError(str(exc)) from exc
    if len(prep.test_idx) == 0:
        raise DataError("challenging-test split is empty")
    return prep


def _train_config(s) -> TrainConfig:
    return TrainConfig(lr=s.lr, batch_size=s.batch_size, max_epochs=s.max_epochs,
                       patience=s.patience, val_fraction=s.val_fraction)


def _time_per_batch_ms(fn, x, batch: int = 32, repeats: int = 3) -> float:
    n_batches = max(1, int(np.ceil(len(x) / batch)))
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for start in range(0, len(x), batch):
            fn(x[start:start + batch])
        best = min(best, time.perf_counter() - t0)
    return 1000.0 * best / n_batches


def run_scenario(scenario: DriftScenario, test, reg, ae, reference, train_acts, cfg: ExperimentConfig,
                 target_std: float) -> dict:
    """Inject one scenario into the (standardised) test stream and explain it."""
    onset = scenario.onset
    drifted = inject_outlier_drift(test.inputs, scenario, features=test.features)
    pred = reg.predict(drifted)
    stream = batch_errors(pred, test.targets, cfg.detector_batch) * target_std
    alarms = detect(stream, cfg.detector_batch, cfg.delta, clock=cfg.clock)
    start, forced = onset, True
    if cfg.section == "detected":
        hits = [a for a in alarms if a.window_index >= onset]
        if hits:
            start, forced = hits[0].window_index, False
    section = drifted[start:]
    report = localize_drift(section, reference, reg, ae, cfg.minkowski_order,
                            window_indices=np.arange(start, len(drifted)))
    drift_acts = reg.capture_activations(section)
    normal_acts = train_acts if cfg.fig4_baseline == "training" else reg.capture_activations(test.inputs[start:])
    channels = channel_reconstruction_diff(ae, normal_acts, drift_acts, cfg.history)
    b_on = onset // cfg.detector_batch
    pre = stream[:b_on]
    post = stream[int(np.ceil(onset / cfg.detector_batch)):]
    return {
        "feature": scenario.feature,
        "onset": onset,
        "magnitude": scenario.magnitude,
        "forced": forced,
        "section_start": int(start),
        "section_windows": int(len(section)),
        "alarms": [a.__dict__ for a in alarms],
        "predicted": report.predicted,
        "correct": report.predicted == scenario.feature,
        "window_accuracy": report.accuracy(scenario.feature),
        "votes": {f: int(v) for f, v in zip(report.features, report.votes)},
        "mean_distances": {f: float(m) for f, m in zip(report.features, report.mean_scores)},
        "ranking": report.ranking,
        "mae_stream": [float(v) for v in stream],
        "pre_mae": float(pre.mean()) if len(pre) else None,
        "post_mae": float(post.mean()) if len(post) else None,
        "channels": channels,
    }


def run_once(prep: dp.Prepared, cfg: ExperimentConfig, run: int) -> dict:
    training_seed = cfg.seed + run
    injection_seed = cfg.seed + 10_000 + run
    train = prep.standardized("train")
    test = prep.standardized("test")
    reg_spec = RegressorSpec(cfg.history, len(train.features), cfg.conv_channels, cfg.regressor_hidden)
    ae_spec = AutoencoderSpec(reg_spec.activation_size, cfg.ae_hidden, cfg.latent_dim)

    reg, reg_log = train_regressor(train.inputs, train.targets, reg_spec, _train_config(cfg.regressor_train),
                                   seed=training_seed)
    train_acts = reg.capture_activations(train.inputs)
    ae, ae_log = train_autoencoder(train_acts, ae_spec, _train_config(cfg.ae_train), seed=training_seed)

    target_std = prep.scaler.target_std
    test_mae = float(np.mean(np.abs(reg.predict(test.inputs) - test.targets))) * target_std
    test_acts = reg.capture_activations(test.inputs)
    ae_mse = float(np.mean(ae.encode_reconstruct(test_acts)[2]))
    rep = None if cfg.representative == "mean" else median_representative(train.inputs)
    reference = build_latent_reference(reg, ae, train.inputs, rep, cfg.reference_cap, injection_seed,
                                       train.features)
    timing = {
        "regressor_ms_per_batch": _time_per_batch_ms(reg.predict, test.inputs),
        "ae_ms_per_batch": _time_per_batch_ms(ae.reconstruct, test_acts),
    }
    default_onset = int(cfg.onset_fraction * len(test))
    scenarios = []
    for entry in cfg.scenarios:
        entry = {"feature": entry} if isinstance(entry, str) else dict(entry)
        entry.setdefault("onset", default_onset)
        entry["seed"] = injection_seed
        sc = DriftScenario(**entry)
        scenarios.append(run_scenario(sc, test, reg, ae, reference, train_acts, cfg, target_std))
    return {
        "run": run,
        "training_seed": training_seed,
        "injection_seed": injection_seed,
        "regressor_mae": test_mae,
        "ae_mse": ae_mse,
        "regressor_epochs": len(reg_log),
        "ae_epochs": len(ae_log),
        "regressor_log": {"train": reg_log.train_loss, "val": reg_log.val_loss},
        "ae_log": {"train": ae_log.train_loss, "val": ae_log.val_loss},
        "timing": timing,
        "scenarios": scenarios,
    }


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Execute every run and return the raw bundle (see :func:`featuredrift.report.summarize`)."""
    cfg.validate()
    bundle = {
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "partial": False,
        "errors": [],
        "runs": [],
    }
    prep = load_dataset(cfg)
    bundle["dataset"] = {
        "source": cfg.dataset or "synthetic",
        "windows": len(prep.windows),
        "train_windows": int(len(prep.train_idx)),
        "test_windows": int(len(prep.test_idx)),
        "skipped_rows": prep.skipped_rows,
        "scaler": prep.scaler.to_dict(),
    }
    for run in range(cfg.runs):
        try:
            bundle["runs"].append(run_once(prep, cfg, run))
        except (TrainingError, NumericError) as exc:
            log.error("run %d failed: %s", run, exc)
            bundle["partial"] = True
            bundle["errors"].append({"stage": "train", "run": run, "message": str(exc)})
        except ValueError as exc:
            log.error("run %d failed: %s", run, exc)
            bundle["partial"] = True
            bundle["errors"].append({"stage": "explain", "run": run, "message": str(exc)})
        log.info("run %d/%d done", run + 1, cfg.runs)
    if not bundle["runs"]:
        bundle["partial"] = True
    return bundle
