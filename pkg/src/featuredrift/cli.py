"""Command-line driver.

Exit codes: 0 success, 1 config error, 2 data error, 3 training failure,
4 partial bundle. ``FEATUREDRIFT_OUTPUT_DIR`` sets the default output
directory for ``run`` and ``report``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import data as dp
from .config import ConfigError, TrainSettings, load_config
from .drift import DriftScenario, ScenarioError, alarms_to_frame, batch_errors, detect, inject_outlier_drift
from .fde import build_latent_reference, channel_reconstruction_diff, localize_drift
from .harness import DataError, run_experiment
from .models import Autoencoder, AutoencoderSpec, Regressor, RegressorSpec, train_autoencoder, train_regressor
from .nn import TrainConfig, TrainingError, load_checkpoint, save_checkpoint
from .report import emit_report, load_bundle, save_bundle
from .synthetic import SyntheticSpec, generate_synthetic

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_TRAIN, EXIT_PARTIAL = 0, 1, 2, 3, 4
OUTPUT_ENV = "FEATUREDRIFT_OUTPUT_DIR"

log = logging.getLogger("featuredrift")


def _default_out(value):
    if value:
        return Path(value)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    raise ConfigError(f"no output directory: pass --out or set {OUTPUT_ENV}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args):
    spec = SyntheticSpec(length=args.length, seed=args.seed, noise_std=args.noise_std)
    frame = generate_synthetic(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, float_format="%.17g")
    print(f"wrote {len(frame)} rows to {out}")


def cmd_prep(args):
    extra = ("target",) if args.target == "target" else ()
    if not Path(args.input).exists():
        raise DataError(f"input not found: {args.input}")
    try:
        ingested = dp.ingest_csv(args.input, extra=extra)
        frame = dp.resample_and_interpolate(ingested.records, args.ffill_limit)
        prep = dp.prepare(frame, args.history, args.horizon, args.min_chunk, args.quantile, args.target)
    except (dp.SchemaError, dp.SplitError, dp.DegenerateScalerError) as exc:
        raise DataError(str(exc)) from exc
    prep.skipped_rows = ingested.skipped
    dp.save_prepared(prep, args.out)
    print(f"{len(prep.windows)} windows ({len(prep.train_idx)} train / {len(prep.test_idx)} test), "
          f"{ingested.skipped} rows skipped -> {args.out}")


def _settings(args, epochs):
    return TrainConfig(lr=args.lr, batch_size=args.batch_size, max_epochs=epochs, patience=args.patience)


def cmd_train(args):
    prep = dp.load_prepared(args.prep)
    train = prep.standardized("train")
    reg_spec = RegressorSpec(prep.history, len(train.features), args.channels, args.hidden)
    ae_spec = AutoencoderSpec(reg_spec.activation_size, args.hidden, args.latent)
    try:
        reg, reg_log = train_regressor(train.inputs, train.targets, reg_spec, _settings(args, args.epochs), args.seed)
        acts = reg.capture_activations(train.inputs)
        ae, ae_log = train_autoencoder(acts, ae_spec, _settings(args, args.ae_epochs or args.epochs), args.seed)
    except TrainingError as exc:
        log.error("%s", exc)
        return EXIT_TRAIN
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(reg.net, out / "regressor.json", {"spec": reg_spec.__dict__, "seed": args.seed})
    save_checkpoint(ae.net, out / "autoencoder.json", {"spec": ae_spec.__dict__, "seed": args.seed})
    reg_log.to_csv(out / "regressor_log.csv")
    ae_log.to_csv(out / "autoencoder_log.csv")
    test = prep.standardized("test")
    metrics = {
        "regressor_test_mae": float(np.mean(np.abs(reg.predict(test.inputs) - test.targets))) * prep.scaler.target_std,
        "ae_test_mse": float(np.mean(ae.encode_reconstruct(reg.capture_activations(test.inputs))[2])),
        "regressor_epochs": len(reg_log),
        "ae_epochs": len(ae_log),
    }
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2))
    print(json.dumps(metrics))
    return EXIT_OK


def load_models(models_dir):
    d = Path(models_dir)
    rnet, rmeta = load_checkpoint(d / "regressor.json")
    anet, ameta = load_checkpoint(d / "autoencoder.json")
    return (Regressor(RegressorSpec(**rmeta["spec"]), rnet), Autoencoder(AutoencoderSpec(**ameta["spec"]), anet))


def _scenario_from(args) -> DriftScenario:
    if args.scenario:
        import yaml

        doc = yaml.safe_load(Path(args.scenario).read_text())
        return DriftScenario(**doc)
    if not args.feature:
        raise ConfigError("inject needs --feature or --scenario")
    return DriftScenario(args.feature, args.onset, args.magnitude, args.seed, args.noise)


def cmd_inject(args):
    prep = dp.load_prepared(args.prep)
    test = prep.test
    try:
        scenario = _scenario_from(args)
        corrupted = inject_outlier_drift(test.inputs, scenario, prep.scaler, test.features)
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from None
    df = dp.windows_to_frame(test.replace(inputs=corrupted))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(out, index=False, float_format="%.17g")
    print(f"corrupted {len(test) - scenario.onset} of {len(test)} windows ({scenario.feature}) -> {out}")


def _read_stream(prep, path):
    ws = dp.windows_from_frame(pd.read_csv(path, float_precision="round_trip"), prep.history, prep.windows.features)
    s = prep.scaler
    return ws, ws.replace(inputs=s.transform(ws.inputs), targets=s.transform_target(ws.targets))


def cmd_detect(args):
    prep = dp.load_prepared(args.prep)
    reg, _ = load_models(args.models)
    _, std = _read_stream(prep, args.stream)
    stream = batch_errors(reg.predict(std.inputs), std.targets, args.batch_size) * prep.scaler.target_std
    alarms = detect(stream, args.batch_size, args.delta, clock=args.clock)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    alarms_to_frame(alarms).to_csv(out, index=False)
    if args.errors:
        pd.DataFrame({"batch_index": np.arange(len(stream)), "mae": stream}).to_csv(args.errors, index=False)
    print(f"{len(alarms)} alarm(s) over {len(stream)} batches -> {out}")


def cmd_explain(args):
    prep = dp.load_prepared(args.prep)
    reg, ae = load_models(args.models)
    _, std = _read_stream(prep, args.stream)
    forced = args.onset is not None
    if forced:
        start = args.onset
        alarms = []
    else:
        if not args.alarms:
            raise ConfigError("explain needs --alarms or --onset")
        frame = pd.read_csv(args.alarms)
        alarms = frame.to_dict(orient="records")
        if frame.empty:
            print("no alarms: nothing to explain")
            return EXIT_OK
        start = int(frame["window_index"].iloc[0])
    if not 0 <= start < len(std):
        raise ConfigError(f"drifting section start {start} outside stream of {len(std)} windows")
    train = prep.standardized("train")
    reference = build_latent_reference(reg, ae, train.inputs, max_size=args.reference_cap, seed=args.seed,
                                       features=train.features)
    section = std.inputs[start:]
    report = localize_drift(section, reference, reg, ae, args.order, window_indices=np.arange(start, len(std)))
    report.forced = forced
    report.alarms = alarms
    report.channels = channel_reconstruction_diff(ae, reg.capture_activations(train.inputs),
                                                  reg.capture_activations(section), prep.history)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1))
    pd.DataFrame(list(report.distance_rows()), columns=["window_index", "feature", "distance"]).to_csv(
        out / "distances.csv", index=False)
    pd.DataFrame(report.channels).to_csv(out / "channels.csv", index=False)
    print(f"predicted drifting feature: {report.predicted} (ranking {', '.join(report.ranking)})")
    return EXIT_OK


def cmd_run(args):
    overrides = {"dataset": args.dataset, "runs": args.runs, "seed": args.seed}
    if args.synthetic:
        overrides["synthetic"] = {}
    if args.no_figures:
        overrides["figures"] = False
    if args.epochs is not None:
        overrides["regressor_train"] = {"max_epochs": args.epochs}
        overrides["ae_train"] = {"max_epochs": args.epochs}
    cfg = load_config(args.config, overrides)
    out = _default_out(args.out)
    bundle = run_experiment(cfg)
    out.mkdir(parents=True, exist_ok=True)
    save_bundle(bundle, out / "bundle.json")
    emit_report(bundle, out)
    _print_summary(out)
    return EXIT_PARTIAL if bundle["partial"] else EXIT_OK


def cmd_report(args):
    bundle = load_bundle(args.bundle)
    out = _default_out(args.out)
    emit_report(bundle, out, figures=False if args.no_figures else None)
    _print_summary(out)
    return EXIT_PARTIAL if bundle["partial"] else EXIT_OK


def _print_summary(out):
    summary = json.loads((Path(out) / "summary.json").read_text())
    for row in summary["table3"]:
        print(f"{row['feature']:>12}  window acc {row['accuracy_mean']:.1f} +/- {row['accuracy_std']:.1f}  "
              f"majority {row['majority_accuracy_mean']:.1f}")
    if summary["overall_majority_accuracy"] is not None:
        print(f"overall majority-vote accuracy: {summary['overall_majority_accuracy']:.2f}%")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="featuredrift", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic sensor frame")
    s.add_argument("--length", type=int, default=3000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise-std", type=float, default=0.05)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("prep", help="resample, chunk, window, split and scale a sensor CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--target", default="co2", help="target column ('target' for synthetic frames)")
    s.add_argument("--history", type=int, default=5)
    s.add_argument("--horizon", type=int, default=5)
    s.add_argument("--min-chunk", type=int, default=60)
    s.add_argument("--quantile", type=float, default=0.8)
    s.add_argument("--ffill-limit", type=int, default=0)
    s.set_defaults(func=cmd_prep)

    defaults = TrainSettings()
    s = sub.add_parser("train", help="train the regressor and the activation autoencoder")
    s.add_argument("--prep", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--epochs", type=int, default=defaults.max_epochs)
    s.add_argument("--ae-epochs", type=int, default=None)
    s.add_argument("--lr", type=float, default=defaults.lr)
    s.add_argument("--batch-size", type=int, default=defaults.batch_size)
    s.add_argument("--patience", type=int, default=defaults.patience)
    s.add_argument("--channels", type=int, default=32)
    s.add_argument("--hidden", type=int, default=64)
    s.add_argument("--latent", type=int, default=16)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("inject", help="corrupt one feature of the test stream with an outlier value")
    s.add_argument("--prep", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--scenario", help="YAML/JSON scenario file (feature, onset, magnitude, seed)")
    s.add_argument("--feature")
    s.add_argument("--onset", type=int, default=0)
    s.add_argument("--magnitude", type=float, default=2.0)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_inject)

    s = sub.add_parser("detect", help="run ADWIN on the batch-MAE stream")
    s.add_argument("--prep", required=True)
    s.add_argument("--models", required=True)
    s.add_argument("--stream", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--errors")
    s.add_argument("--batch-size", type=int, default=5)
    s.add_argument("--delta", type=float, default=0.002)
    s.add_argument("--clock", type=int, default=1)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("explain", help="localize the drifting feature of a drifting section")
    s.add_argument("--prep", required=True)
    s.add_argument("--models", required=True)
    s.add_argument("--stream", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--alarms")
    s.add_argument("--onset", type=int, help="force the drifting section to start here")
    s.add_argument("--order", type=float, default=2.0)
    s.add_argument("--reference-cap", type=int, default=5000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_explain)

    s = sub.add_parser("run", help="end-to-end experiment and report")
    s.add_argument("--config")
    s.add_argument("--out")
    s.add_argument("--dataset")
    s.add_argument("--synthetic", action="store_true")
    s.add_argument("--runs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("report", help="re-emit report files from a saved bundle.json")
    s.add_argument("--bundle", required=True)
    s.add_argument("--out")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
    except (ConfigError, ScenarioError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError, dp.SchemaError, dp.SplitError, dp.DegenerateScalerError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except TrainingError as exc:
        log.error("training failed: %s", exc)
        return EXIT_TRAIN
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
