"""Aggregate a run bundle into tables and write the report files."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import platform
from pathlib import Path

import numpy as np

from . import __version__

REPORT_FILES = ("summary.json", "table2.csv", "table3.csv", "fig3.csv", "fig4.csv", "manifest.json")


def _mean_std(values):
    v = np.asarray([x for x in values if x is not None], dtype=np.float64)
    if len(v) == 0:
        return None, None
    return float(v.mean()), float(v.std())


def _by_feature(bundle):
    order, groups = [], {}
    for run in bundle["runs"]:
        for sc in run["scenarios"]:
            if sc["feature"] not in groups:
                order.append(sc["feature"])
                groups[sc["feature"]] = []
            groups[sc["feature"]].append(sc)
    return order, groups


def positive_channel_fraction(channels) -> float:
    defined = [c for c in channels if not c["undefined"]]
    return float(np.mean([c["pct_diff"] > 0 for c in defined])) if defined else 0.0


def summarize(bundle: dict) -> dict:
    """Deterministic tables derived from the raw bundle (no timing data)."""
    runs = bundle["runs"]
    mae_m, mae_s = _mean_std(r["regressor_mae"] for r in runs)
    mse_m, mse_s = _mean_std(r["ae_mse"] for r in runs)
    table2 = [
        {"model": "1D-CNN", "metric": "MAE", "mean": mae_m, "std": mae_s},
        {"model": "AE", "metric": "MSE", "mean": mse_m, "std": mse_s},
    ]
    order, groups = _by_feature(bundle)
    table3, fig2, fig4 = [], {}, {}
    for feat in order:
        scs = groups[feat]
        acc_m, acc_s = _mean_std(100.0 * s["window_accuracy"] for s in scs)
        maj_m, maj_s = _mean_std(100.0 * float(s["correct"]) for s in scs)
        table3.append({
            "feature": feat,
            "accuracy_mean": acc_m,
            "accuracy_std": acc_s,
            "majority_accuracy_mean": maj_m,
            "majority_accuracy_std": maj_s,
            "detected_runs": sum(not s["forced"] for s in scs),
            "forced_runs": sum(s["forced"] for s in scs),
        })
        pre, _ = _mean_std(s["pre_mae"] for s in scs)
        post, _ = _mean_std(s["post_mae"] for s in scs)
        fig2[feat] = {"pre_mae": pre, "post_mae": post,
                      "ratio": post / pre if pre and post is not None else None}
        fracs = [positive_channel_fraction(s["channels"]) for s in scs]
        fig4[feat] = {"positive_fraction_mean": float(np.mean(fracs)),
                      "positive_fraction_per_run": fracs}
    overall_majority = _mean_std(r["majority_accuracy_mean"] for r in table3)[0]
    overall_window = _mean_std(r["accuracy_mean"] for r in table3)[0]
    return {
        "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config_hash": bundle["config_hash"],
        "partial": bundle["partial"],
        "errors": bundle["errors"],
        "dataset": bundle.get("dataset"),
        "runs_completed": len(runs),
        "table2": table2,
        "table3": table3,
        "overall_majority_accuracy": overall_majority,
        "overall_window_accuracy": overall_window,
        "fig2": fig2,
        "fig4": fig4,
        "runs": [
            {"run": r["run"], "training_seed": r["training_seed"], "injection_seed": r["injection_seed"],
             "regressor_mae": r["regressor_mae"], "ae_mse": r["ae_mse"],
             "predicted": {s["feature"]: s["predicted"] for s in r["scenarios"]},
             "forced": {s["feature"]: s["forced"] for s in r["scenarios"]}}
            for r in runs
        ],
    }


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    return "" if v is None else repr(v) if isinstance(v, float) else v


def emit_report(bundle: dict, out_dir, figures: bool | None = None) -> list[Path]:
    """Write summary, table, figure-data CSVs, manifest and (optionally) PNG figures.

    Returns the written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(bundle)
    written = []

    def done(p):
        written.append(p)
        return p

    (done(out / "summary.json")).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    timing = [r["timing"] for r in bundle["runs"]]
    reg_ms = _mean_std(t["regressor_ms_per_batch"] for t in timing)[0]
    ae_ms = _mean_std(t["ae_ms_per_batch"] for t in timing)[0]
    _write_csv(done(out / "table2.csv"), ["model", "metric", "mean", "std", "inference_ms_per_batch"],
               [[r["model"], r["metric"], _fmt(r["mean"]), _fmt(r["std"]), _fmt(ms)]
                for r, ms in zip(summary["table2"], (reg_ms, ae_ms))])
    keys = ["feature", "accuracy_mean", "accuracy_std", "majority_accuracy_mean", "majority_accuracy_std",
            "detected_runs", "forced_runs"]
    _write_csv(done(out / "table3.csv"), keys, [[_fmt(r[k]) for k in keys] for r in summary["table3"]])

    order, groups = _by_feature(bundle)
    fig2_series = {}
    for feat in order:
        scs = groups[feat]
        streams = np.array([s["mae_stream"] for s in scs], dtype=np.float64)
        batch = bundle["config"]["detector_batch"]
        onset = scs[0]["onset"]
        mean, std = streams.mean(axis=0), streams.std(axis=0)
        fig2_series[feat] = (mean, std, onset // batch)
        _write_csv(done(out / f"fig2_{feat}.csv"), ["batch_index", "window_index", "mae_mean", "mae_std", "drifting"],
                   [[b, b * batch, repr(float(m)), repr(float(s)), int(b * batch >= onset)]
                    for b, (m, s) in enumerate(zip(mean, std))])

    fig3 = []
    for feat in order:
        per_run = {f: [s["mean_distances"][f] for s in groups[feat]] for f in groups[feat][0]["mean_distances"]}
        for f, vals in per_run.items():
            fig3.append([feat, f, repr(float(np.mean(vals))), repr(float(np.std(vals)))])
    _write_csv(done(out / "fig3.csv"), ["drifting_feature", "replaced_feature", "mean_distance", "std_distance"], fig3)

    fig4 = []
    for run in bundle["runs"]:
        for sc in run["scenarios"]:
            for c in sc["channels"]:
                fig4.append([sc["feature"], run["run"], c["channel"], repr(c["normal_loss"]), repr(c["drift_loss"]),
                             _fmt(c["pct_diff"]), int(c["undefined"])])
    _write_csv(done(out / "fig4.csv"),
               ["drifting_feature", "run", "channel", "normal_loss", "drift_loss", "pct_diff", "undefined"], fig4)

    manifest = {
        "config_hash": bundle["config_hash"],
        "config": bundle["config"],
        "seeds": [{"run": r["run"], "training_seed": r["training_seed"], "injection_seed": r["injection_seed"]}
                  for r in bundle["runs"]],
        "scenarios": order,
        "versions": _versions(),
        "timing": timing,
        "files": sorted(p.name for p in written) + ["manifest.json"],
    }
    if figures if figures is not None else bundle["config"].get("figures", True):
        from .plotting import render_figures

        manifest["figures"] = [p.name for p in render_figures(summary, fig2_series, bundle, out)]
        written += [out / name for name in manifest["figures"]]
    (done(out / "manifest.json")).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return written


def _versions() -> dict:
    import matplotlib
    import pandas

    return {"featuredrift": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "pandas": pandas.__version__, "matplotlib": matplotlib.__version__}


def save_bundle(bundle: dict, path) -> None:
    Path(path).write_text(json.dumps(bundle, sort_keys=True) + "\n")


def load_bundle(path) -> dict:
    return json.loads(Path(path).read_text())
