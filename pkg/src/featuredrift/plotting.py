"""Matplotlib rendering of the report figures (PNG, headless backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}

LABELS = {"co2": "CO$_2$", "temperature": "Temperature", "humidity": "Humidity",
          "pressure": "Pressure", "pir": "PIR"}


def size(scale=1.0, ratio=(np.sqrt(5.0) - 1.0) / 2.0):
    width = 6.5 * scale
    return width, width * ratio


def new(nrows=1, ncols=1, scale=1.0, ratio=None, **kw):
    with plt.rc_context(STYLE):
        figsize = size(scale) if ratio is None else size(scale, ratio)
        return plt.subplots(nrows, ncols, figsize=figsize, **kw)


def save(fig, path):
    with plt.rc_context(STYLE):
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def plot_mae_streams(series, path):
    """One panel per drifting feature: run-averaged batch MAE with the onset marked."""
    feats = list(series)
    fig, axes = new(len(feats), 1, scale=1.0, ratio=0.25 * len(feats) + 0.2, sharex=True, squeeze=False)
    for ax, feat in zip(axes[:, 0], feats):
        mean, std, onset_batch = series[feat]
        x = np.arange(len(mean))
        ax.plot(x, mean, lw=0.9, color="k")
        ax.fill_between(x, mean - std, mean + std, color="0.8", lw=0)
        ax.axvline(onset_batch, color="tab:red", ls="--", lw=0.8)
        ax.set_ylabel(f"MAE\n{LABELS.get(feat, feat)}")
    axes[-1, 0].set_xlabel("batch (5 windows)")
    return save(fig, path)


def plot_distance_profiles(bundle, path):
    """Grouped bars of mean latent distance per replaced feature, for each drifting feature."""
    by_feat = {}
    for run in bundle["runs"]:
        for sc in run["scenarios"]:
            by_feat.setdefault(sc["feature"], []).append(sc["mean_distances"])
    drifting = list(by_feat)
    replaced = list(by_feat[drifting[0]][0]) if drifting else []
    fig, ax = new(scale=1.0)
    width = 0.8 / max(len(replaced), 1)
    for j, rep in enumerate(replaced):
        vals = [np.mean([d[rep] for d in by_feat[f]]) for f in drifting]
        ax.bar(np.arange(len(drifting)) + j * width, vals, width, label=f"replace {LABELS.get(rep, rep)}")
    ax.set_xticks(np.arange(len(drifting)) + 0.4 - width / 2)
    ax.set_xticklabels([LABELS.get(f, f) for f in drifting])
    ax.set_xlabel("drifting feature")
    ax.set_ylabel("mean Minkowski distance")
    ax.legend(ncol=3, frameon=False)
    return save(fig, path)


def plot_channel_diffs(bundle, path, feature="co2", run_index=0):
    scs = [sc for r in bundle["runs"] if r["run"] == run_index for sc in r["scenarios"] if sc["feature"] == feature]
    if not scs:
        scs = [sc for r in bundle["runs"][:1] for sc in r["scenarios"]][:1]
    if not scs:
        return None
    chans = scs[0]["channels"]
    pct = [0.0 if c["undefined"] else c["pct_diff"] for c in chans]
    fig, ax = new(scale=1.0, ratio=0.4)
    colors = ["tab:red" if v > 0 else "tab:blue" for v in pct]
    ax.bar([c["channel"] for c in chans], pct, color=colors)
    ax.axhline(0, color="k", lw=0.6)
    ax.set_xlabel("channel")
    ax.set_ylabel("reconstruction loss change (%)")
    ax.set_title(f"{LABELS.get(scs[0]['feature'], scs[0]['feature'])} drift, run {run_index}")
    return save(fig, path)


def render_figures(summary, fig2_series, bundle, out_dir) -> list[Path]:
    out = Path(out_dir)
    paths = []
    if fig2_series:
        paths.append(plot_mae_streams(fig2_series, out / "fig2.png"))
    if bundle["runs"]:
        paths.append(plot_distance_profiles(bundle, out / "fig3.png"))
        p = plot_channel_diffs(bundle, out / "fig4.png")
        if p is not None:
            paths.append(p)
    return paths
