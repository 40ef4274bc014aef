"""Sensor CSV ingestion, minute resampling, chunking, windowing and scaling."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

FEATURES = ("co2", "temperature", "humidity", "pressure", "pir")
TIMESTAMP = "timestamp"

# Reference per-feature statistics of the office-room dataset (mean, std).
REFERENCE_STATS = {
    "temperature": (23.38, 0.74),
    "humidity": (29.1, 13.25),
    "pressure": (1006.0, 12.12),
    "co2": (430.02, 65.4),
    "pir": (0.31, 1.46),
}


class SchemaError(ValueError):
    pass


class DegenerateScalerError(ValueError):
    def __init__(self, feature: str):
        super().__init__(f"feature {feature!r} is constant on the training rows")
        self.feature = feature


class SplitError(ValueError):
    pass


@dataclass
class IngestResult:
    records: pd.DataFrame
    skipped: int = 0
    warnings: list[str] = field(default_factory=list)


def ingest_csv(path, schema: dict[str, str] | None = None, extra: tuple[str, ...] = ()) -> IngestResult:
    """Read a sensor CSV into typed records.

    ``schema`` maps canonical names (``timestamp`` and the five features) to
    header names in the file. Rows with an unparseable timestamp or a
    non-numeric feature value are skipped and counted. ``extra`` names
    additional numeric columns to carry through (e.g. a synthetic target).
    """
    wanted = (TIMESTAMP, *FEATURES, *extra)
    schema = {name: (schema or {}).get(name, name) for name in wanted}
    path = Path(path)
    if path.stat().st_size == 0 or not path.read_text(encoding="utf-8").strip():
        msg = f"{path} is empty"
        log.warning(msg)
        return IngestResult(pd.DataFrame(columns=list(wanted)), 0, [msg])
    raw = pd.read_csv(path, dtype=str, encoding="utf-8")
    missing = [col for col in schema.values() if col not in raw.columns]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")
    out = pd.DataFrame({name: raw[col] for name, col in schema.items()})
    out[TIMESTAMP] = pd.to_datetime(out[TIMESTAMP], errors="coerce")
    for name in wanted[1:]:
        out[name] = pd.to_numeric(out[name], errors="coerce")
    bad = out.isna().any(axis=1)
    skipped = int(bad.sum())
    out = out[~bad].sort_values(TIMESTAMP, kind="stable").reset_index(drop=True)
    warnings = [f"skipped {skipped} malformed row(s)"] if skipped else []
    for w in warnings:
        log.warning(w)
    return IngestResult(out, skipped, warnings)


def resample_and_interpolate(records: pd.DataFrame, ffill_limit: int = 0) -> pd.DataFrame:
    """Collapse records onto a one-minute grid.

    Co-occurring readings in a minute collapse to their median; PIR movement
    counts are summed. Minutes where any feature is still missing (after an
    optional forward fill of at most ``ffill_limit`` minutes) are dropped, so
    they become chunk boundaries downstream.
    """
    if records.empty:
        return pd.DataFrame(columns=[c for c in records.columns if c != TIMESTAMP],
                            index=pd.DatetimeIndex([], name=TIMESTAMP))
    frame = records.set_index(TIMESTAMP)
    minute = frame.index.floor("min")
    grouped = frame.groupby(minute)
    agg = {c: "median" for c in frame.columns}
    if "pir" in agg:
        agg["pir"] = "sum"
    out = grouped.agg(agg)
    if "pir" in out.columns:
        # a minute with no PIR reading must stay missing, not become 0
        has_pir = grouped["pir"].count()
        out.loc[has_pir == 0, "pir"] = np.nan
    out.index.name = TIMESTAMP
    if ffill_limit > 0:
        full = pd.date_range(out.index[0], out.index[-1], freq="min", name=TIMESTAMP)
        out = out.reindex(full).ffill(limit=ffill_limit)
    return out.dropna()


def segment_chunks(frame: pd.DataFrame, min_len: int = 60) -> list[pd.DataFrame]:
    """Split a minute-grid frame into maximal gap-free runs of >= ``min_len`` rows.

    Each surviving run gets a fresh ``frame_id`` (0, 1, ...).
    """
    if frame.empty:
        return []
    gaps = frame.index.to_series().diff() != pd.Timedelta(minutes=1)
    run_id = gaps.cumsum().to_numpy()
    chunks = []
    for _, part in frame.groupby(run_id, sort=True):
        if len(part) >= min_len:
            part = part.copy()
            part["frame_id"] = len(chunks)
            chunks.append(part)
    return chunks


@dataclass
class WindowSet:
    """Supervised windows in array form.

    ``inputs[i]`` is ``(history, n_features)``; ``targets[i]`` the target value
    ``horizon`` rows after the last input row; ``current[i]`` the target
    column's value at the last input row (used for the change-based split);
    ``origin`` holds ``(frame_id, row)`` with ``row`` the last input row.
    """

    inputs: np.ndarray
    targets: np.ndarray
    current: np.ndarray
    frame_ids: np.ndarray
    rows: np.ndarray
    features: tuple[str, ...] = FEATURES

    def __len__(self):
        return len(self.targets)

    def subset(self, idx) -> "WindowSet":
        idx = np.asarray(idx, dtype=int)
        return WindowSet(self.inputs[idx], self.targets[idx], self.current[idx],
                         self.frame_ids[idx], self.rows[idx], self.features)

    def replace(self, **changes) -> "WindowSet":
        fields_ = dict(inputs=self.inputs, targets=self.targets, current=self.current,
                       frame_ids=self.frame_ids, rows=self.rows, features=self.features)
        fields_.update(changes)
        return WindowSet(**fields_)

    @property
    def changes(self) -> np.ndarray:
        return np.abs(self.targets - self.current)

    @staticmethod
    def concat(sets, features=FEATURES) -> "WindowSet":
        sets = list(sets)
        if not sets:
            return WindowSet(np.zeros((0, 0, len(features))), np.zeros(0), np.zeros(0),
                             np.zeros(0, dtype=int), np.zeros(0, dtype=int), tuple(features))
        return WindowSet(
            np.concatenate([s.inputs for s in sets]),
            np.concatenate([s.targets for s in sets]),
            np.concatenate([s.current for s in sets]),
            np.concatenate([s.frame_ids for s in sets]),
            np.concatenate([s.rows for s in sets]),
            sets[0].features,
        )


def make_windows(chunk: pd.DataFrame, history: int = 5, horizon: int = 5,
                 features=FEATURES, target: str = "co2") -> WindowSet:
    """Stride-1 sliding windows inside one chunk; never crosses chunks."""
    n = len(chunk)
    count = max(0, n - history - horizon + 1)
    values = chunk[list(features)].to_numpy(dtype=np.float64)
    tgt = chunk[target].to_numpy(dtype=np.float64)
    frame_id = int(chunk["frame_id"].iloc[0]) if "frame_id" in chunk and n else 0
    if count == 0:
        return WindowSet(np.zeros((0, history, len(features))), np.zeros(0), np.zeros(0),
                         np.zeros(0, dtype=int), np.zeros(0, dtype=int), tuple(features))
    starts = np.arange(count)
    idx = starts[:, None] + np.arange(history)[None, :]
    last = starts + history - 1
    return WindowSet(
        inputs=values[idx],
        targets=tgt[last + horizon],
        current=tgt[last],
        frame_ids=np.full(count, frame_id, dtype=int),
        rows=last.astype(int),
        features=tuple(features),
    )


@dataclass
class Scaler:
    """Per-feature standardisation plus separate target statistics."""

    features: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    target_mean: float = 0.0
    target_std: float = 1.0

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def inverse(self, z):
        return np.asarray(z, dtype=np.float64) * self.std + self.mean

    def transform_target(self, y):
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def inverse_target(self, z):
        return np.asarray(z, dtype=np.float64) * self.target_std + self.target_mean

    def index(self, feature: str) -> int:
        try:
            return self.features.index(feature)
        except ValueError:
            raise KeyError(f"unknown feature {feature!r}; expected one of {self.features}") from None

    def to_dict(self) -> dict:
        return {
            "features": list(self.features),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "target_mean": float(self.target_mean),
            "target_std": float(self.target_std),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(tuple(d["features"]), np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64),
                   float(d["target_mean"]), float(d["target_std"]))

    @classmethod
    def from_reference_stats(cls, features=FEATURES) -> "Scaler":
        stats = np.array([REFERENCE_STATS[f] for f in features])
        co2_mean, co2_std = REFERENCE_STATS["co2"]
        return cls(tuple(features), stats[:, 0].copy(), stats[:, 1].copy(), co2_mean, co2_std)


def fit_scaler(train: WindowSet) -> Scaler:
    rows = train.inputs.reshape(-1, train.inputs.shape[-1])
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    for name, s in zip(train.features, std):
        if not s > 0:
            raise DegenerateScalerError(name)
    t_std = float(train.targets.std())
    if not t_std > 0:
        raise DegenerateScalerError("target")
    return Scaler(tuple(train.features), mean, std, float(train.targets.mean()), t_std)


def fit_and_apply_scaler(train: WindowSet, *others: WindowSet):
    """Fit on ``train`` only; return the scaler and standardised copies of every set."""
    scaler = fit_scaler(train)
    scaled = [s.replace(inputs=scaler.transform(s.inputs), targets=scaler.transform_target(s.targets),
                        current=scaler.transform_target(s.current)) for s in (train, *others)]
    return scaler, scaled


def split_challenging_test(windows: WindowSet, quantile: float = 0.8):
    """Windows whose target change exceeds the ``quantile`` of all changes form the test set.

    Linear-interpolation quantile; ties at the threshold go to train.
    Returns ``(train_idx, test_idx)`` in original (temporal) order.
    """
    if len(windows) < 10:
        raise SplitError(f"need at least 10 windows to split, got {len(windows)}")
    change = windows.changes
    threshold = np.quantile(change, quantile, method="linear")
    is_test = change > threshold
    if not is_test.any():
        log.warning("challenging-test split is empty (all changes tied at %.6g)", threshold)
    return np.flatnonzero(~is_test), np.flatnonzero(is_test)


# ---------------------------------------------------------------------------
# prepared-dataset persistence
# ---------------------------------------------------------------------------


@dataclass
class Prepared:
    """Raw windows plus split indices and fitted scaler."""

    windows: WindowSet
    train_idx: np.ndarray
    test_idx: np.ndarray
    scaler: Scaler
    history: int = 5
    horizon: int = 5
    target: str = "co2"
    quantile: float = 0.8
    skipped_rows: int = 0

    @property
    def train(self) -> WindowSet:
        return self.windows.subset(self.train_idx)

    @property
    def test(self) -> WindowSet:
        return self.windows.subset(self.test_idx)

    def standardized(self, which: str) -> WindowSet:
        ws = self.train if which == "train" else self.test
        s = self.scaler
        return ws.replace(inputs=s.transform(ws.inputs), targets=s.transform_target(ws.targets),
                          current=s.transform_target(ws.current))


def prepare(frame: pd.DataFrame, history: int = 5, horizon: int = 5, min_len: int = 60,
            quantile: float = 0.8, target: str = "co2", features=FEATURES) -> Prepared:
    """Chunk, window, split and fit the scaler on a minute-grid frame."""
    chunks = segment_chunks(frame, min_len=min_len)
    windows = WindowSet.concat([make_windows(c, history, horizon, features, target) for c in chunks], features)
    train_idx, test_idx = split_challenging_test(windows, quantile)
    scaler = fit_scaler(windows.subset(train_idx))
    return Prepared(windows, train_idx, test_idx, scaler, history, horizon, target, quantile)


def window_columns(history: int, features) -> list[str]:
    return [f"{f}_t{lag}" for lag in range(history) for f in features]


def windows_to_frame(ws: WindowSet, split: np.ndarray | None = None) -> pd.DataFrame:
    history = ws.inputs.shape[1]
    df = pd.DataFrame(ws.inputs.reshape(len(ws), -1), columns=window_columns(history, ws.features))
    df.insert(0, "row", ws.rows)
    df.insert(0, "frame_id", ws.frame_ids)
    df["current"] = ws.current
    df["target"] = ws.targets
    if split is not None:
        df["split"] = split
    return df


def windows_from_frame(df: pd.DataFrame, history: int, features) -> WindowSet:
    cols = window_columns(history, features)
    inputs = df[cols].to_numpy(dtype=np.float64).reshape(len(df), history, len(features))
    return WindowSet(inputs, df["target"].to_numpy(dtype=np.float64), df["current"].to_numpy(dtype=np.float64),
                     df["frame_id"].to_numpy(dtype=int), df["row"].to_numpy(dtype=int), tuple(features))


def save_prepared(prep: Prepared, out_dir) -> None:
    """Write ``windows.csv`` (raw values, one row per window) and ``prep.json``.

    ``prep.json`` fields: ``history``, ``horizon``, ``target``, ``quantile``,
    ``features``, ``scaler`` (see :meth:`Scaler.to_dict`), ``train_indices``,
    ``test_indices``, ``skipped_rows``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    split = np.full(len(prep.windows), "train", dtype=object)
    split[prep.test_idx] = "test"
    windows_to_frame(prep.windows, split).to_csv(out_dir / "windows.csv", index=False, float_format="%.17g")
    meta = {
        "history": prep.history,
        "horizon": prep.horizon,
        "target": prep.target,
        "quantile": prep.quantile,
        "features": list(prep.windows.features),
        "scaler": prep.scaler.to_dict(),
        "train_indices": [int(i) for i in prep.train_idx],
        "test_indices": [int(i) for i in prep.test_idx],
        "skipped_rows": prep.skipped_rows,
    }
    (out_dir / "prep.json").write_text(json.dumps(meta, indent=1))


def load_prepared(out_dir) -> Prepared:
    out_dir = Path(out_dir)
    meta = json.loads((out_dir / "prep.json").read_text())
    df = pd.read_csv(out_dir / "windows.csv", float_precision="round_trip")
    ws = windows_from_frame(df, meta["history"], meta["features"])
    return Prepared(ws, np.array(meta["train_indices"], dtype=int), np.array(meta["test_indices"], dtype=int),
                    Scaler.from_dict(meta["scaler"]), meta["history"], meta["horizon"], meta["target"],
                    meta["quantile"], meta.get("skipped_rows", 0))
