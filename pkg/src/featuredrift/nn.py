"""Small numpy neural-network core: layers, losses, reverse-mode gradients, Adam.

Only what the two fixed architectures need. Everything runs in float64.
Batched arrays carry the batch on axis 0; a pointwise convolution sees
``(batch, timesteps, features)`` and a dense layer flattens whatever trails
the batch axis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1
LAYER_KINDS = ("pointwise-conv", "dense", "relu")


class ShapeError(ValueError):
    pass


class NumericError(FloatingPointError):
    """Raised when a forward/backward pass or update produces NaN/Inf."""

    def __init__(self, message: str, layer: int | None = None):
        super().__init__(message if layer is None else f"{message} (layer {layer})")
        self.layer = layer


class TrainingError(RuntimeError):
    def __init__(self, message: str, epoch: int):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a fixed architecture.

    For ``pointwise-conv`` ``in_dim`` is the number of input features per
    timestep and ``out_dim == channels``. For ``relu`` both dims are the flat
    size passing through (bookkeeping only).
    """

    kind: str
    in_dim: int
    out_dim: int
    channels: int = 0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.out_dim <= 0 or self.in_dim <= 0:
            raise ValueError("layer dims must be positive")
        if self.kind == "pointwise-conv" and self.channels != self.out_dim:
            raise ValueError("pointwise-conv needs channels == out_dim")

    @property
    def has_params(self) -> bool:
        return self.kind != "relu"


def conv(in_features: int, channels: int) -> LayerSpec:
    return LayerSpec("pointwise-conv", in_features, channels, channels)


def dense(in_dim: int, out_dim: int) -> LayerSpec:
    return LayerSpec("dense", in_dim, out_dim)


def relu(size: int) -> LayerSpec:
    return LayerSpec("relu", size, size)


# ---------------------------------------------------------------------------
# forward primitives
# ---------------------------------------------------------------------------


def pointwise_conv_forward(x, weights, bias):
    """Kernel-width-1 convolution: the same affine map applied at every timestep.

    ``x`` is ``(T, F)`` or ``(B, T, F)``; returns ``(..., T, C)``.
    """
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if x.ndim not in (2, 3):
        raise ShapeError(f"conv input must be (T, F) or (B, T, F), got {x.shape}")
    if weights.ndim != 2 or x.shape[-1] != weights.shape[0]:
        raise ShapeError(f"conv input features {x.shape[-1]} != weight rows {weights.shape}")
    if bias.shape != (weights.shape[1],):
        raise ShapeError(f"conv bias shape {bias.shape} != ({weights.shape[1]},)")
    return _rowwise(x, weights) + bias


def _rowwise(x, weights):
    # non-BLAS contraction: every row is summed in the same order regardless of batch size,
    # so a conv over T rows and T separate dense calls agree bit for bit
    return np.einsum("...f,fc->...c", x, weights, optimize=False)


def dense_forward(x, weights, bias, activation: str = "identity"):
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if weights.ndim != 2 or x.shape[-1] != weights.shape[0]:
        raise ShapeError(f"dense input {x.shape} incompatible with weights {weights.shape}")
    if bias.shape != (weights.shape[1],):
        raise ShapeError(f"dense bias shape {bias.shape} != ({weights.shape[1]},)")
    out = (_rowwise(x, weights) if x.ndim == 1 else x @ weights) + bias
    if activation == "relu":
        return np.maximum(out, 0.0)
    if activation != "identity":
        raise ValueError(f"unknown activation {activation!r}")
    return out


def loss(pred, target, kind: str = "mse") -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")
    if pred.size == 0:
        raise ValueError("loss of empty input is undefined")
    diff = pred - target
    if kind == "mse":
        return float(np.mean(diff * diff))
    if kind == "mae":
        return float(np.mean(np.abs(diff)))
    raise ValueError(f"unknown loss kind {kind!r}")


def _loss_grad(pred, target, kind):
    diff = pred - target
    if kind == "mse":
        return 2.0 * diff / diff.size
    if kind == "mae":
        return np.sign(diff) / diff.size
    raise ValueError(f"unknown loss kind {kind!r}")


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass
class ParamSet:
    """Per-layer ``{"W", "b"}`` arrays plus Adam moments and step counter."""

    layers: list[dict[str, np.ndarray]]
    m: list[dict[str, np.ndarray]] = field(default_factory=list)
    v: list[dict[str, np.ndarray]] = field(default_factory=list)
    step: int = 0

    def __post_init__(self):
        if not self.m:
            self.m = [{k: np.zeros_like(a) for k, a in p.items()} for p in self.layers]
        if not self.v:
            self.v = [{k: np.zeros_like(a) for k, a in p.items()} for p in self.layers]

    def copy(self) -> "ParamSet":
        dup = lambda seq: [{k: a.copy() for k, a in d.items()} for d in seq]  # noqa: E731
        return ParamSet(dup(self.layers), dup(self.m), dup(self.v), self.step)

    def count(self) -> int:
        return sum(a.size for p in self.layers for a in p.values())


def init_params(specs, rng: np.random.Generator) -> ParamSet:
    """He-style uniform fan-in initialisation, zero biases."""
    layers = []
    for spec in specs:
        if not spec.has_params:
            layers.append({})
            continue
        limit = math.sqrt(6.0 / spec.in_dim)
        w = rng.uniform(-limit, limit, size=(spec.in_dim, spec.out_dim))
        layers.append({"W": w, "b": np.zeros(spec.out_dim)})
    return ParamSet(layers)


class Network:
    """A fixed feed-forward stack of :class:`LayerSpec` layers.

    The output of the final layer is linear unless a ``relu`` spec follows it.
    """

    def __init__(self, specs, params: ParamSet | None = None, seed: int | None = 0):
        self.specs = list(specs)
        self.params = params if params is not None else init_params(self.specs, np.random.default_rng(seed))
        if len(self.params.layers) != len(self.specs):
            raise ShapeError("parameter list does not match layer specs")
        for i, (spec, p) in enumerate(zip(self.specs, self.params.layers)):
            if spec.has_params and (p["W"].shape != (spec.in_dim, spec.out_dim) or p["b"].shape != (spec.out_dim,)):
                raise ShapeError(f"layer {i} parameters do not match {spec}")

    def forward(self, x, upto: int | None = None, keep_cache: bool = False):
        """Run the batch ``x`` through layers ``[0, upto)`` (all by default)."""
        out = np.asarray(x, dtype=np.float64)
        cache = []
        stop = len(self.specs) if upto is None else upto
        for i in range(stop):
            spec, p = self.specs[i], self.params.layers[i]
            if keep_cache:
                cache.append(out)
            if spec.kind == "pointwise-conv":
                if out.ndim != 3:
                    raise ShapeError(f"layer {i}: conv expects (B, T, F), got {out.shape}")
                out = pointwise_conv_forward(out, p["W"], p["b"])
            elif spec.kind == "dense":
                flat = out.reshape(out.shape[0], -1)
                if flat.shape[1] != spec.in_dim:
                    raise ShapeError(f"layer {i}: dense expects {spec.in_dim} inputs, got {flat.shape[1]}")
                out = dense_forward(flat, p["W"], p["b"])
            else:
                out = np.maximum(out, 0.0)
            if not np.all(np.isfinite(out)):
                raise NumericError("non-finite activation", layer=i)
        return (out, cache) if keep_cache else out

    def backward(self, cache, dout):
        grads = [dict() for _ in self.specs]
        for i in range(len(cache) - 1, -1, -1):
            spec, p, x = self.specs[i], self.params.layers[i], cache[i]
            if spec.kind == "pointwise-conv":
                grads[i]["W"] = np.einsum("btf,btc->fc", x, dout)
                grads[i]["b"] = dout.sum(axis=(0, 1))
                dout = dout @ p["W"].T
            elif spec.kind == "dense":
                flat = x.reshape(x.shape[0], -1)
                grads[i]["W"] = flat.T @ dout
                grads[i]["b"] = dout.sum(axis=0)
                dout = (dout @ p["W"].T).reshape(x.shape)
            else:
                dout = dout * (x > 0)
            if not all(np.all(np.isfinite(g)) for g in grads[i].values()) or not np.all(np.isfinite(dout)):
                raise NumericError("non-finite gradient", layer=i)
        return grads

    def __call__(self, x):
        return self.forward(x)


def backprop_gradients(net: Network, inputs, targets, loss_kind: str = "mse"):
    """Return ``(loss_value, grads)`` with grads congruent to ``net.params.layers``."""
    pred, cache = net.forward(inputs, keep_cache=True)
    targets = np.asarray(targets, dtype=np.float64)
    if pred.shape != targets.shape:
        raise ShapeError(f"network output {pred.shape} vs targets {targets.shape}")
    value = loss(pred, targets, loss_kind)
    return value, net.backward(cache, _loss_grad(pred, targets, loss_kind))


def adam_step(params: ParamSet, grads, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> ParamSet:
    """Bias-corrected Adam update, in place. Returns ``params`` for chaining."""
    for i, g in enumerate(grads):
        for k, a in g.items():
            if not np.all(np.isfinite(a)):
                raise NumericError(f"non-finite gradient for {k!r}", layer=i)
            if a.shape != params.layers[i][k].shape:
                raise ShapeError(f"layer {i} gradient {k!r} shape {a.shape} != {params.layers[i][k].shape}")
    params.step += 1
    c1 = 1.0 - beta1**params.step
    c2 = 1.0 - beta2**params.step
    for i, g in enumerate(grads):
        for k, a in g.items():
            m = params.m[i][k]
            v = params.v[i][k]
            m *= beta1
            m += (1.0 - beta1) * a
            v *= beta2
            v += (1.0 - beta2) * a * a
            params.layers[i][k] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 20
    val_fraction: float = 0.1
    loss_kind: str = "mse"


@dataclass
class TrainingLog:
    epochs: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int | None = None

    def __len__(self):
        return len(self.epochs)

    def to_csv(self, path):
        lines = ["epoch,train_loss,val_loss"]
        lines += [f"{e},{t!r},{v!r}" for e, t, v in zip(self.epochs, self.train_loss, self.val_loss)]
        Path(path).write_text("\n".join(lines) + "\n")


def fit(net: Network, x, y, config: TrainConfig, seed: int = 0) -> TrainingLog:
    """Mini-batch Adam with early stopping on the trailing validation slice.

    The validation slice is the last ``val_fraction`` of samples (temporal
    order preserved). Parameters from the best validation epoch are restored.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n < 1:
        raise ValueError("fit needs at least one sample")
    n_val = int(n * config.val_fraction) if n >= 10 else 0
    x_tr, y_tr = x[: n - n_val], y[: n - n_val]
    x_va, y_va = (x[n - n_val:], y[n - n_val:]) if n_val else (x_tr, y_tr)
    rng = np.random.default_rng(seed)
    log = TrainingLog()
    best = math.inf
    best_params = net.params.copy()
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(x_tr))
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            try:
                value, grads = backprop_gradients(net, x_tr[idx], y_tr[idx], config.loss_kind)
                if not math.isfinite(value):
                    raise NumericError("non-finite loss")
                adam_step(net.params, grads, lr=config.lr)
            except NumericError as exc:
                raise TrainingError(f"training diverged: {exc}", epoch) from exc
        try:
            tr = loss(net(x_tr), y_tr, config.loss_kind)
            va = loss(net(x_va), y_va, config.loss_kind)
        except NumericError as exc:
            raise TrainingError(f"training diverged: {exc}", epoch) from exc
        log.epochs.append(epoch)
        log.train_loss.append(tr)
        log.val_loss.append(va)
        if va < best:
            best, stale = va, 0
            best_params = net.params.copy()
            log.best_epoch = epoch
        else:
            stale += 1
            if stale >= config.patience:
                break
    if len(log):
        net.params = best_params
    return log


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(net: Network, path, meta: dict | None = None) -> None:
    """Write a JSON checkpoint. Floats use ``repr`` so reloads are bit-exact."""
    layers = []
    for spec, p in zip(net.specs, net.params.layers):
        entry = {"kind": spec.kind, "in_dim": spec.in_dim, "out_dim": spec.out_dim, "channels": spec.channels}
        if spec.has_params:
            entry["params"] = {
                k: {"shape": list(a.shape), "data": [float(v) for v in a.ravel()]} for k, a in p.items()
            }
        layers.append(entry)
    doc = {"format_version": CHECKPOINT_VERSION, "layers": layers, "meta": meta or {}}
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[Network, dict]:
    doc = json.loads(Path(path).read_text())
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    specs, layers = [], []
    for entry in doc["layers"]:
        specs.append(LayerSpec(entry["kind"], entry["in_dim"], entry["out_dim"], entry.get("channels", 0)))
        layers.append({
            k: np.array(blob["data"], dtype=np.float64).reshape(blob["shape"])
            for k, blob in entry.get("params", {}).items()
        })
    return Network(specs, ParamSet(layers)), doc.get("meta", {})
