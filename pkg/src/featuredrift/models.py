"""The CO2 regressor (pointwise 1D-CNN) and the activation autoencoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Network, ShapeError, TrainConfig, TrainingLog, conv, dense, fit, loss, relu


@dataclass(frozen=True)
class RegressorSpec:
    history: int = 5
    features: int = 5
    conv_channels: int = 32
    hidden: int = 64

    @property
    def activation_size(self) -> int:
        return self.history * self.conv_channels

    def layers(self):
        return [
            conv(self.features, self.conv_channels),
            relu(self.activation_size),
            dense(self.activation_size, self.hidden),
            relu(self.hidden),
            dense(self.hidden, 1),
        ]


@dataclass(frozen=True)
class AutoencoderSpec:
    input_dim: int = 160
    hidden: int = 64
    latent_dim: int = 16

    def __post_init__(self):
        if not 0 < self.latent_dim < self.input_dim:
            raise ValueError("latent_dim must be in (0, input_dim)")

    @property
    def compression(self) -> float:
        return 1.0 - self.latent_dim / self.input_dim

    def layers(self):
        # linear bottleneck; relu on the other hidden layers, linear output
        return [
            dense(self.input_dim, self.hidden),
            relu(self.hidden),
            dense(self.hidden, self.latent_dim),
            dense(self.latent_dim, self.hidden),
            relu(self.hidden),
            dense(self.hidden, self.input_dim),
        ]

    @property
    def encoder_depth(self) -> int:
        return 3


class Regressor:
    """Wraps a :class:`Network` whose first two layers are conv + relu."""

    def __init__(self, spec: RegressorSpec = RegressorSpec(), net: Network | None = None, seed: int = 0):
        self.spec = spec
        self.net = net if net is not None else Network(spec.layers(), seed=seed)

    def _batch(self, windows):
        x = np.asarray(windows, dtype=np.float64)
        single = x.ndim == 2
        if single:
            x = x[None]
        if x.shape[1:] != (self.spec.history, self.spec.features):
            raise ShapeError(f"window shape {x.shape[1:]} != ({self.spec.history}, {self.spec.features})")
        return x, single

    def predict(self, windows):
        """Standardised prediction(s): scalar for one window, ``(N,)`` for a batch."""
        x, single = self._batch(windows)
        out = self.net(x)[:, 0]
        return float(out[0]) if single else out

    def capture_activations(self, windows):
        """Post-relu first-layer outputs, flattened timestep-major to ``history*channels``."""
        x, single = self._batch(windows)
        act = self.net.forward(x, upto=2).reshape(len(x), -1)
        return act[0] if single else act


class Autoencoder:
    def __init__(self, spec: AutoencoderSpec = AutoencoderSpec(), net: Network | None = None, seed: int = 0):
        self.spec = spec
        self.net = net if net is not None else Network(spec.layers(), seed=seed)

    def _batch(self, activations):
        a = np.asarray(activations, dtype=np.float64)
        single = a.ndim == 1
        if single:
            a = a[None]
        if a.ndim != 2 or a.shape[1] != self.spec.input_dim:
            raise ShapeError(f"activation length {a.shape[-1]} != {self.spec.input_dim}")
        return a, single

    def encode(self, activations):
        a, single = self._batch(activations)
        z = self.net.forward(a, upto=self.spec.encoder_depth)
        return z[0] if single else z

    def reconstruct(self, activations):
        a, single = self._batch(activations)
        r = self.net(a)
        return r[0] if single else r

    def encode_reconstruct(self, activations):
        """Return ``(latent, reconstruction, mse)``; batched inputs give per-sample mse."""
        a, single = self._batch(activations)
        z = self.net.forward(a, upto=self.spec.encoder_depth)
        r = z
        for i in range(self.spec.encoder_depth, len(self.net.specs)):
            r = _apply_layer(self.net, i, r)
        mse = np.mean((a - r) ** 2, axis=1)
        if single:
            return z[0], r[0], float(mse[0])
        return z, r, mse


def _apply_layer(net: Network, i: int, x):
    spec, p = net.specs[i], net.params.layers[i]
    if spec.kind == "relu":
        return np.maximum(x, 0.0)
    return x.reshape(x.shape[0], -1) @ p["W"] + p["b"]


def train_regressor(inputs, targets, spec: RegressorSpec = RegressorSpec(),
                    config: TrainConfig | None = None, seed: int = 0) -> tuple[Regressor, TrainingLog]:
    """Train on standardised windows ``(N, history, features)`` and targets ``(N,)`` with MSE."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if len(inputs) < 1:
        raise ValueError("train_regressor needs at least one window")
    model = Regressor(spec, seed=seed)
    y = np.asarray(targets, dtype=np.float64).reshape(-1, 1)
    log = fit(model.net, inputs, y, config or TrainConfig(), seed=seed + 1)
    return model, log


def train_autoencoder(activations, spec: AutoencoderSpec | None = None,
                      config: TrainConfig | None = None, seed: int = 0) -> tuple[Autoencoder, TrainingLog]:
    """Fit the autoencoder to reproduce normal activations (mean squared reconstruction error)."""
    a = np.asarray(activations, dtype=np.float64)
    if a.ndim != 2 or len(a) < 1:
        raise ValueError("train_autoencoder needs a non-empty (N, dim) activation matrix")
    spec = spec or AutoencoderSpec(input_dim=a.shape[1])
    model = Autoencoder(spec, seed=seed)
    log = fit(model.net, a, a, config or TrainConfig(), seed=seed + 1)
    return model, log


def mae(model: Regressor, inputs, targets) -> float:
    return loss(model.predict(inputs), np.asarray(targets, dtype=np.float64), "mae")
