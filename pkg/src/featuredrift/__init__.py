"""Feature drift explanation for multivariate sensor-stream regressors."""

__version__ = "0.1.0"

from .adwin import Adwin  # noqa: E402
from .data import FEATURES, Scaler, WindowSet  # noqa: E402
from .drift import DriftScenario, inject_outlier_drift, segment_stream  # noqa: E402
from .fde import (  # noqa: E402
    LatentReference,
    build_latent_reference,
    channel_reconstruction_diff,
    counterfactual_replace,
    localize_drift,
    minkowski_mean_distance,
)
from .models import Autoencoder, AutoencoderSpec, Regressor, RegressorSpec  # noqa: E402

__all__ = [
    "Adwin", "FEATURES", "Scaler", "WindowSet", "DriftScenario", "inject_outlier_drift", "segment_stream",
    "LatentReference", "build_latent_reference", "channel_reconstruction_diff", "counterfactual_replace",
    "localize_drift", "minkowski_mean_distance", "Autoencoder", "AutoencoderSpec", "Regressor", "RegressorSpec",
]
