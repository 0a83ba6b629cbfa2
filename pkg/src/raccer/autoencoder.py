"""Small dense autoencoder over state feature vectors.

Encodes the 9 grid features into a low-dimensional latent used by the
proximity and data-manifold-closeness metrics. Inputs are min-max normalized
per component with the normalization stored inside the model, so callers
always pass raw feature vectors.

Training is full-batch gradient descent with hand-derived gradients, which
keeps the package free of a deep-learning dependency and makes the finite
difference check in the tests meaningful.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .errors import ConfigError

logger = logging.getLogger(__name__)

_ACTIVATIONS = ("tanh", "identity")


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    return np.tanh(z) if kind == "tanh" else z


def _act_grad(a: np.ndarray, kind: str) -> np.ndarray:
    # derivative expressed through the activation value
    return 1.0 - a * a if kind == "tanh" else np.ones_like(a)


class MlpAutoencoder:
    """Mirror-symmetric MLP: input -> hidden -> latent -> hidden -> input.

    Hidden layers use the configured activation, the output layer is linear.
    """

    def __init__(self, layer_sizes: list[int], activation: str = "tanh",
                 seed: int = 0):
        if len(layer_sizes) != 5:
            raise ConfigError("layer_sizes must list five widths "
                              "(input, hidden, latent, hidden, input)")
        if layer_sizes[0] != layer_sizes[-1]:
            raise ConfigError("input and output widths must match")
        if any(n <= 0 for n in layer_sizes):
            raise ConfigError("layer widths must be positive")
        if activation not in _ACTIVATIONS:
            raise ConfigError(f"activation must be one of {_ACTIVATIONS}")
        self.layer_sizes = list(layer_sizes)
        self.activation = activation
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            r = np.sqrt(6.0 / (n_in + n_out))
            self.weights.append(rng.uniform(-r, r, size=(n_in, n_out)))
            self.biases.append(np.zeros(n_out))
        self.norm_lo = np.zeros(layer_sizes[0])
        self.norm_scale = np.ones(layer_sizes[0])

    # ---- normalization -------------------------------------------------

    def fit_normalization(self, data: np.ndarray) -> None:
        lo = data.min(axis=0).astype(np.float64)
        hi = data.max(axis=0).astype(np.float64)
        scale = hi - lo
        scale[scale == 0.0] = 1.0  # constant components map to 0
        self.norm_lo = lo
        self.norm_scale = scale

    def normalize(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self.norm_lo) / self.norm_scale

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        return x * self.norm_scale + self.norm_lo

    # ---- forward pass --------------------------------------------------

    def _forward(self, x: np.ndarray) -> list[np.ndarray]:
        """Activations per layer for already-normalized input."""
        acts = [x]
        a = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            a = z if i == last else _act(z, self.activation)
            acts.append(a)
        return acts

    def encode(self, features: np.ndarray) -> np.ndarray:
        """Latent vector(s) for raw feature input."""
        x = self.normalize(features)
        a = x
        for i in range(2):
            a = _act(a @ self.weights[i] + self.biases[i], self.activation)
        return a

    def reconstruct(self, features: np.ndarray) -> np.ndarray:
        """Round trip through the bottleneck, in normalized coordinates."""
        return self._forward(self.normalize(features))[-1]

    def decode(self, latent: np.ndarray) -> np.ndarray:
        """Normalized-space reconstruction from a latent vector."""
        a = _act(latent @ self.weights[2] + self.biases[2], self.activation)
        return a @ self.weights[3] + self.biases[3]

    def reconstruction_error(self, features: np.ndarray) -> float:
        """Squared reconstruction distance in normalized space."""
        x = self.normalize(features)
        out = self._forward(x)[-1]
        return float(np.sum((out - x) ** 2, axis=-1))

    def reconstruction_errors(self, features: np.ndarray) -> np.ndarray:
        """Row-wise squared reconstruction distances for a batch."""
        x = self.normalize(np.asarray(features, dtype=np.float64))
        out = self._forward(x)[-1]
        return np.sum((out - x) ** 2, axis=-1)

    # ---- training ------------------------------------------------------

    def loss_and_gradients(self, data: np.ndarray
                           ) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
        """Mean squared reconstruction loss and its parameter gradients.

        `data` is raw features; the target is its normalized image.
        """
        x = self.normalize(data)
        acts = self._forward(x)
        n = x.shape[0]
        diff = acts[-1] - x
        loss = float(np.sum(diff * diff) / n)
        g = 2.0 * diff / n
        grads_w: list[np.ndarray] = [np.empty(0)] * len(self.weights)
        grads_b: list[np.ndarray] = [np.empty(0)] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = acts[i].T @ g
            grads_b[i] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.weights[i].T) * _act_grad(acts[i], self.activation)
        return loss, grads_w, grads_b

    def parameters(self) -> np.ndarray:
        """Flat copy of every weight and bias, in layer order."""
        return np.concatenate([p.ravel() for p in self.weights + self.biases])

    def set_parameters(self, flat: np.ndarray) -> None:
        pos = 0
        for plist in (self.weights, self.biases):
            for i, p in enumerate(plist):
                plist[i] = flat[pos:pos + p.size].reshape(p.shape).copy()
                pos += p.size
        if pos != flat.size:
            raise ValueError("parameter vector has the wrong length")

    # ---- persistence ---------------------------------------------------

    def save(self, path: str | Path) -> None:
        doc = {
            "kind": "autoencoder",
            "layer_sizes": self.layer_sizes,
            "activation": self.activation,
            "seed": self.seed,
            "norm_lo": self.norm_lo.tolist(),
            "norm_scale": self.norm_scale.tolist(),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }
        Path(path).write_text(json.dumps(doc, indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "MlpAutoencoder":
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"autoencoder file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"autoencoder file is not valid JSON: {exc}") from exc
        if doc.get("kind") != "autoencoder":
            raise ConfigError(f"{path} is not an autoencoder file")
        model = cls(doc["layer_sizes"], doc["activation"], doc.get("seed", 0))
        model.weights = [np.array(w, dtype=np.float64) for w in doc["weights"]]
        model.biases = [np.array(b, dtype=np.float64) for b in doc["biases"]]
        model.norm_lo = np.array(doc["norm_lo"], dtype=np.float64)
        model.norm_scale = np.array(doc["norm_scale"], dtype=np.float64)
        return model


def train_autoencoder(data: np.ndarray, hidden: int = 16, latent: int = 4,
                      epochs: int = 2000, lr: float = 1e-2,
                      activation: str = "tanh", seed: int = 0
                      ) -> tuple[MlpAutoencoder, list[float]]:
    """Fit on raw feature rows; returns the model and the per-epoch loss curve."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ConfigError("training data must be a non-empty 2-d array")
    if epochs < 0:
        raise ConfigError("epochs must be non-negative")
    if lr <= 0:
        raise ConfigError("learning rate must be positive")
    d = data.shape[1]
    model = MlpAutoencoder([d, hidden, latent, hidden, d], activation, seed)
    model.fit_normalization(data)
    history: list[float] = []
    for _ in range(epochs):
        loss, gw, gb = model.loss_and_gradients(data)
        history.append(loss)
        for i in range(len(model.weights)):
            model.weights[i] -= lr * gw[i]
            model.biases[i] -= lr * gb[i]
    final, _, _ = model.loss_and_gradients(data)
    history.append(final)
    logger.info("autoencoder trained: %d epochs, final loss %.6g", epochs, final)
    return model, history


def finite_difference_gradients(model: MlpAutoencoder, data: np.ndarray,
                                step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of the training loss, for checking."""
    base = model.parameters()
    out = np.empty_like(base)
    for j in range(base.size):
        probe = base.copy()
        probe[j] = base[j] + step
        model.set_parameters(probe)
        hi, _, _ = model.loss_and_gradients(data)
        probe[j] = base[j] - step
        model.set_parameters(probe)
        lo, _, _ = model.loss_and_gradients(data)
        out[j] = (hi - lo) / (2.0 * step)
    model.set_parameters(base)
    return out


def gradient_check(model: MlpAutoencoder, data: np.ndarray,
                   step: float = 1e-5) -> float:
    """Relative disagreement between analytic and numeric gradients.

    Computed as ||a - f|| / max(||a||, ||f||); zero means exact agreement.
    """
    _, gw, gb = model.loss_and_gradients(data)
    analytic = np.concatenate([g.ravel() for g in gw + gb])
    numeric = finite_difference_gradients(model, data, step)
    denom = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric)) / denom
