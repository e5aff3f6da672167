"""Layer implementations for the 1-D residual CNN.

Feature maps are float64 arrays of shape ``(batch, length, channels)``.
Each layer caches what its backward pass needs during ``forward`` and
accumulates parameter gradients into ``self.grads``.
"""

from __future__ import annotations

import numpy as np

from ecgbo import kernels
from ecgbo.errors import ConfigError, ShapeError


def he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    kind = "Layer"
    trainable = False

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        return shape

    def config(self) -> dict:
        return {"kind": self.kind}

    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())


class Conv1D(Layer):
    kind = "Conv1D"
    trainable = True

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 5,
                 rng: np.random.Generator | None = None):
        super().__init__()
        if min(in_channels, out_channels, kernel_size) < 1:
            raise ConfigError("Conv1D sizes must be >= 1")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        shape = (kernel_size, in_channels, out_channels)
        if rng is None:
            w = np.zeros(shape)
        else:
            w = he_uniform(rng, shape, kernel_size * in_channels)
        self.params = {"w": w, "b": np.zeros(out_channels)}
        self._x = None

    def forward(self, x, training=False, rng=None):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ShapeError(f"Conv1D expects (B, L, {self.in_channels}), got {x.shape}")
        self._x = x
        return kernels.conv1d_forward(x, self.params["w"], self.params["b"])

    def backward(self, grad):
        if grad.shape != (*self._x.shape[:2], self.out_channels):
            raise ShapeError(f"Conv1D upstream gradient has shape {grad.shape}")
        gx, gw, gb = kernels.conv1d_backward(self._x, self.params["w"], grad)
        self.grads = {"w": gw, "b": gb}
        return gx

    def output_shape(self, shape):
        if shape[-1] != self.in_channels:
            raise ShapeError(f"Conv1D expects {self.in_channels} channels, got {shape[-1]}")
        return (shape[0], self.out_channels)

    def config(self):
        return {"kind": self.kind, "in_channels": self.in_channels,
                "out_channels": self.out_channels, "kernel_size": self.kernel_size}


class MaxPool1D(Layer):
    kind = "MaxPool1D"

    def __init__(self, pool_size: int = 2):
        super().__init__()
        if pool_size < 1:
            raise ConfigError("pool size must be >= 1")
        self.pool_size = pool_size
        self._idx = None
        self._length = None

    def forward(self, x, training=False, rng=None):
        if x.shape[1] < self.pool_size:
            raise ShapeError(f"MaxPool1D: length {x.shape[1]} < pool size {self.pool_size}")
        out, self._idx = kernels.maxpool1d_forward(x, self.pool_size)
        self._length = x.shape[1]
        return out

    def backward(self, grad):
        return kernels.maxpool1d_backward(grad, self._idx, self._length)

    def output_shape(self, shape):
        if shape[0] < self.pool_size:
            raise ShapeError(f"MaxPool1D: length {shape[0]} < pool size {self.pool_size}")
        return (shape[0] // self.pool_size, shape[1])

    def config(self):
        return {"kind": self.kind, "pool_size": self.pool_size}


class ReLU(Layer):
    kind = "ReLU"

    def forward(self, x, training=False, rng=None):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad):
        # subgradient at exactly 0 is taken as 0
        return np.where(self._mask, grad, 0.0)


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by ``1/(1-rate)`` so eval is the identity."""

    kind = "Dropout"

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = float(rate)
        self._mask = None

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ConfigError("Dropout in training mode needs a seeded generator")
        keep = rng.random(x.shape) >= self.rate
        self._mask = keep / (1.0 - self.rate)
        return x * self._mask

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask

    def config(self):
        return {"kind": self.kind, "rate": self.rate}


class Flatten(Layer):
    kind = "Flatten"

    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)

    def output_shape(self, shape):
        return (int(np.prod(shape)),)


class Dense(Layer):
    kind = "Dense"
    trainable = True

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator | None = None):
        super().__init__()
        if min(in_features, out_features) < 1:
            raise ConfigError("Dense sizes must be >= 1")
        self.in_features = in_features
        self.out_features = out_features
        w = np.zeros((in_features, out_features)) if rng is None \
            else he_uniform(rng, (in_features, out_features), in_features)
        self.params = {"w": w, "b": np.zeros(out_features)}

    def forward(self, x, training=False, rng=None):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"Dense expects (B, {self.in_features}), got {x.shape}")
        self._x = x
        return x @ self.params["w"] + self.params["b"]

    def backward(self, grad):
        self.grads = {"w": self._x.T @ grad, "b": grad.sum(axis=0)}
        return grad @ self.params["w"].T

    def output_shape(self, shape):
        if shape != (self.in_features,):
            raise ShapeError(f"Dense expects ({self.in_features},), got {shape}")
        return (self.out_features,)

    def config(self):
        return {"kind": self.kind, "in_features": self.in_features,
                "out_features": self.out_features}


class ResidualAdd(Layer):
    """Adds the output of an earlier layer (``source``) to the current activation.

    ``source`` indexes the network's layer list; -1 means the network input.
    When channel counts differ, a kernel-size-1 projection is applied to the
    shortcut first.
    """

    kind = "ResidualAdd"

    def __init__(self, source: int, projection: Conv1D | None = None):
        super().__init__()
        self.source = source
        self.projection = projection
        if projection is not None:
            if projection.kernel_size != 1:
                raise ConfigError("shortcut projection must have kernel size 1")
            self.params = projection.params
        self.trainable = projection is not None

    def forward_pair(self, main, shortcut, training=False):
        if self.projection is not None:
            shortcut = self.projection.forward(shortcut)
        if main.shape != shortcut.shape:
            raise ShapeError(f"residual add: {main.shape} vs {shortcut.shape}")
        return main + shortcut

    def backward_pair(self, grad):
        g_short = grad
        if self.projection is not None:
            g_short = self.projection.backward(grad)
            self.grads = self.projection.grads
        return grad, g_short

    def output_shape(self, shape):
        return shape

    def config(self):
        cfg = {"kind": self.kind, "source": self.source, "projection": None}
        if self.projection is not None:
            cfg["projection"] = self.projection.config()
        return cfg


class Softmax(Layer):
    """Row-wise softmax; only used at inference, training fuses it into the loss."""

    kind = "Softmax"

    def forward(self, x, training=False, rng=None):
        return softmax(x)

    def backward(self, grad):
        raise NotImplementedError("Softmax backward is fused into softmax_crossentropy")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)
