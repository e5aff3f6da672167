"""Sequential network with a single-shortcut residual connection and weight I/O."""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from ecgbo.errors import ConfigError, DataError, ShapeError
from ecgbo.nn import layers as L

WEIGHTS_FORMAT = "ecgbo-weights"
WEIGHTS_VERSION = 1


def layer_from_config(cfg: dict, rng: np.random.Generator | None = None) -> L.Layer:
    kind = cfg["kind"]
    if kind == "Conv1D":
        return L.Conv1D(cfg["in_channels"], cfg["out_channels"], cfg.get("kernel_size", 5), rng=rng)
    if kind == "Dense":
        return L.Dense(cfg["in_features"], cfg["out_features"], rng=rng)
    if kind == "MaxPool1D":
        return L.MaxPool1D(cfg.get("pool_size", 2))
    if kind == "Dropout":
        return L.Dropout(cfg["rate"])
    if kind == "ReLU":
        return L.ReLU()
    if kind == "Flatten":
        return L.Flatten()
    if kind == "Softmax":
        return L.Softmax()
    if kind == "ResidualAdd":
        proj = cfg.get("projection")
        proj_layer = layer_from_config(proj, rng) if proj else None
        return L.ResidualAdd(cfg["source"], proj_layer)
    raise ConfigError(f"unknown layer kind {kind!r}")


class Network:
    """Ordered layers; a trailing :class:`Softmax` is skipped when producing logits."""

    def __init__(self, layers: list[L.Layer], input_shape: tuple[int, int]):
        self.layers = layers
        self.input_shape = tuple(input_shape)
        for i, layer in enumerate(layers):
            if isinstance(layer, L.ResidualAdd) and not -1 <= layer.source < i:
                raise ConfigError(f"residual source {layer.source} must precede layer {i}")
        self.shapes()  # validates the whole chain

    @classmethod
    def from_configs(cls, configs: list[dict], input_shape, seed: int | None = None):
        rng = None if seed is None else np.random.default_rng(seed)
        return cls([layer_from_config(c, rng) for c in configs], input_shape)

    def shapes(self) -> list[tuple[int, ...]]:
        """Per-sample output shape of every layer."""
        shapes = [self.input_shape]
        for layer in self.layers:
            if isinstance(layer, L.ResidualAdd):
                short = shapes[layer.source + 1]
                if layer.projection is not None:
                    short = layer.projection.output_shape(short)
                if short != shapes[-1]:
                    raise ShapeError(f"residual add: {shapes[-1]} vs shortcut {short}")
            shapes.append(layer.output_shape(shapes[-1]))
        return shapes[1:]

    @property
    def _logit_layers(self):
        n = len(self.layers)
        if n and isinstance(self.layers[-1], L.Softmax):
            n -= 1
        return self.layers[:n]

    def logits(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[:, :, None]
        if x.shape[1:] != self.input_shape:
            raise ShapeError(f"network expects (B, {self.input_shape}), got {x.shape}")
        acts = [x]
        for layer in self._logit_layers:
            if isinstance(layer, L.ResidualAdd):
                out = layer.forward_pair(acts[-1], acts[layer.source + 1], training)
            else:
                out = layer.forward(acts[-1], training, rng)
            acts.append(out)
        return acts[-1]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Backpropagate d(loss)/d(logits); returns d(loss)/d(input)."""
        layers = self._logit_layers
        pending: dict[int, np.ndarray] = {}
        g = grad
        for i in range(len(layers) - 1, -1, -1):
            extra = pending.pop(i + 1, None)
            if extra is not None:
                g = g + extra
            layer = layers[i]
            if isinstance(layer, L.ResidualAdd):
                g, g_short = layer.backward_pair(g)
                key = layer.source + 1
                pending[key] = pending[key] + g_short if key in pending else g_short
            else:
                g = layer.backward(g)
        extra = pending.pop(0, None)
        return g if extra is None else g + extra

    def predict_proba(self, x: np.ndarray, batch_size: int = 512) -> np.ndarray:
        out = [L.softmax(self.logits(x[i:i + batch_size])) for i in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.empty((0, self.shapes()[-1][0]))

    def predict(self, x: np.ndarray, batch_size: int = 512) -> np.ndarray:
        return self.predict_proba(x, batch_size).argmax(axis=1)

    # parameters --------------------------------------------------------
    def parameters(self) -> dict[str, np.ndarray]:
        """Flat ``{"<layer>.<name>": array}`` view of trainable weights (same objects)."""
        return {f"{i}.{k}": v for i, layer in enumerate(self.layers)
                for k, v in layer.params.items()}

    def gradients(self) -> dict[str, np.ndarray]:
        return {f"{i}.{k}": layer.grads[k] for i, layer in enumerate(self.layers)
                for k in layer.params}

    def get_weights(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.parameters().items()}

    def set_weights(self, weights: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        if params.keys() != weights.keys():
            raise ShapeError("weight set does not match network layers")
        for k, v in params.items():
            if v.shape != weights[k].shape:
                raise ShapeError(f"{k}: expected {v.shape}, got {weights[k].shape}")
            v[...] = weights[k]

    def n_params(self) -> int:
        return sum(v.size for v in self.parameters().values())

    def configs(self) -> list[dict]:
        return [layer.config() for layer in self.layers]

    # serialization -----------------------------------------------------
    def to_dict(self, extra: dict | None = None) -> dict:
        weights = []
        for i, layer in enumerate(self.layers):
            if not layer.params:
                continue
            weights.append({
                "layer": i,
                "kind": layer.kind,
                "arrays": {k: {"shape": list(v.shape),
                               "data": base64.b64encode(v.astype("<f8").tobytes()).decode("ascii")}
                           for k, v in layer.params.items()},
            })
        doc = {"format": WEIGHTS_FORMAT, "version": WEIGHTS_VERSION,
               "input_shape": list(self.input_shape), "layers": self.configs(),
               "weights": weights}
        if extra:
            doc["meta"] = extra
        return doc

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        Path(path).write_text(json.dumps(self.to_dict(extra), indent=1) + "\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "Network":
        if doc.get("format") != WEIGHTS_FORMAT:
            raise DataError("not an ecgbo weight file")
        if doc.get("version") != WEIGHTS_VERSION:
            raise DataError(f"unsupported weight file version {doc.get('version')}")
        net = cls.from_configs(doc["layers"], tuple(doc["input_shape"]))
        for entry in doc["weights"]:
            layer = net.layers[entry["layer"]]
            for k, arr in entry["arrays"].items():
                data = np.frombuffer(base64.b64decode(arr["data"]), dtype="<f8")
                layer.params[k][...] = data.reshape(arr["shape"])
        return net

    @classmethod
    def load(cls, path: str | Path) -> "Network":
        return cls.from_dict(json.loads(Path(path).read_text()))
