"""Translate a hyperparameter point into the residual 1-D CNN layer sequence.

Block layout (``n`` = conv layers per block, ``D`` = hidden dense layers)::

    n x (conv, relu) -> maxpool -> dropout                 block 0
    n x (conv, relu) -> add(shortcut) -> maxpool -> dropout   block 1, residual
    5 x [n x (conv, relu) -> maxpool -> dropout]            blocks 2..6
    flatten -> D x (dense, relu) -> dense(classes) -> softmax
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ecgbo.errors import ConfigError
from ecgbo.nn import Adam, Network

HYPERPARAM_BOUNDS = {
    "drop_rate": (1e-2, 1e-1),
    "n_dense": (1, 6),
    "n_conv": (1, 6),
    "learning_rate": (1e-3, 1e-1),
    "adam_decay": (1e-6, 1e-5),
}


@dataclass(frozen=True)
class HyperParams:
    drop_rate: float
    n_dense: int
    n_conv: int
    learning_rate: float
    adam_decay: float

    def validate(self, bounds: dict | None = None) -> "HyperParams":
        bounds = bounds or HYPERPARAM_BOUNDS
        for name, (lo, hi) in bounds.items():
            v = getattr(self, name)
            # relative slack so values decoded from the log scale pass at the edges
            tol = 1e-9 * max(abs(lo), abs(hi))
            if not lo - tol <= v <= hi + tol:
                raise ConfigError(f"{name}={v} outside [{lo}, {hi}]")
        if int(self.n_dense) != self.n_dense or int(self.n_conv) != self.n_conv:
            raise ConfigError("layer counts must be integers")
        return self

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "HyperParams":
        try:
            return cls(drop_rate=float(d["drop_rate"]), n_dense=int(d["n_dense"]),
                       n_conv=int(d["n_conv"]), learning_rate=float(d["learning_rate"]),
                       adam_decay=float(d["adam_decay"]))
        except KeyError as exc:
            raise ConfigError(f"missing hyperparameter {exc}") from None


# Hand-tuned level-1 configuration: three conv layers per block, two hidden
# dense layers before the classifier.
DEFAULT_HYPERPARAMS = HyperParams(drop_rate=0.05, n_dense=2, n_conv=3,
                                  learning_rate=1e-3, adam_decay=1e-6)
# Reported optimum for MIT-BIH.
MITBIH_OPTIMUM = HyperParams(drop_rate=0.010738, n_dense=1, n_conv=3,
                             learning_rate=0.001832, adam_decay=6e-6)


@dataclass(frozen=True)
class ArchConfig:
    """Architecture settings the hyperparameter search leaves fixed."""

    n_blocks: int = 7
    residual_block: int = 1
    base_filters: int = 32
    max_filters: int = 256
    kernel_size: int = 5
    pool_size: int = 2
    dense_units: int = 64

    def filters(self, block: int) -> int:
        return min(self.base_filters * 2 ** block, self.max_filters)

    @classmethod
    def from_dict(cls, d: dict | None) -> "ArchConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown architecture keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ModelSpec:
    layers: list[dict]
    input_length: int
    class_count: int
    residual_index: int
    hyperparams: HyperParams
    arch: ArchConfig = field(default_factory=ArchConfig)

    @property
    def trainable_count(self) -> int:
        n = sum(c["kind"] in ("Conv1D", "Dense") for c in self.layers)
        return n + sum(1 for c in self.layers if c["kind"] == "ResidualAdd" and c["projection"])

    def to_dict(self) -> dict:
        return {"input_length": self.input_length, "class_count": self.class_count,
                "residual_index": self.residual_index,
                "hyperparams": self.hyperparams.as_dict(), "arch": asdict(self.arch),
                "layers": self.layers}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(layers=d["layers"], input_length=d["input_length"],
                   class_count=d["class_count"], residual_index=d["residual_index"],
                   hyperparams=HyperParams.from_dict(d["hyperparams"]),
                   arch=ArchConfig.from_dict(d["arch"]))

    def instantiate(self, seed: int = 0) -> tuple[Network, Adam]:
        """Fresh network (He-uniform weights from ``seed``) and its optimizer."""
        net = Network.from_configs(self.layers, (self.input_length, 1), seed=seed)
        opt = Adam(learning_rate=self.hyperparams.learning_rate,
                   decay=self.hyperparams.adam_decay)
        return net, opt


def min_input_length(arch: ArchConfig) -> int:
    return arch.pool_size ** arch.n_blocks


def build_model(h: HyperParams, input_length: int, class_count: int = 5,
                arch: ArchConfig | None = None, bounds: dict | None = None) -> ModelSpec:
    arch = arch or ArchConfig()
    h.validate(bounds)
    if class_count < 2:
        raise ConfigError("need at least two classes")
    if not 0 <= arch.residual_block < arch.n_blocks:
        raise ConfigError("residual block index outside the block range")
    if input_length < min_input_length(arch):
        raise ConfigError(f"input length {input_length} too short for {arch.n_blocks} "
                          f"pooling stages of size {arch.pool_size} "
                          f"(need >= {min_input_length(arch)})")

    layers: list[dict] = []
    channels = 1
    residual_index = -1
    for block in range(arch.n_blocks):
        f = arch.filters(block)
        block_in = channels
        source = len(layers) - 1
        for _ in range(h.n_conv):
            layers.append({"kind": "Conv1D", "in_channels": channels, "out_channels": f,
                           "kernel_size": arch.kernel_size})
            layers.append({"kind": "ReLU"})
            channels = f
        if block == arch.residual_block:
            proj = None
            if block_in != f:
                proj = {"kind": "Conv1D", "in_channels": block_in, "out_channels": f,
                        "kernel_size": 1}
            residual_index = len(layers)
            layers.append({"kind": "ResidualAdd", "source": source, "projection": proj})
        layers.append({"kind": "MaxPool1D", "pool_size": arch.pool_size})
        layers.append({"kind": "Dropout", "rate": h.drop_rate})

    length = input_length // arch.pool_size ** arch.n_blocks
    width = length * channels
    layers.append({"kind": "Flatten"})
    for _ in range(h.n_dense):
        layers.append({"kind": "Dense", "in_features": width, "out_features": arch.dense_units})
        layers.append({"kind": "ReLU"})
        width = arch.dense_units
    layers.append({"kind": "Dense", "in_features": width, "out_features": class_count})
    layers.append({"kind": "Softmax"})
    return ModelSpec(layers, input_length, class_count, residual_index, h, arch)


def describe_model(spec: ModelSpec) -> str:
    """One line per layer: index, kind, per-sample output shape, parameter count."""
    net = Network.from_configs(spec.layers, (spec.input_length, 1))
    shapes = net.shapes()
    lines = [f"{'#':>3}  {'layer':<28} {'output':<14} {'params':>10}"]
    for i, (layer, shape) in enumerate(zip(net.layers, shapes)):
        name = layer.kind
        cfg = layer.config()
        if layer.kind == "Conv1D":
            name += f"({cfg['out_channels']}, k={cfg['kernel_size']})"
        elif layer.kind == "Dense":
            name += f"({cfg['out_features']})"
        elif layer.kind == "Dropout":
            name += f"({cfg['rate']:.6g})"
        elif layer.kind == "ResidualAdd":
            name += f"(from {cfg['source']}{', proj' if cfg['projection'] else ''})"
        lines.append(f"{i:>3}  {name:<28} {str(tuple(shape)):<14} {layer.n_params():>10}")
    lines.append(f"total parameters: {net.n_params()}")
    return "\n".join(lines)


def count_params(spec: ModelSpec) -> int:
    return Network.from_configs(spec.layers, (spec.input_length, 1)).n_params()


def zeros_forward(spec: ModelSpec, seed: int = 0, batch: int = 1) -> np.ndarray:
    net, _ = spec.instantiate(seed)
    return net.logits(np.zeros((batch, spec.input_length, 1)))
