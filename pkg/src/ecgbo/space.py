"""Search space over the tunable hyperparameters and its unit-cube encoding."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.stats import qmc

from ecgbo.errors import ConfigError
from ecgbo.model import HyperParams


@dataclass(frozen=True)
class Dimension:
    name: str
    kind: str  # "real_log", "real" or "integer"
    low: float
    high: float

    def __post_init__(self):
        if self.kind not in ("real_log", "real", "integer"):
            raise ConfigError(f"{self.name}: unknown dimension kind {self.kind!r}")
        if not self.low < self.high:
            raise ConfigError(f"{self.name}: low must be < high")
        if self.kind == "real_log" and self.low <= 0:
            raise ConfigError(f"{self.name}: log-scaled bounds must be positive")

    def to_unit(self, value: float) -> float:
        tol = 1e-9 * max(abs(self.low), abs(self.high))
        if not self.low - tol <= value <= self.high + tol:
            raise ConfigError(f"{self.name}={value} outside [{self.low}, {self.high}]")
        if self.kind == "real_log":
            u = (math.log(value) - math.log(self.low)) / (math.log(self.high) - math.log(self.low))
        else:
            u = (value - self.low) / (self.high - self.low)
        return min(1.0, max(0.0, u))

    def from_unit(self, u: float):
        u = min(1.0, max(0.0, float(u)))
        if self.kind != "integer" and u in (0.0, 1.0):
            return self.low if u == 0.0 else self.high  # exact bounds, no exp/log round-off
        if self.kind == "real_log":
            lo, hi = math.log(self.low), math.log(self.high)
            return min(self.high, max(self.low, math.exp(lo + u * (hi - lo))))
        if self.kind == "integer":
            v = math.floor(self.low + u * (self.high - self.low) + 0.5)
            return int(min(self.high, max(self.low, v)))
        return self.low + u * (self.high - self.low)


class SearchSpace:
    def __init__(self, dimensions: list[Dimension]):
        names = [d.name for d in dimensions]
        if len(set(names)) != len(names):
            raise ConfigError("dimension names must be unique")
        if not dimensions:
            raise ConfigError("search space needs at least one dimension")
        self.dimensions = list(dimensions)

    def __len__(self) -> int:
        return len(self.dimensions)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dimensions]

    def encode(self, params: Mapping | HyperParams) -> np.ndarray:
        if isinstance(params, HyperParams):
            params = params.as_dict()
        try:
            return np.array([d.to_unit(params[d.name]) for d in self.dimensions])
        except KeyError as exc:
            raise ConfigError(f"missing value for dimension {exc}") from None

    def decode(self, u) -> dict:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (len(self),):
            raise ConfigError(f"expected a {len(self)}-vector, got shape {u.shape}")
        return {d.name: d.from_unit(x) for d, x in zip(self.dimensions, u)}

    def snap(self, u) -> np.ndarray:
        """Project a unit point onto what is actually evaluated (integers rounded)."""
        return self.encode(self.decode(u))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` Latin-hypercube points in the unit cube, shape ``(n, dims)``."""
        if n < 1:
            raise ConfigError("sample size must be >= 1")
        return qmc.LatinHypercube(d=len(self), seed=rng).random(n)

    def to_config(self) -> list[dict]:
        return [{"name": d.name, "kind": d.kind, "low": d.low, "high": d.high}
                for d in self.dimensions]

    @classmethod
    def from_config(cls, items: list[dict]) -> "SearchSpace":
        try:
            return cls([Dimension(i["name"], i["kind"], float(i["low"]), float(i["high"]))
                        for i in items])
        except KeyError as exc:
            raise ConfigError(f"search-space entry missing {exc}") from None


def default_space() -> SearchSpace:
    """Drop rate, dense/conv layer counts, learning rate and Adam decay."""
    return SearchSpace([
        Dimension("drop_rate", "real_log", 1e-2, 1e-1),
        Dimension("n_dense", "integer", 1, 6),
        Dimension("n_conv", "integer", 1, 6),
        Dimension("learning_rate", "real_log", 1e-3, 1e-1),
        Dimension("adam_decay", "real_log", 1e-6, 1e-5),
    ])


def space_bounds(space: SearchSpace) -> dict:
    return {d.name: (d.low, d.high) for d in space.dimensions}
