"""Experiment configuration: one JSON document, merged over built-in defaults.

Relative paths inside the document resolve against the document's own
directory. Command-line flags are applied on top by the CLI.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ecgbo.bo import BOConfig
from ecgbo.ecg.beats import BEAT_CLASSES
from ecgbo.errors import ConfigError
from ecgbo.model import DEFAULT_HYPERPARAMS, ArchConfig, HyperParams
from ecgbo.nn.train import TrainConfig
from ecgbo.pso import PSOConfig
from ecgbo.space import SearchSpace, default_space, space_bounds

FITNESS_METRICS = ("val_accuracy", "val_loss")


def _settings(obj) -> dict:
    # seeds come from the experiment seed, not from these sections
    return {k: v for k, v in asdict(obj).items() if k not in ("seed", "trial_seed")}


DEFAULTS: dict = {
    "seed": 0,
    "out": "runs/default",
    "dataset": {
        "format": "csv",          # "csv" or "wfdb212"
        "csv": [],                # segment files for the csv format
        "directory": ".",         # base directory for wfdb212 record files
        "records": [],            # wfdb212 record entries
        "window": 250,
        "channel": 0,
        "classes": list(BEAT_CLASSES),
        "normalize": True,
        "max_beats": None,        # stratified subset size; None keeps everything
    },
    "split": {"fractions": [0.70, 0.15, 0.15], "seed": None},
    "arch": {},
    "train": {"max_epochs": 100, "patience": 10, "batch_size": 128},
    "hyperparams": DEFAULT_HYPERPARAMS.as_dict(),
    "search_space": {},           # name -> {"low": .., "high": ..}
    "bo": _settings(BOConfig()),
    "pso": _settings(PSOConfig()),
    "fitness": "val_accuracy",
}

RECORD_KEYS = ("id", "signal", "annotations", "sample_count", "channel_count",
               "gain", "sampling_rate")


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {where}{k!r}")
        if isinstance(base[k], dict) and base[k] and isinstance(v, dict):
            out[k] = _merge(base[k], v, f"{where}{k}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "ExperimentConfig":
        if path is None:
            return cls()
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        cfg = cls(_merge(DEFAULTS, doc), path.resolve().parent)
        cfg.validate()
        return cfg

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        cfg = cls(_merge(DEFAULTS, doc), Path(base_dir).resolve())
        cfg.validate()
        return cfg

    def override(self, *, seed: int | None = None, out: str | None = None) -> "ExperimentConfig":
        if seed is not None:
            self.raw["seed"] = int(seed)
        if out is not None:
            self.raw["out"] = str(Path(out).resolve())
        return self

    def resolve(self, p: str | Path) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    # typed views -------------------------------------------------------
    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def out_dir(self) -> Path:
        return self.resolve(self.raw["out"])

    @property
    def dataset(self) -> dict:
        return self.raw["dataset"]

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(self.dataset["classes"])

    @property
    def split_fractions(self) -> tuple[float, float, float]:
        return tuple(float(f) for f in self.raw["split"]["fractions"])

    @property
    def split_seed(self) -> int:
        s = self.raw["split"]["seed"]
        return self.seed if s is None else int(s)

    @property
    def arch(self) -> ArchConfig:
        return ArchConfig.from_dict(self.raw["arch"])

    @property
    def train_config(self) -> TrainConfig:
        t = self.raw["train"]
        return TrainConfig(max_epochs=int(t["max_epochs"]), patience=int(t["patience"]),
                           batch_size=int(t["batch_size"]))

    @property
    def hyperparams(self) -> HyperParams:
        return HyperParams.from_dict(self.raw["hyperparams"])

    @property
    def space(self) -> SearchSpace:
        base = default_space()
        overrides = self.raw["search_space"]
        unknown = set(overrides) - set(base.names)
        if unknown:
            raise ConfigError(f"unknown search-space dimensions: {sorted(unknown)}")
        items = base.to_config()
        for item in items:
            item.update(overrides.get(item["name"], {}))
        return SearchSpace.from_config(items)

    def bo_config(self) -> BOConfig:
        try:
            return BOConfig(**{**self.raw["bo"], "seed": self.seed, "trial_seed": self.seed})
        except TypeError as exc:
            raise ConfigError(f"bad bo settings: {exc}") from None

    def pso_config(self) -> PSOConfig:
        try:
            return PSOConfig(**{**self.raw["pso"], "seed": self.seed, "trial_seed": self.seed})
        except TypeError as exc:
            raise ConfigError(f"bad pso settings: {exc}") from None

    @property
    def fitness_metric(self) -> str:
        return self.raw["fitness"]

    def validate(self) -> None:
        ds = self.dataset
        if ds["format"] not in ("csv", "wfdb212"):
            raise ConfigError(f"dataset.format must be 'csv' or 'wfdb212', got {ds['format']!r}")
        if ds["format"] == "csv":
            files = [ds["csv"]] if isinstance(ds["csv"], str) else list(ds["csv"])
            if not files:
                raise ConfigError("dataset.csv must name at least one segment file")
            for f in files:
                if not self.resolve(f).exists():
                    raise ConfigError(f"dataset file not found: {self.resolve(f)}")
        else:
            if not ds["records"]:
                raise ConfigError("dataset.records must list at least one record")
            for i, rec in enumerate(ds["records"]):
                missing = [k for k in ("signal", "annotations", "sample_count") if k not in rec]
                if missing:
                    raise ConfigError(f"dataset.records[{i}] missing {missing}")
                unknown = set(rec) - set(RECORD_KEYS)
                if unknown:
                    raise ConfigError(f"dataset.records[{i}] unknown keys {sorted(unknown)}")
                for key in ("signal", "annotations"):
                    p = self.resolve(Path(ds["directory"]) / rec[key])
                    if not p.exists():
                        raise ConfigError(f"dataset.records[{i}].{key} not found: {p}")
        fr = self.raw["split"]["fractions"]
        if len(fr) != 3 or min(fr) < 0 or abs(sum(fr) - 1.0) > 1e-9:
            raise ConfigError("split.fractions must be three non-negative numbers summing to 1")
        if int(ds["window"]) < 1:
            raise ConfigError("dataset.window must be >= 1")
        if len(set(self.classes)) != len(self.classes) or len(self.classes) < 2:
            raise ConfigError("dataset.classes must be >= 2 distinct labels")
        if self.fitness_metric not in FITNESS_METRICS:
            raise ConfigError(f"fitness must be one of {FITNESS_METRICS}")
        _ = self.arch, self.train_config  # raise early on bad values
        self.hyperparams.validate(space_bounds(self.space))
