"""Trial records and the append-only JSONL trial log shared by BO and PSO.

``trials.jsonl`` holds one JSON object per evaluated point and is written
deterministically (no timestamps), so identical runs produce identical
files. Wall-clock times go to a sidecar ``<log>.timing.csv``.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ecgbo.errors import DataError, StateError

log = logging.getLogger(__name__)


@dataclass
class FitnessResult:
    objective: float
    val_accuracy: float | None = None
    history: list[dict] | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class TrialRecord:
    index: int
    params: dict
    unit_point: list[float]
    objective: float
    source: str
    seed: int
    val_accuracy: float | None = None
    history: list[dict] | None = None
    gp: dict | None = None
    error: str | None = None
    wall_time_s: float = 0.0

    def to_json(self) -> str:
        doc = {"index": self.index, "source": self.source, "seed": self.seed,
               "params": self.params, "unit_point": self.unit_point,
               "objective": self.objective, "val_accuracy": self.val_accuracy,
               "error": self.error, "gp": self.gp, "history": self.history}
        return json.dumps(doc, sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> "TrialRecord":
        d = json.loads(line)
        return cls(index=d["index"], params=d["params"], unit_point=d["unit_point"],
                   objective=d["objective"], source=d["source"], seed=d["seed"],
                   val_accuracy=d.get("val_accuracy"), history=d.get("history"),
                   gp=d.get("gp"), error=d.get("error"))


def best_so_far(records: list[TrialRecord]) -> list[float]:
    out, best = [], np.inf
    for r in records:
        best = min(best, r.objective)
        out.append(best)
    return out


def best_record(records: list[TrialRecord]) -> TrialRecord:
    """Lowest objective; earliest index wins ties."""
    if not records:
        raise StateError("no trials recorded")
    return min(records, key=lambda r: (r.objective, r.index))


def load_trials(path: str | Path) -> list[TrialRecord]:
    """Read completed records; a torn final line from a crash is ignored."""
    path = Path(path)
    if not path.exists():
        return []
    records = []
    lines = path.read_text().split("\n")
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = TrialRecord.from_json(line)
        except (json.JSONDecodeError, KeyError) as exc:
            if lineno >= len(lines) - 1:
                log.warning("%s: dropping incomplete final record", path)
                break
            raise DataError(f"{path}:{lineno}: corrupt trial record ({exc})") from None
        if rec.index != len(records):
            raise DataError(f"{path}:{lineno}: expected trial {len(records)}, found {rec.index}")
        records.append(rec)
    return records


def _to_result(value) -> FitnessResult:
    if isinstance(value, FitnessResult):
        return value
    return FitnessResult(objective=float(value))


class TrialRunner:
    """Evaluates points in order, replaying a previous log when resuming.

    Replayed records must sit at the same unit point as the new run asks
    for; anything else means the log came from a different configuration.
    """

    def __init__(self, fitness: Callable, space, *, path: str | Path | None = None,
                 resume: bool = True, failure_objective: float = 1.0):
        self.fitness = fitness
        self.space = space
        self.path = Path(path) if path is not None else None
        self.failure_objective = failure_objective
        self.records: list[TrialRecord] = []
        self._replay: list[TrialRecord] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if resume:
                self._replay = load_trials(self.path)
            # rewrite the clean prefix so a torn line never survives
            self.path.write_text("".join(r.to_json() + "\n" for r in self._replay))
            timing = self.timing_path
            if not resume or not timing.exists():
                timing.write_text("index,wall_time_s\n")

    @property
    def timing_path(self) -> Path:
        return self.path.with_name(self.path.name + ".timing.csv")

    @property
    def resumed(self) -> int:
        return len(self._replay)

    def evaluate(self, unit_point, source: str, seed: int, gp: dict | None = None) -> TrialRecord:
        index = len(self.records)
        unit = [float(v) for v in self.space.snap(unit_point)]
        if index < len(self._replay):
            rec = self._replay[index]
            if not np.allclose(rec.unit_point, unit, rtol=0, atol=1e-12):
                raise DataError(f"trial log {self.path} diverges from this run at trial {index}")
            self.records.append(rec)
            return rec
        params = self.space.decode(unit)
        t0 = time.perf_counter()
        try:
            res = _to_result(self.fitness(params, seed))
            if not np.isfinite(res.objective):
                raise ArithmeticError(f"non-finite objective {res.objective}")
            error = None
        except Exception as exc:  # failed trials are scored, not fatal
            log.warning("trial %d failed: %s", index, exc)
            res = FitnessResult(self.failure_objective)
            error = f"{type(exc).__name__}: {exc}"
        rec = TrialRecord(index=index, params=params, unit_point=unit,
                          objective=float(res.objective), source=source, seed=seed,
                          val_accuracy=res.val_accuracy, history=res.history, gp=gp,
                          error=error, wall_time_s=time.perf_counter() - t0)
        self.records.append(rec)
        if self.path is not None:
            with self.path.open("a") as fh:
                fh.write(rec.to_json() + "\n")
                fh.flush()
            with self.timing_path.open("a") as fh:
                fh.write(f"{index},{rec.wall_time_s:.3f}\n")
        log.info("trial %d [%s] objective %.6g %s", index, source, rec.objective, params)
        return rec
