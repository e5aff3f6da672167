"""Beat segmentation, per-beat normalization, dataset splitting and CSV I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ecgbo.ecg.wfdb import Annotation, Recording
from ecgbo.errors import DataError

BEAT_CLASSES = ("N", "L", "R", "A", "V")


@dataclass(frozen=True)
class BeatSegment:
    values: np.ndarray = field(compare=False)
    label: str
    source_record: str = ""
    center_index: int = -1


@dataclass
class SplitDataset:
    train: list[BeatSegment]
    validation: list[BeatSegment]
    test: list[BeatSegment]
    seed: int

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


def segment_beats(rec: Recording, anns: Iterable[Annotation], window: int,
                  keep_classes: Sequence[str] = BEAT_CLASSES, channel: int = 0) -> list[BeatSegment]:
    """Cut ``[c - window//2, c + ceil(window/2))`` around each kept annotation.

    Windows crossing either end of the recording are dropped.
    """
    if window < 1:
        raise DataError("window length must be >= 1")
    keep = set(keep_classes)
    half_lo, half_hi = window // 2, window - window // 2
    signal = rec.samples[:, channel].astype(np.float64)
    out = []
    for a in anns:
        if a.symbol not in keep:
            continue
        lo, hi = a.sample_index - half_lo, a.sample_index + half_hi
        if lo < 0 or hi > rec.n_samples:
            continue
        out.append(BeatSegment(signal[lo:hi].copy(), a.symbol, rec.record_id, a.sample_index))
    if not out:
        raise DataError(f"record {rec.record_id or '?'}: no beats of classes "
                        f"{sorted(keep)} fit a {window}-sample window")
    return out


def normalize_segment(seg: BeatSegment, floor: float = 1e-8) -> BeatSegment:
    """Z-score the beat (population std, floored)."""
    v = np.asarray(seg.values, dtype=np.float64)
    sd = v.std()
    return replace(seg, values=(v - v.mean()) / max(sd, floor))


def split_counts(n: int, fractions=(0.70, 0.15, 0.15)) -> tuple[int, int, int]:
    f_train, f_val, f_test = fractions
    if abs(f_train + f_val + f_test - 1.0) > 1e-9 or min(fractions) < 0:
        raise DataError("split fractions must be non-negative and sum to 1")
    n_train = math.floor(f_train * n + 0.5)
    rest = n - n_train
    share = f_val / (f_val + f_test) if f_val + f_test > 0 else 0.0
    n_val = math.floor(share * rest + 0.5)
    return n_train, n_val, rest - n_val


def split(segments: Sequence[BeatSegment], fractions=(0.70, 0.15, 0.15),
          seed: int = 0) -> SplitDataset:
    """Random permutation, then contiguous train/validation/test blocks (class-blind)."""
    n = len(segments)
    if n < 10:
        raise DataError(f"need at least 10 segments to split, got {n}")
    n_train, n_val, _ = split_counts(n, fractions)
    order = np.random.default_rng(seed).permutation(n)
    pick = [segments[i] for i in order]
    return SplitDataset(pick[:n_train], pick[n_train:n_train + n_val], pick[n_train + n_val:], seed)


def stratified_subset(segments: Sequence[BeatSegment], max_total: int, seed: int = 0,
                      classes: Sequence[str] = BEAT_CLASSES) -> list[BeatSegment]:
    """At most ``max_total`` beats, spread as evenly as the class counts allow.

    Order of the input is preserved among the selected beats.
    """
    rng = np.random.default_rng(seed)
    by_class = {c: [i for i, s in enumerate(segments) if s.label == c] for c in classes}
    quota = {c: 0 for c in classes}
    remaining = max_total
    open_classes = [c for c in classes if by_class[c]]
    while remaining > 0 and open_classes:
        share = max(1, remaining // len(open_classes))
        for c in list(open_classes):
            take = min(share, len(by_class[c]) - quota[c], remaining)
            quota[c] += take
            remaining -= take
            if quota[c] == len(by_class[c]):
                open_classes.remove(c)
            if remaining == 0:
                break
    chosen = []
    for c in classes:
        idx = by_class[c]
        if quota[c]:
            chosen.extend(rng.choice(idx, size=quota[c], replace=False).tolist())
    return [segments[i] for i in sorted(chosen)]


def to_arrays(segments: Sequence[BeatSegment], classes: Sequence[str] = BEAT_CLASSES):
    """Stack segments into ``x`` (n, W, 1) and integer labels ``y``."""
    index = {c: i for i, c in enumerate(classes)}
    if not segments:
        raise DataError("no segments")
    try:
        y = np.array([index[s.label] for s in segments], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"label {exc} not in class set {list(classes)}") from None
    x = np.stack([np.asarray(s.values, dtype=np.float64) for s in segments])[:, :, None]
    return x, y


def class_counts(segments: Iterable[BeatSegment], classes: Sequence[str] = BEAT_CLASSES) -> dict:
    counts = {c: 0 for c in classes}
    for s in segments:
        counts[s.label] = counts.get(s.label, 0) + 1
    return counts


def write_csv(path: str | Path, segments: Sequence[BeatSegment]) -> None:
    """Header ``label,v0,...,v{W-1}``; values use round-trip (shortest exact) decimals."""
    if not segments:
        raise DataError("refusing to write an empty segment file")
    width = len(segments[0].values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", *[f"v{i}" for i in range(width)]])
        for s in segments:
            if len(s.values) != width:
                raise DataError("segments have differing window lengths")
            w.writerow([s.label, *[repr(float(v)) for v in s.values]])


def load_csv(path: str | Path, classes: Sequence[str] = BEAT_CLASSES) -> list[BeatSegment]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"segment file not found: {path}")
    allowed = set(classes)
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "label" or len(header) < 2:
            raise DataError(f"{path}:1: header must be 'label,v0,v1,...'")
        width = len(header) - 1
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) - 1 != width:
                raise DataError(f"{path}:{lineno}: expected {width} values, got {len(row) - 1}")
            label = row[0].strip()
            if label not in allowed:
                raise DataError(f"{path}:{lineno}: unknown label {label!r}")
            try:
                values = np.array([float(v) for v in row[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
            if not np.all(np.isfinite(values)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            out.append(BeatSegment(values, label, path.stem, lineno - 2))
    return out
