"""Format-212 signal files and plain-text beat annotations."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ecgbo import kernels
from ecgbo.errors import DataError


@dataclass
class Recording:
    samples: np.ndarray  # (n_samples, n_channels) raw ADC units
    sampling_rate: float
    gain: float = 200.0  # ADC units per mV
    record_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim == 1:
            self.samples = self.samples[:, None]
        if self.samples.ndim != 2:
            raise DataError("samples must be (n_samples, n_channels)")
        if self.sampling_rate <= 0:
            raise DataError("sampling rate must be > 0")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    def channel_mv(self, channel: int = 0) -> np.ndarray:
        return self.samples[:, channel] / self.gain


@dataclass(frozen=True)
class Annotation:
    sample_index: int
    symbol: str


def decode_wfdb212(data: bytes, sample_count: int) -> np.ndarray:
    """Decode ``sample_count`` interleaved 12-bit samples from format-212 bytes."""
    if sample_count < 0:
        raise DataError("sample count must be >= 0")
    try:
        return kernels.decode_212(data, sample_count)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def encode_wfdb212(samples) -> bytes:
    try:
        return kernels.encode_212(samples)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def read_signal(path: str | Path, n_samples: int, n_channels: int = 2,
                sampling_rate: float = 360.0, gain: float = 200.0,
                record_id: str | None = None) -> Recording:
    """Read a format-212 ``.dat`` file holding ``n_samples`` frames of ``n_channels``."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"signal file not found: {path}")
    data = path.read_bytes()
    try:
        flat = decode_wfdb212(data, n_samples * n_channels)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None
    return Recording(flat.reshape(n_samples, n_channels), sampling_rate, gain,
                     record_id or path.stem)


def write_signal(path: str | Path, rec: Recording) -> None:
    Path(path).write_bytes(encode_wfdb212(rec.samples.astype(np.int64).ravel()))


def read_annotations(path: str | Path) -> list[Annotation]:
    """Parse ``<sample_index> <symbol>`` lines; blank lines and ``#`` comments are skipped."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"annotation file not found: {path}")
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise DataError(f"{path}:{lineno}: expected '<sample_index> <symbol>'")
        try:
            idx = int(parts[0])
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad sample index {parts[0]!r}") from None
        if idx < 0:
            raise DataError(f"{path}:{lineno}: negative sample index")
        out.append(Annotation(idx, parts[1]))
    return out


def write_annotations(path: str | Path, anns: list[Annotation]) -> None:
    Path(path).write_text("".join(f"{a.sample_index} {a.symbol}\n" for a in anns))
