"""Synthetic ECG records with N/L/R/A/V beats for demos and tests.

Each beat is a sum of Gaussian waves (P, Q, R, S, T) placed relative to the
R peak. Morphologies follow the textbook pictures: bundle-branch blocks have
wide, notched or rSR' complexes with discordant T waves; atrial premature
beats come early with an abnormal P; ventricular beats have no P, a wide
bizarre QRS and a compensatory pause. Records mimic the database layout:
a dominant conduction pattern (N, L or R) with interspersed ectopy.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ecgbo.ecg.wfdb import Annotation, Recording, write_annotations, write_signal

# (amplitude mV, offset s from R peak, width s)
WAVES = {
    "N": [(0.15, -0.20, 0.025), (-0.10, -0.035, 0.009), (1.20, 0.0, 0.011),
          (-0.25, 0.035, 0.011), (0.30, 0.26, 0.050)],
    "L": [(0.15, -0.22, 0.025), (0.75, -0.025, 0.022), (0.85, 0.030, 0.022),
          (-0.35, 0.30, 0.060)],
    "R": [(0.15, -0.20, 0.025), (0.45, -0.030, 0.009), (-0.45, 0.005, 0.010),
          (0.85, 0.050, 0.018), (-0.18, 0.30, 0.050)],
    "A": [(-0.12, -0.15, 0.016), (-0.10, -0.035, 0.009), (1.15, 0.0, 0.011),
          (-0.25, 0.035, 0.011), (0.28, 0.25, 0.050)],
    "V": [(1.40, 0.0, 0.040), (-0.85, 0.085, 0.038), (-0.50, 0.34, 0.070)],
}

RECORD_TYPES = {
    # dominant beat, probabilities of A and V ectopy
    "N": ("N", 0.18, 0.18),
    "L": ("L", 0.0, 0.20),
    "R": ("R", 0.20, 0.15),
}


def beat_waveform(label: str, t: np.ndarray, rng: np.random.Generator,
                  amp_scale: float = 1.0, width_scale: float = 1.0) -> np.ndarray:
    out = np.zeros_like(t)
    for amp, off, width in WAVES[label]:
        a = amp * amp_scale * rng.normal(1.0, 0.08)
        o = off + rng.normal(0.0, 0.004)
        w = width * width_scale * rng.normal(1.0, 0.06)
        out += a * np.exp(-0.5 * ((t - o) / w) ** 2)
    return out


def synth_record(duration_s: float, fs: float = 250.0, record_type: str = "N",
                 seed: int = 0, record_id: str = "", gain: float = 200.0,
                 noise_mv: float = 0.03) -> tuple[Recording, list[Annotation]]:
    """One two-lead recording and its beat annotations."""
    rng = np.random.default_rng(seed)
    dominant, p_a, p_v = RECORD_TYPES[record_type]
    n = int(round(duration_s * fs))
    t_all = np.arange(n) / fs
    base_rr = rng.uniform(0.7, 0.95)
    amp_scale = rng.uniform(0.75, 1.25)
    width_scale = rng.uniform(0.9, 1.1)
    lead0 = np.zeros(n)
    anns = []
    t = 0.5
    prev = dominant
    while True:
        u = rng.random()
        label = "A" if u < p_a else ("V" if u < p_a + p_v else dominant)
        if prev in ("A", "V") and label in ("A", "V"):
            label = dominant
        rr = base_rr * rng.normal(1.0, 0.04)
        if label in ("A", "V"):
            rr *= 0.68
        elif prev == "V":
            rr *= 1.35  # compensatory pause ends here
        t += rr
        if t > duration_s - 0.6:
            break
        centre = int(round(t * fs))
        lo, hi = max(0, centre - int(0.6 * fs)), min(n, centre + int(0.8 * fs))
        seg_t = t_all[lo:hi] - centre / fs
        lead0[lo:hi] += beat_waveform(label, seg_t, rng, amp_scale, width_scale)
        anns.append(Annotation(centre, label))
        prev = label
    wander = 0.12 * np.sin(2 * np.pi * rng.uniform(0.15, 0.4) * t_all + rng.uniform(0, 2 * np.pi))
    lead0 += wander + rng.normal(0.0, noise_mv, n)
    lead1 = -0.6 * lead0 + rng.normal(0.0, noise_mv, n)
    adc = np.clip(np.round(np.stack([lead0, lead1], axis=1) * gain), -2048, 2047).astype(np.int16)
    return Recording(adc, fs, gain, record_id), anns


def write_synthetic_database(directory: str | Path, n_records: int = 6, duration_s: float = 300.0,
                             fs: float = 250.0, seed: int = 0, gain: float = 200.0) -> list[dict]:
    """Write ``<id>.dat`` (format 212) and ``<id>.ann`` files; return config record entries."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    types = list(RECORD_TYPES)
    entries = []
    for i in range(n_records):
        rid = f"{100 + i}"
        rec, anns = synth_record(duration_s, fs, types[i % len(types)],
                                 seed=seed * 1000 + i, record_id=rid, gain=gain)
        write_signal(directory / f"{rid}.dat", rec)
        write_annotations(directory / f"{rid}.ann", anns)
        entries.append({"id": rid, "signal": f"{rid}.dat", "annotations": f"{rid}.ann",
                        "sample_count": rec.n_samples, "channel_count": rec.n_channels,
                        "gain": gain, "sampling_rate": fs})
    return entries
