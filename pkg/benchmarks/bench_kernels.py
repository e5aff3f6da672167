"""Time the compiled and pure-Python kernel backends on training-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--batch 128]

Prints one row per kernel with the median time of each backend and the
speedup of the compiled one. Outputs are checked to agree before timing.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from ecgbo import kernels


def _cases(batch: int, rng: np.random.Generator) -> dict:
    # shapes of the first two residual blocks at a 250-sample window
    x1 = rng.normal(size=(batch, 250, 1))
    w1 = rng.normal(size=(5, 1, 32))
    x2 = rng.normal(size=(batch, 125, 32))
    w2 = rng.normal(size=(5, 32, 64))
    b = rng.normal(size=64)
    g2 = rng.normal(size=(batch, 125, 64))
    pooled, idx = kernels.backend_module("python").maxpool1d_forward(x2, 2)
    samples = rng.integers(-2048, 2048, size=650_000)  # one 45-min, 2-lead record at 360 Hz
    data = kernels.backend_module("python").encode_212(samples)
    return {
        "conv1d_forward 1->32": ("conv1d_forward", (x1, w1, b[:32])),
        "conv1d_forward 32->64": ("conv1d_forward", (x2, w2, b)),
        "conv1d_backward 32->64": ("conv1d_backward", (x2, w2, g2)),
        "maxpool1d_forward": ("maxpool1d_forward", (x2, 2)),
        "maxpool1d_backward": ("maxpool1d_backward", (pooled, idx, 125)),
        "encode_212": ("encode_212", (samples,)),
        "decode_212": ("decode_212", (data, samples.size)),
    }


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, bytes):
        return a == b
    return np.allclose(a, b, rtol=1e-10, atol=1e-10)


def _median_time(fn, args, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--batch", type=int, default=128)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; only the python backend is available")
    cases = _cases(args.batch, np.random.default_rng(args.seed))
    header = f"{'kernel':<24}" + "".join(f"{b + ' ms':>14}" for b in backends)
    print(header + (f"{'speedup':>10}" if len(backends) > 1 else ""))
    for label, (name, fargs) in cases.items():
        fns = {b: getattr(kernels.backend_module(b), name) for b in backends}
        outs = [fns[b](*fargs) for b in backends]
        if len(outs) > 1 and not _same(outs[0], outs[1]):
            raise SystemExit(f"{label}: backends disagree")
        t = {b: _median_time(fns[b], fargs, args.repeat) for b in backends}
        row = f"{label:<24}" + "".join(f"{1e3 * t[b]:>14.3f}" for b in backends)
        if len(backends) > 1:
            row += f"{t['python'] / t['compiled']:>9.2f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
