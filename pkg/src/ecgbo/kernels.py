"""Backend selection for the hot numerical kernels.

The compiled Cython module is used when it was built; otherwise the numpy
implementation in :mod:`ecgbo._kernels_py` is used. Both expose::

    conv1d_forward(x, w, bias) -> out
    conv1d_backward(x, w, grad_out) -> (grad_x, grad_w, grad_bias)
    maxpool1d_forward(x, pool) -> (out, argmax_idx)
    maxpool1d_backward(grad_out, argmax_idx, length) -> grad_x
    decode_212(data, n_samples) -> int16 array
    encode_212(samples) -> bytes

Use :func:`use_backend` to switch explicitly (tests and the benchmark do).
"""

from __future__ import annotations

import logging
from types import ModuleType

from ecgbo import _kernels_py

log = logging.getLogger(__name__)

try:
    from ecgbo import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_NAMES = (
    "conv1d_forward",
    "conv1d_backward",
    "maxpool1d_forward",
    "maxpool1d_backward",
    "decode_212",
    "encode_212",
)

BACKEND = "python"


def available_backends() -> list[str]:
    return ["compiled", "python"] if _compiled is not None else ["python"]


def backend_module(name: str) -> ModuleType:
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    if name == "python":
        return _kernels_py
    raise ValueError(f"unknown kernel backend {name!r}")


def use_backend(name: str) -> None:
    """Rebind the module-level kernel functions to backend ``name``."""
    global BACKEND
    mod = backend_module(name)
    g = globals()
    for fn in _NAMES:
        g[fn] = getattr(mod, fn)
    BACKEND = name
    log.debug("kernel backend: %s", name)


use_backend("compiled" if _compiled is not None else "python")
