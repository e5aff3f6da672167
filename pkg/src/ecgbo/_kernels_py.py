"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _padded(x, ksize):
    left = (ksize - 1) // 2  # extra padding goes on the right
    return np.pad(x, ((0, 0), (left, ksize - 1 - left), (0, 0)))


def conv1d_forward(x, w, bias):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.shape[1] != x.shape[2]:
        raise ValueError(f"conv1d: input has {x.shape[2]} channels, kernel expects {w.shape[1]}")
    # windows: (B, L, Cin, K)
    windows = sliding_window_view(_padded(x, w.shape[0]), w.shape[0], axis=1)
    out = np.tensordot(windows, w.transpose(1, 0, 2), axes=([2, 3], [0, 1]))
    out += bias
    return out


def conv1d_backward(x, w, grad_out):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    nb, length, cin = x.shape
    ksize = w.shape[0]
    if grad_out.shape != (nb, length, w.shape[2]):
        raise ValueError("conv1d backward: upstream gradient shape mismatch")
    windows = sliding_window_view(_padded(x, ksize), ksize, axis=1)
    gw = np.tensordot(windows, grad_out, axes=([0, 1], [0, 1])).transpose(1, 0, 2)
    gpad = np.zeros((nb, length + ksize - 1, cin))
    for j in range(ksize):
        gpad[:, j:j + length, :] += grad_out @ w[j].T
    left = (ksize - 1) // 2  # extra padding goes on the right
    gx = gpad[:, left:left + length, :]
    return np.ascontiguousarray(gx), np.ascontiguousarray(gw), grad_out.sum(axis=(0, 1))


def maxpool1d_forward(x, pool):
    x = np.asarray(x, dtype=np.float64)
    nb, length, ch = x.shape
    if pool < 1:
        raise ValueError("pool size must be >= 1")
    if length < pool:
        raise ValueError(f"maxpool: input length {length} shorter than pool size {pool}")
    lout = length // pool
    win = x[:, :lout * pool, :].reshape(nb, lout, pool, ch)
    # argmax returns the first maximum, which is the tie-break we want
    local = win.argmax(axis=2)
    out = np.take_along_axis(win, local[:, :, None, :], axis=2)[:, :, 0, :]
    idx = local + (np.arange(lout) * pool)[None, :, None]
    return out, idx.astype(np.int64)


def maxpool1d_backward(grad_out, idx, length):
    grad_out = np.asarray(grad_out, dtype=np.float64)
    nb, lout, ch = grad_out.shape
    gx = np.zeros((nb, length, ch))
    b = np.arange(nb)[:, None, None]
    c = np.arange(ch)[None, None, :]
    # windows do not overlap, so every target index is hit at most once
    gx[b, idx, c] = grad_out
    return gx


def decode_212(data, n_samples):
    buf = np.frombuffer(data, dtype=np.uint8) if not isinstance(data, np.ndarray) \
        else np.asarray(data, dtype=np.uint8)
    need = (3 * n_samples + 1) // 2
    if buf.size < need:
        raise ValueError(f"format 212: truncated data at byte offset {buf.size} "
                         f"(need {need} bytes for {n_samples} samples)")
    n_groups = (n_samples + 1) // 2
    raw = np.zeros(n_groups * 3, dtype=np.int32)
    raw[:need] = buf[:need]
    g = raw.reshape(n_groups, 3)
    out = np.empty(n_groups * 2, dtype=np.int32)
    out[0::2] = ((g[:, 1] & 0x0F) << 8) | g[:, 0]
    out[1::2] = ((g[:, 1] & 0xF0) << 4) | g[:, 2]
    out[out >= 2048] -= 4096
    return out[:n_samples].astype(np.int16)


def encode_212(samples):
    arr = np.asarray(samples, dtype=np.int64).ravel()
    if arr.size and (arr.min() < -2048 or arr.max() > 2047):
        raise ValueError("format 212 holds 12-bit values in [-2048, 2047]")
    n = arr.size
    u = np.zeros(n + (n % 2), dtype=np.int64)
    u[:n] = arr & 0xFFF
    s1, s2 = u[0::2], u[1::2]
    g = np.empty((u.size // 2, 3), dtype=np.uint8)
    g[:, 0] = s1 & 0xFF
    g[:, 1] = ((s1 >> 8) & 0x0F) | ((s2 >> 4) & 0xF0)
    g[:, 2] = s2 & 0xFF
    return g.ravel()[:(3 * n + 1) // 2].tobytes()
