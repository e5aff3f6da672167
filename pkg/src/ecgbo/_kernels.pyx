# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: 1-D convolution, max pooling and the format-212 codec.

Every function here has a numpy twin in ``_kernels_py`` with the same
signature; ``ecgbo.kernels`` picks one of the two at import time.
"""

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef void _gemm_rowmajor(int m, int n, int k,
                         double *a, int lda, bint trans_a,
                         double *b, int ldb, bint trans_b,
                         double *c, int ldc, double beta) noexcept nogil:
    # C(m x n) = op(A) op(B) + beta C, all row-major; BLAS sees the transposes.
    cdef char ta = b'T' if trans_b else b'N'
    cdef char tb = b'T' if trans_a else b'N'
    cdef double alpha = 1.0
    dgemm(&ta, &tb, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


cdef cnp.ndarray _im2col(double[:, :, ::1] x, int ksize):
    cdef Py_ssize_t nb = x.shape[0], length = x.shape[1], ch = x.shape[2]
    cdef Py_ssize_t left = (ksize - 1) // 2
    cdef cnp.ndarray cols_arr = np.zeros((nb * length, ksize * ch), dtype=np.float64)
    cdef double[:, ::1] cols = cols_arr
    cdef Py_ssize_t b, i, j, c, src, row
    with nogil:
        for b in range(nb):
            for i in range(length):
                row = b * length + i
                for j in range(ksize):
                    src = i + j - left
                    if src < 0 or src >= length:
                        continue
                    for c in range(ch):
                        cols[row, j * ch + c] = x[b, src, c]
    return cols_arr


def conv1d_forward(x, w, bias):
    """Same-padded, stride-1 convolution of ``x`` (B, L, Cin) with ``w`` (K, Cin, Cout)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    cdef int nb = x.shape[0], length = x.shape[1], cin = x.shape[2]
    cdef int ksize = w.shape[0], cout = w.shape[2]
    if w.shape[1] != cin:
        raise ValueError(f"conv1d: input has {cin} channels, kernel expects {w.shape[1]}")
    cdef cnp.ndarray cols = _im2col(x, ksize)
    cdef cnp.ndarray out = np.empty((nb, length, cout), dtype=np.float64)
    out[...] = np.asarray(bias, dtype=np.float64)
    cdef double[:, ::1] cv = cols
    cdef double[:, ::1] wv = w.reshape(ksize * cin, cout)
    cdef double[:, :, ::1] ov = out
    cdef int m = nb * length, kk = ksize * cin
    if m > 0:
        with nogil:
            _gemm_rowmajor(m, cout, kk, &cv[0, 0], kk, False,
                           &wv[0, 0], cout, False, &ov[0, 0, 0], cout, 1.0)
    return out


def conv1d_backward(x, w, grad_out):
    """Return ``(grad_x, grad_w, grad_bias)`` for :func:`conv1d_forward`."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    grad_out = np.ascontiguousarray(grad_out, dtype=np.float64)
    cdef int nb = x.shape[0], length = x.shape[1], cin = x.shape[2]
    cdef int ksize = w.shape[0], cout = w.shape[2]
    if grad_out.shape[0] != nb or grad_out.shape[1] != length or grad_out.shape[2] != cout:
        raise ValueError("conv1d backward: upstream gradient shape mismatch")
    cdef int m = nb * length, kk = ksize * cin
    cdef cnp.ndarray cols = _im2col(x, ksize)
    cdef cnp.ndarray gw = np.zeros((kk, cout), dtype=np.float64)
    cdef cnp.ndarray dcols = np.zeros((m, kk), dtype=np.float64)
    cdef double[:, ::1] cv = cols
    cdef double[:, ::1] gwv = gw
    cdef double[:, ::1] dcv = dcols
    cdef double[:, ::1] wv = w.reshape(kk, cout)
    cdef double[:, :, ::1] gv = grad_out
    cdef cnp.ndarray gx = np.zeros((nb, length, cin), dtype=np.float64)
    cdef double[:, :, ::1] gxv = gx
    cdef Py_ssize_t b, i, j, c, dst, row
    cdef Py_ssize_t left = (ksize - 1) // 2
    if m > 0:
        with nogil:
            _gemm_rowmajor(kk, cout, m, &cv[0, 0], kk, True,
                           &gv[0, 0, 0], cout, False, &gwv[0, 0], cout, 0.0)
            _gemm_rowmajor(m, kk, cout, &gv[0, 0, 0], cout, False,
                           &wv[0, 0], cout, True, &dcv[0, 0], kk, 0.0)
            for b in range(nb):
                for i in range(length):
                    row = b * length + i
                    for j in range(ksize):
                        dst = i + j - left
                        if dst < 0 or dst >= length:
                            continue
                        for c in range(cin):
                            gxv[b, dst, c] += dcv[row, j * cin + c]
    gb = grad_out.sum(axis=(0, 1))
    return gx, gw.reshape(ksize, cin, cout), gb


def maxpool1d_forward(x, int pool):
    """Non-overlapping max pooling along the length axis; remainder dropped, first max wins."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    cdef int nb = x.shape[0], length = x.shape[1], ch = x.shape[2]
    if pool < 1:
        raise ValueError("pool size must be >= 1")
    if length < pool:
        raise ValueError(f"maxpool: input length {length} shorter than pool size {pool}")
    cdef int lout = length // pool
    out = np.empty((nb, lout, ch), dtype=np.float64)
    idx = np.empty((nb, lout, ch), dtype=np.int64)
    cdef double[:, :, ::1] xv = x
    cdef double[:, :, ::1] ov = out
    cdef cnp.int64_t[:, :, ::1] iv = idx
    cdef Py_ssize_t b, i, c, t, best_t
    cdef double best, v
    with nogil:
        for b in range(nb):
            for i in range(lout):
                for c in range(ch):
                    best_t = i * pool
                    best = xv[b, best_t, c]
                    for t in range(i * pool + 1, i * pool + pool):
                        v = xv[b, t, c]
                        if v > best:
                            best = v
                            best_t = t
                    ov[b, i, c] = best
                    iv[b, i, c] = best_t
    return out, idx


def maxpool1d_backward(grad_out, idx, int length):
    """Route ``grad_out`` back to the argmax positions recorded in the forward pass."""
    grad_out = np.ascontiguousarray(grad_out, dtype=np.float64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    cdef int nb = grad_out.shape[0], lout = grad_out.shape[1], ch = grad_out.shape[2]
    gx = np.zeros((nb, length, ch), dtype=np.float64)
    cdef double[:, :, ::1] gxv = gx
    cdef double[:, :, ::1] gv = grad_out
    cdef cnp.int64_t[:, :, ::1] iv = idx
    cdef Py_ssize_t b, i, c
    with nogil:
        for b in range(nb):
            for i in range(lout):
                for c in range(ch):
                    gxv[b, iv[b, i, c], c] += gv[b, i, c]
    return gx


def decode_212(data, Py_ssize_t n_samples):
    """Unpack ``n_samples`` 12-bit two's-complement values from format-212 bytes."""
    raw = np.ascontiguousarray(np.frombuffer(data, dtype=np.uint8)
                               if not isinstance(data, np.ndarray) else data, dtype=np.uint8)
    cdef const unsigned char[::1] buf = raw
    cdef Py_ssize_t need = (3 * n_samples + 1) // 2
    if buf.shape[0] < need:
        raise ValueError(f"format 212: truncated data at byte offset {buf.shape[0]} "
                         f"(need {need} bytes for {n_samples} samples)")
    out = np.empty(n_samples, dtype=np.int16)
    cdef cnp.int16_t[::1] ov = out
    cdef Py_ssize_t g, k
    cdef int s
    with nogil:
        for k in range(n_samples):
            g = (k // 2) * 3
            if k % 2 == 0:
                s = ((buf[g + 1] & 0x0F) << 8) | buf[g]
            else:
                s = ((buf[g + 1] & 0xF0) << 4) | buf[g + 2]
            if s >= 2048:
                s -= 4096
            ov[k] = <cnp.int16_t>s
    return out


def encode_212(samples):
    """Pack integer samples in [-2048, 2047] into format-212 bytes."""
    arr = np.ascontiguousarray(samples, dtype=np.int64).ravel()
    if arr.size and (arr.min() < -2048 or arr.max() > 2047):
        raise ValueError("format 212 holds 12-bit values in [-2048, 2047]")
    cdef cnp.int64_t[::1] sv = arr
    cdef Py_ssize_t n = arr.shape[0]
    out = np.zeros((3 * n + 1) // 2, dtype=np.uint8)
    cdef unsigned char[::1] ov = out
    cdef Py_ssize_t g, k
    cdef int s
    with nogil:
        for k in range(n):
            s = <int>(sv[k] & 0xFFF)
            g = (k // 2) * 3
            if k % 2 == 0:
                ov[g] = s & 0xFF
                ov[g + 1] = ov[g + 1] | ((s >> 8) & 0x0F)
            else:
                ov[g + 1] = ov[g + 1] | ((s >> 4) & 0xF0)
                ov[g + 2] = s & 0xFF
    return out.tobytes()
