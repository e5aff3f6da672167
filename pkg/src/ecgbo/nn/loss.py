from __future__ import annotations

import numpy as np

from ecgbo.errors import DataError


def softmax_crossentropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean categorical cross-entropy of integer ``labels`` under ``softmax(logits)``.

    Returns the loss and its gradient with respect to ``logits``,
    ``(softmax - onehot) / batch``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise DataError(f"expected {n} labels, got shape {labels.shape}")
    if n and (labels.min() < 0 or labels.max() >= k):
        raise DataError(f"label out of range for {k} classes")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    log_p = z[np.arange(n), labels] - log_norm
    loss = float(-log_p.mean())
    grad = np.exp(z - log_norm[:, None])
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad
