"""Mini-batch training with Adam and early stopping on validation loss."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from ecgbo.errors import DataError, TrainingDiverged
from ecgbo.nn.adam import Adam
from ecgbo.nn.loss import softmax_crossentropy
from ecgbo.nn.network import Network

log = logging.getLogger(__name__)

HISTORY_HEADER = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


@dataclass
class EpochStats:
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainHistory:
    per_epoch: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0  # 1-based epoch whose weights were kept

    @property
    def stopped_epoch(self) -> int:
        return len(self.per_epoch)

    @property
    def best(self) -> EpochStats:
        return self.per_epoch[self.best_epoch - 1]

    def to_rows(self) -> list[dict]:
        return [{"epoch": i + 1, "train_loss": e.train_loss, "train_acc": e.train_acc,
                 "val_loss": e.val_loss, "val_acc": e.val_acc}
                for i, e in enumerate(self.per_epoch)]

    @classmethod
    def from_rows(cls, rows, best_epoch: int | None = None) -> "TrainHistory":
        eps = [EpochStats(float(r["train_loss"]), float(r["train_acc"]),
                          float(r["val_loss"]), float(r["val_acc"])) for r in rows]
        if best_epoch is None:
            best_epoch = int(np.argmin([e.val_loss for e in eps])) + 1 if eps else 0
        return cls(eps, best_epoch)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HISTORY_HEADER)
        for r in self.to_rows():
            w.writerow([r["epoch"], repr(r["train_loss"]), repr(r["train_acc"]),
                        repr(r["val_loss"]), repr(r["val_acc"])])
        return buf.getvalue()


@dataclass
class TrainConfig:
    max_epochs: int = 100
    patience: int = 10
    batch_size: int = 128
    eval_batch_size: int = 512


def evaluate(net: Network, x: np.ndarray, y: np.ndarray, batch_size: int = 512) -> tuple[float, float]:
    """Mean cross-entropy and accuracy in inference mode."""
    total_loss = 0.0
    correct = 0
    for i in range(0, len(x), batch_size):
        logits = net.logits(x[i:i + batch_size])
        loss, _ = softmax_crossentropy(logits, y[i:i + batch_size])
        total_loss += loss * len(logits)
        correct += int((logits.argmax(axis=1) == y[i:i + batch_size]).sum())
    return total_loss / len(x), correct / len(x)


def train(net: Network, optimizer: Adam, x_train, y_train, x_val, y_val,
          config: TrainConfig | None = None, seed: int = 0) -> TrainHistory:
    """Train ``net`` in place and return its history.

    The weights of the epoch with the lowest validation loss are restored at
    the end. Raises :class:`TrainingDiverged` when the loss goes non-finite.
    """
    config = config or TrainConfig()
    x_train = np.asarray(x_train, dtype=np.float64)
    x_val = np.asarray(x_val, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    y_val = np.asarray(y_val, dtype=np.int64)
    if len(x_train) == 0 or len(x_val) == 0:
        raise DataError("training and validation sets must be non-empty")
    shuffle_seq, dropout_seq = np.random.SeedSequence(seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)

    history = TrainHistory()
    best_loss = np.inf
    best_weights = net.get_weights()
    params = net.parameters()
    wait = 0
    n = len(x_train)
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            logits = net.logits(x_train[idx], training=True, rng=dropout_rng)
            loss, grad = softmax_crossentropy(logits, y_train[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            net.backward(grad)
            optimizer.step(params, net.gradients(), epoch)
            loss_sum += loss * len(idx)
            correct += int((logits.argmax(axis=1) == y_train[idx]).sum())
        val_loss, val_acc = evaluate(net, x_val, y_val, config.eval_batch_size)
        if not np.isfinite(val_loss):
            raise TrainingDiverged(epoch, "non-finite validation loss")
        history.per_epoch.append(EpochStats(loss_sum / n, correct / n, val_loss, val_acc))
        log.debug("epoch %d loss %.4f acc %.4f val_loss %.4f val_acc %.4f",
                  epoch, loss_sum / n, correct / n, val_loss, val_acc)
        if val_loss < best_loss:
            best_loss = val_loss
            best_weights = net.get_weights()
            history.best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait >= config.patience:
                break
    net.set_weights(best_weights)
    return history
