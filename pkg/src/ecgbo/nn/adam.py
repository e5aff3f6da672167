from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ecgbo.errors import ConfigError, TrainingDiverged


@dataclass
class Adam:
    """Adam with inverse-time learning-rate decay.

    The rate used for update ``t`` (0-based) is
    ``learning_rate / (1 + decay * t)``; moments are bias-corrected.
    """

    learning_rate: float = 1e-3
    decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be > 0")
        if self.decay < 0:
            raise ConfigError("decay must be >= 0")

    def effective_lr(self, step: int | None = None) -> float:
        t = self.step_count if step is None else step
        return self.learning_rate / (1.0 + self.decay * t)

    def step(self, weights: dict, grads: dict, epoch: int = 0) -> None:
        """Update every array in ``weights`` in place using the matching entry of ``grads``."""
        for key, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise TrainingDiverged(epoch, f"non-finite gradient for {key}")
        lr = self.effective_lr()
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for key, w in weights.items():
            g = grads[key]
            if g.shape != w.shape:
                raise ConfigError(f"gradient for {key} has shape {g.shape}, weight {w.shape}")
            m = self.first_moment.get(key)
            if m is None:
                m = self.first_moment[key] = np.zeros_like(w)
                self.second_moment[key] = np.zeros_like(w)
            v = self.second_moment[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            w -= lr * (m / c1) / (np.sqrt(v / c2) + self.epsilon)
