"""Global-best particle swarm optimisation over the unit-cube encoding."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ecgbo.bo import derive_seed
from ecgbo.errors import ConfigError
from ecgbo.space import SearchSpace
from ecgbo.trials import TrialRecord, TrialRunner, best_record


@dataclass
class PSOConfig:
    particles: int = 5
    iterations: int = 3
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    max_velocity: float = 0.5
    seed: int = 0
    trial_seed: int | None = None
    failure_objective: float = 1.0

    def __post_init__(self):
        if self.particles < 1 or self.iterations < 1:
            raise ConfigError("particles and iterations must be >= 1")
        if self.max_velocity <= 0:
            raise ConfigError("max_velocity must be > 0")

    @property
    def budget(self) -> int:
        return self.particles * self.iterations


@dataclass
class Swarm:
    positions: np.ndarray
    velocities: np.ndarray
    best_positions: np.ndarray
    best_objectives: np.ndarray

    @property
    def global_best(self) -> tuple[np.ndarray, float]:
        i = int(np.argmin(self.best_objectives))  # lowest index wins ties
        return self.best_positions[i], float(self.best_objectives[i])


def pso_optimise(fitness: Callable, space: SearchSpace, config: PSOConfig | None = None, *,
                 default_point=None, init_positions=None, init_velocities=None,
                 log_path: str | Path | None = None,
                 resume: bool = True) -> tuple[TrialRecord, list[TrialRecord]]:
    """Minimize ``fitness`` with ``particles x iterations`` evaluations.

    Initial positions are a Latin hypercube (particle 0 is ``default_point``
    when given) with zero velocities. Each later iteration applies
    ``v <- w v + c1 r1 (pbest - x) + c2 r2 (gbest - x)``, clips velocities
    to ``max_velocity`` and positions to the unit cube.
    """
    config = config or PSOConfig()
    dims = len(space)
    rng = np.random.default_rng(derive_seed(config.seed, 0x950))
    if init_positions is not None:
        x = np.array(init_positions, dtype=np.float64).reshape(config.particles, dims)
    else:
        x = space.sample(config.particles, rng)
        if default_point is not None:
            u0 = default_point if isinstance(default_point, np.ndarray) else space.encode(default_point)
            x[0] = u0
    x = np.clip(x, 0.0, 1.0)
    v = np.zeros_like(x) if init_velocities is None else \
        np.array(init_velocities, dtype=np.float64).reshape(x.shape)
    runner = TrialRunner(fitness, space, path=log_path, resume=resume,
                         failure_objective=config.failure_objective)

    def seed_for(i):
        return config.trial_seed if config.trial_seed is not None else derive_seed(config.seed, i, 0)

    def evaluate_all(positions):
        out = np.empty(len(positions))
        for p, pos in enumerate(positions):
            rec = runner.evaluate(pos, "pso", seed_for(len(runner.records)))
            out[p] = rec.objective
        return out

    f = evaluate_all(x)
    swarm = Swarm(x.copy(), v, x.copy(), f.copy())
    for _ in range(1, config.iterations):
        gbest, _gval = swarm.global_best
        r1 = rng.random(x.shape)
        r2 = rng.random(x.shape)
        swarm.velocities = (config.inertia * swarm.velocities
                            + config.cognitive * r1 * (swarm.best_positions - swarm.positions)
                            + config.social * r2 * (gbest - swarm.positions))
        np.clip(swarm.velocities, -config.max_velocity, config.max_velocity, out=swarm.velocities)
        swarm.positions = np.clip(swarm.positions + swarm.velocities, 0.0, 1.0)
        f = evaluate_all(swarm.positions)
        improved = f < swarm.best_objectives
        swarm.best_positions[improved] = swarm.positions[improved]
        swarm.best_objectives[improved] = f[improved]
    return best_record(runner.records), runner.records
