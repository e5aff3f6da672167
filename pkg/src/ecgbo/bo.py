"""Bayesian optimisation: expected improvement over a GP surrogate.

The objective is minimized (validation error when tuning the CNN).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import ndtr
from scipy.stats import qmc

from ecgbo import gp as gplib
from ecgbo.errors import ConfigError
from ecgbo.space import SearchSpace
from ecgbo.trials import TrialRecord, TrialRunner, best_record

log = logging.getLogger(__name__)

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def expected_improvement(mean, variance, best):
    """EI for minimization: E[max(0, best - f)] with f ~ N(mean, variance)."""
    mean = np.asarray(mean, dtype=np.float64)
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=np.float64), 0.0))
    gain = best - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = gain / sigma
        ei = gain * ndtr(z) + sigma * _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    ei = np.where(sigma < 1e-12, np.maximum(gain, 0.0), ei)
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


@dataclass
class BOConfig:
    budget: int = 15
    initial_design_size: int = 5
    acquisition_restarts: int = 5
    candidates: int = 2048
    gp_restarts: int = 8
    seed: int = 0
    trial_seed: int | None = None  # fixed training seed for every trial; None derives one per trial
    failure_objective: float = 1.0

    def __post_init__(self):
        if not self.budget >= self.initial_design_size >= 2:
            raise ConfigError("need budget >= initial_design_size >= 2")
        if self.acquisition_restarts < 1 or self.candidates < 1:
            raise ConfigError("acquisition settings must be positive")


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _refine(score: Callable, x0: np.ndarray, f0: float, step: float = 0.05,
            min_step: float = 1e-4, max_sweeps: int = 50) -> tuple[np.ndarray, float]:
    """Coordinate-wise pattern search for a maximum inside the unit cube.

    Moves are tried coordinate by coordinate (+step, then -step) and the
    first improving one is taken. ``score`` maps a batch of points to
    scores, so all moves still pending from the current point are scored
    in one call.
    """
    x, fx = x0.copy(), f0
    dims = len(x)
    for _ in range(max_sweeps):
        improved = False
        i = 0
        while i < dims:
            moves, coords = [], []
            for j in range(i, dims):
                for delta in (step, -step):
                    cand = x.copy()
                    cand[j] = min(1.0, max(0.0, cand[j] + delta))
                    if cand[j] != x[j]:
                        moves.append(cand)
                        coords.append(j)
            if not moves:
                break
            vals = score(np.array(moves))
            better = np.flatnonzero(vals > fx)
            if not better.size:
                break
            k = int(better[0])
            x, fx, improved = moves[k], float(vals[k]), True
            i = coords[k] + 1
        if not improved:
            step *= 0.5
            if step < min_step:
                break
    return x, fx


def propose_next(model: gplib.GPModel, space: SearchSpace, restarts: int,
                 rng: np.random.Generator, n_candidates: int = 2048,
                 best: float | None = None) -> np.ndarray:
    """Unit point maximizing EI: a scrambled-Sobol sweep, then local refinement.

    When EI vanishes everywhere the candidate with the largest posterior
    variance is returned instead.
    """
    best = float(np.min(model.y_raw)) if best is None else best
    m = int(np.ceil(np.log2(max(n_candidates, 2))))
    cands = qmc.Sobol(d=len(space), scramble=True, seed=rng).random_base2(m)[:n_candidates]
    mean, var = model.posterior(cands)
    ei = expected_improvement(mean, var, best)
    if not np.any(ei > 0):
        return cands[int(np.argmax(var))]

    def score(u):
        mu, v = model.posterior(u)
        return expected_improvement(mu, v, best)

    order = np.argsort(-ei, kind="stable")[:restarts]
    best_x, best_ei = cands[order[0]], ei[order[0]]
    for j in order:
        x, fx = _refine(score, cands[j], float(ei[j]))
        if fx > best_ei:
            best_x, best_ei = x, fx
    return best_x


def optimise(fitness: Callable, space: SearchSpace, config: BOConfig | None = None, *,
             default_point=None, log_path: str | Path | None = None,
             resume: bool = True) -> tuple[TrialRecord, list[TrialRecord]]:
    """Run the evaluate / fit / propose loop until ``config.budget`` trials exist.

    ``fitness(params: dict, seed: int)`` returns an objective (or a
    :class:`~ecgbo.trials.FitnessResult`). ``default_point`` (a unit vector,
    mapping or HyperParams) becomes trial 0 of the initial design; the rest
    of the design is a Latin hypercube.
    """
    config = config or BOConfig()
    runner = TrialRunner(fitness, space, path=log_path, resume=resume,
                         failure_objective=config.failure_objective)

    def seed_for(i):
        return config.trial_seed if config.trial_seed is not None else derive_seed(config.seed, i, 0)

    design_rng = np.random.default_rng(derive_seed(config.seed, 0xD5))
    n_random = config.initial_design_size - (default_point is not None)
    design = list(space.sample(n_random, design_rng)) if n_random else []
    if default_point is not None:
        u0 = default_point if isinstance(default_point, np.ndarray) else space.encode(default_point)
        design.insert(0, np.asarray(u0, dtype=np.float64))
    for i, u in enumerate(design):
        source = "default" if (i == 0 and default_point is not None) else "initial_design"
        runner.evaluate(u, source, seed_for(i))

    while len(runner.records) < config.budget:
        i = len(runner.records)
        X = np.array([r.unit_point for r in runner.records])
        y = np.array([r.objective for r in runner.records])
        model = gplib.fit(X, y, restarts=config.gp_restarts,
                          rng=np.random.default_rng(derive_seed(config.seed, i, 1)))
        u = propose_next(model, space, config.acquisition_restarts,
                         np.random.default_rng(derive_seed(config.seed, i, 2)),
                         n_candidates=config.candidates)
        runner.evaluate(u, "acquisition", seed_for(i), gp=model.summary())
    return best_record(runner.records), runner.records
