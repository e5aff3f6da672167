"""Gaussian-process regression with an ARD Matern-5/2 kernel.

Targets are standardized internally; kernel hyperparameters are chosen by
maximizing the log marginal likelihood with a derivative-free multistart
search in log space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, lapack, solve_triangular
from scipy.optimize import minimize

from ecgbo.errors import ConfigError, NumericalError, StateError

log = logging.getLogger(__name__)

SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class KernelParams:
    signal_variance: float
    lengthscales: tuple[float, ...]
    noise_variance: float

    def __post_init__(self):
        if self.signal_variance <= 0 or self.noise_variance <= 0 or min(self.lengthscales) <= 0:
            raise ConfigError("kernel hyperparameters must be positive")

    def to_log(self) -> np.ndarray:
        return np.log([self.signal_variance, *self.lengthscales, self.noise_variance])

    @classmethod
    def from_log(cls, theta) -> "KernelParams":
        e = np.exp(np.asarray(theta, dtype=np.float64))
        return cls(float(e[0]), tuple(float(v) for v in e[1:-1]), float(e[-1]))

    def as_dict(self) -> dict:
        return {"signal_variance": self.signal_variance,
                "lengthscales": list(self.lengthscales),
                "noise_variance": self.noise_variance}


@dataclass(frozen=True)
class GPBounds:
    signal_variance: tuple[float, float] = (1e-4, 1e2)
    lengthscale: tuple[float, float] = (0.1, 0.7)
    noise_variance: tuple[float, float] = (1e-8, 1e-2)

    def log_box(self, dims: int) -> np.ndarray:
        rows = [self.signal_variance] + [self.lengthscale] * dims + [self.noise_variance]
        return np.log(np.array(rows, dtype=np.float64))


def matern52(r: np.ndarray) -> np.ndarray:
    """Unit-variance Matern-5/2 correlation at scaled distance ``r``."""
    return (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * np.exp(-SQRT5 * r)


def scaled_distance(a: np.ndarray, b: np.ndarray, lengthscales) -> np.ndarray:
    a = np.atleast_2d(a) / np.asarray(lengthscales)
    b = np.atleast_2d(b) / np.asarray(lengthscales)
    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.sqrt(np.maximum(d2, 0.0))


def kernel_matrix(a, b, kernel: KernelParams) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ConfigError("kernel inputs must be finite")
    if len(kernel.lengthscales) != a.shape[1] or a.shape[1] != b.shape[1]:
        raise ConfigError("lengthscale count must match input dimension")
    k = kernel.signal_variance * matern52(scaled_distance(a, b, kernel.lengthscales))
    if a is b or (a.shape == b.shape and np.array_equal(a, b)):
        k = 0.5 * (k + k.T)
        np.fill_diagonal(k, kernel.signal_variance)
    return k


def jittered_cholesky(k: np.ndarray, start: float = 1e-10, limit: float = 1e-4):
    """Cholesky factor of ``k``, adding diagonal jitter (x10 per retry) if needed.

    Returns ``(L, jitter)``; raises :class:`NumericalError` past ``limit``.
    """
    chol, info = lapack.dpotrf(k, lower=1, clean=1)
    if info == 0:
        return chol, 0.0
    jitter = start
    eye = np.eye(len(k))
    while jitter <= limit * (1 + 1e-12):
        chol, info = lapack.dpotrf(k + jitter * eye, lower=1, clean=1)
        if info == 0:
            return chol, jitter
        jitter *= 10.0
    raise NumericalError(f"Cholesky failed with jitter up to {limit:g}")


@dataclass
class GPModel:
    X: np.ndarray
    y_raw: np.ndarray
    y_mean: float
    y_scale: float
    kernel: KernelParams
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float
    restarts: list = field(default_factory=list)  # (start_lml, final_lml) per restart

    @property
    def y(self) -> np.ndarray:
        """Standardized targets the kernel was fitted to."""
        return (self.y_raw - self.y_mean) / self.y_scale

    def log_marginal_likelihood(self) -> float:
        n = len(self.y)
        return float(-0.5 * self.y @ self.alpha - np.log(np.diag(self.chol)).sum()
                     - 0.5 * n * np.log(2 * np.pi))

    def posterior(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Latent posterior mean and variance (original target units) at rows of ``x``."""
        if self.chol is None:
            raise StateError("GP has not been fitted")
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        ks = kernel_matrix(x, self.X, self.kernel)
        mean = ks @ self.alpha
        v = solve_triangular(self.chol, ks.T, lower=True)
        var = self.kernel.signal_variance - (v * v).sum(axis=0)
        var = np.maximum(var, 0.0)
        return self.y_mean + self.y_scale * mean, self.y_scale ** 2 * var

    def summary(self) -> dict:
        return {**self.kernel.as_dict(), "jitter": self.jitter,
                "log_marginal_likelihood": self.log_marginal_likelihood()}


def _standardize(y: np.ndarray) -> tuple[float, float]:
    mean = float(y.mean())
    scale = float(y.std())
    return mean, scale if scale > 1e-12 else 1.0


def _factor(X, ys, kernel: KernelParams):
    k = kernel_matrix(X, X, kernel) + kernel.noise_variance * np.eye(len(X))
    chol, jitter = jittered_cholesky(k)
    alpha = cho_solve((chol, True), ys)
    return chol, alpha, jitter


def lml_at(X, ys, kernel: KernelParams) -> float:
    """Log marginal likelihood of standardized targets ``ys`` under ``kernel``."""
    chol, alpha, _ = _factor(X, ys, kernel)
    return float(-0.5 * ys @ alpha - np.log(np.diag(chol)).sum() - 0.5 * len(ys) * np.log(2 * np.pi))


def fit(X, y, *, kernel: KernelParams | None = None, bounds: GPBounds | None = None,
        restarts: int = 8, rng: np.random.Generator | None = None) -> GPModel:
    """Fit a GP to observations ``(X, y)``.

    With ``kernel`` given the hyperparameters are held fixed; otherwise they
    maximize the log marginal likelihood over ``restarts`` Powell runs (the
    first from a neutral start, the rest uniform in the log box).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(X) != len(y):
        raise ConfigError("X and y lengths differ")
    if len(y) < 2:
        raise StateError("GP fit needs at least two observations")
    y_mean, y_scale = _standardize(y)
    ys = (y - y_mean) / y_scale
    dims = X.shape[1]

    history = []
    if kernel is None:
        bounds = bounds or GPBounds()
        box = bounds.log_box(dims)
        rng = rng if rng is not None else np.random.default_rng(0)
        neutral = np.log(np.array([1.0] + [0.5] * dims + [1e-4]))
        starts = [np.clip(neutral, box[:, 0], box[:, 1])]
        starts += [rng.uniform(box[:, 0], box[:, 1]) for _ in range(restarts - 1)]
        sq_diff = (X[:, None, :] - X[None, :, :]) ** 2
        eye = np.eye(len(X))
        const = 0.5 * len(ys) * np.log(2 * np.pi)

        def neg_lml(theta):
            # inlined kernel + Cholesky: this runs thousands of times per fit
            e = np.exp(theta)
            r = np.sqrt(sq_diff @ (1.0 / e[1:-1] ** 2))
            k = e[0] * matern52(r) + e[-1] * eye
            try:
                chol, _ = jittered_cholesky(k)
            except NumericalError:
                return 1e25
            a, _ = lapack.dtrtrs(chol, ys, lower=1)
            return 0.5 * a @ a + np.log(np.diag(chol)).sum() + const

        best_theta, best_val = None, np.inf
        for s in starts:
            start_val = neg_lml(s)
            res = minimize(neg_lml, s, method="Powell", bounds=box,
                           options={"xtol": 1e-2, "ftol": 1e-6, "maxfev": 400})
            theta, val = (res.x, res.fun) if res.fun <= start_val else (s, start_val)
            history.append((-start_val, -val))
            if val < best_val:
                best_theta, best_val = np.clip(theta, box[:, 0], box[:, 1]), val
        kernel = KernelParams.from_log(best_theta)
    elif len(kernel.lengthscales) != dims:
        raise ConfigError("lengthscale count must match input dimension")

    chol, alpha, jitter = _factor(X, ys, kernel)
    model = GPModel(X, y, y_mean, y_scale, kernel, chol, alpha, jitter, history)
    log.debug("GP fit: %s", model.summary())
    return model
