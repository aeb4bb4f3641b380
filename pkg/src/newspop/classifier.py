"""L2-penalized logistic regression trained by gradient descent with Armijo backtracking.

Objective over examples ``(x_i, y_i)`` with ``y_i`` in {-1, +1}::

    0.5 * w'w + C * sum_i log(1 + exp(-y_i * w'x_i))

Inputs are z-scored with training statistics and an unpenalized intercept
is appended after standardization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    tolerance: float = 1e-6
    max_iterations: int = 5000
    fit_intercept: bool = True
    armijo_c1: float = 1e-4
    backtrack: float = 0.5

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")


def _log1pexp(t: np.ndarray) -> np.ndarray:
    # log(1 + e^t) without overflow
    return np.logaddexp(0.0, t)


def _penalty_mask(n_dims: int, fit_intercept: bool) -> np.ndarray:
    mask = np.ones(n_dims)
    if fit_intercept:
        mask[-1] = 0.0
    return mask


def objective(w, X, y, C, penalized=None) -> float:
    """Penalized logistic loss; ``penalized`` masks which weights enter ``0.5 w'w``."""
    w = np.asarray(w, dtype=np.float64)
    wp = w if penalized is None else w * penalized
    margins = y * (X @ w)
    return float(0.5 * wp @ wp + C * _log1pexp(-margins).sum())


def gradient(w, X, y, C, penalized=None) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    wp = w if penalized is None else w * penalized
    margins = y * (X @ w)
    return wp + C * (X.T @ (-y * expit(-margins)))


@dataclass
class OptimizeResult:
    w: np.ndarray
    n_iterations: int
    converged: bool
    objective_trace: list[float] = field(default_factory=list)
    grad_norm: float = float("nan")


def minimize(X, y, config: TrainConfig, penalized=None) -> OptimizeResult:
    """Steepest descent from w = 0 with Armijo backtracking.

    The trial step of each iteration is the Barzilai-Borwein step from the
    last two iterates (1.0 on the first iteration); backtracking then
    enforces sufficient decrease, so accepted objectives never increase.
    """
    w = np.zeros(X.shape[1])
    f = objective(w, X, y, config.C, penalized)
    g = gradient(w, X, y, config.C, penalized)
    trace = [f]
    step = 1.0
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    for it in range(config.max_iterations):
        if gnorm <= config.tolerance:
            return OptimizeResult(w, it, True, trace, gnorm)
        gg = float(g @ g)
        t = step
        while True:
            w_new = w - t * g
            f_new = objective(w_new, X, y, config.C, penalized)
            if f_new <= f - config.armijo_c1 * t * gg:
                break
            t *= config.backtrack
            if t < 1e-20:
                logger.warning("line search stalled at iteration %d", it)
                return OptimizeResult(w, it, False, trace, gnorm)
        g_new = gradient(w_new, X, y, config.C, penalized)
        s = w_new - w
        r = g_new - g
        sr = float(s @ r)
        step = float(s @ s) / sr if sr > 0 else 2.0 * t
        w, f, g = w_new, f_new, g_new
        trace.append(f)
        gnorm = float(np.max(np.abs(g)))
    return OptimizeResult(w, config.max_iterations, gnorm <= config.tolerance, trace, gnorm)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        scale = np.where(std > 0, std, 1.0)
        return cls(mean, scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale


@dataclass(frozen=True)
class LogisticModel:
    """Fitted weights over standardized inputs (intercept last when present)."""

    w: np.ndarray
    standardizer: Standardizer
    fit_intercept: bool
    config: TrainConfig
    n_iterations: int = 0
    converged: bool = True
    warnings: tuple[str, ...] = ()

    def design(self, X: np.ndarray) -> np.ndarray:
        Z = self.standardizer.transform(np.atleast_2d(X))
        if self.fit_intercept:
            Z = np.hstack([Z, np.ones((Z.shape[0], 1))])
        # row-major so each row's dot product takes the same code path however X was sliced
        return np.ascontiguousarray(Z)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        # one dot per row: a day's score must not depend on how many days are scored with it
        return np.array([float(z @ self.w) for z in self.design(X)], dtype=np.float64)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """P(high | x) for every row of ``X``."""
        return expit(self.decision_function(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)


def to_signed(labels) -> np.ndarray:
    """{0, 1} -> {-1, +1}."""
    return np.where(np.asarray(labels) > 0, 1.0, -1.0)


def train(X: np.ndarray, labels, config: TrainConfig = TrainConfig()) -> LogisticModel:
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] != labels.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, labels {labels.shape}")
    if X.shape[0] == 0:
        raise ValueError("no training examples")
    warnings = []
    single_class = np.unique(labels).size < 2
    if single_class:
        warnings.append(f"single-class training set (all labels = {int(labels[0])})")
    std = Standardizer.fit(X)
    Z = std.transform(X)
    if config.fit_intercept:
        Z = np.hstack([Z, np.ones((Z.shape[0], 1))])
    # with one class an unpenalized intercept has no finite optimum
    mask = _penalty_mask(Z.shape[1], config.fit_intercept and not single_class)
    res = minimize(Z, to_signed(labels), config, mask)
    if not res.converged:
        warnings.append(
            f"optimizer stopped after {res.n_iterations} iterations, |grad|_inf = {res.grad_norm:.3g}"
        )
    for msg in warnings:
        logger.warning(msg)
    return LogisticModel(
        w=res.w,
        standardizer=std,
        fit_intercept=config.fit_intercept,
        config=config,
        n_iterations=res.n_iterations,
        converged=res.converged,
        warnings=tuple(warnings),
    )


def predict_proba(x, model: LogisticModel) -> float:
    """P(high | x) for a single feature vector."""
    return float(model.predict_proba(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])
