"""Least-squares linear regression and logistic regression."""

import logging
from dataclasses import dataclass, field
from typing import ClassVar, Tuple

import numpy as np
from scipy import linalg, special

from quantsig.errors import LengthMismatch, NonFiniteValues, SingularSystem
from quantsig.models.base import ClassifierModel, RegressorModel, TrainConfig, as_dense, check_width

logger = logging.getLogger(__name__)

SINGULAR_TOLERANCE = 1e-12
MONOTONE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class LinearModel(RegressorModel):
    family: ClassVar[str] = "linear"
    weights: np.ndarray
    intercept: float
    feature_names: Tuple[str, ...] = ()

    @property
    def n_features(self) -> int:
        return len(self.weights)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 0:
            X = X.reshape(1, 1)
        elif X.ndim == 1:
            # a 1-D batch for single-feature models, otherwise one row
            X = X.reshape(-1, 1) if self.n_features == 1 else X.reshape(1, -1)
        X = check_width(X, self.n_features)
        return X @ self.weights + self.intercept


def fit_linear_regression(X, y, ridge: float = 1e-8, feature_names=()) -> LinearModel:
    """Minimize ||Xw + b - y||^2 + ridge*||w||^2 by QR on the augmented system.

    The intercept is not penalized. At ridge=0 a rank-deficient design
    raises SingularSystem.
    """
    X = as_dense(X)
    y = np.asarray(y, dtype=float)
    if len(y) != X.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} rows but {len(y)} targets")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise NonFiniteValues("linear regression input contains NaN or inf")
    n_rows, n_cols = X.shape

    design = np.hstack([X, np.ones((n_rows, 1))])
    target = y
    if ridge > 0:
        penalty = np.hstack([np.sqrt(ridge) * np.eye(n_cols), np.zeros((n_cols, 1))])
        design = np.vstack([design, penalty])
        target = np.concatenate([y, np.zeros(n_cols)])
    if design.shape[0] < design.shape[1] and ridge == 0:
        raise SingularSystem(f"{n_rows} rows cannot determine {n_cols + 1} coefficients")

    q, r = linalg.qr(design, mode="economic")
    diagonal = np.abs(np.diag(r))
    if ridge == 0 and (diagonal.size == 0 or diagonal.min() <= SINGULAR_TOLERANCE * max(diagonal.max(), 1.0)):
        raise SingularSystem("design matrix is rank deficient")
    coefficients = linalg.solve_triangular(r, q.T @ target)
    logger.debug("Linear fit on %dx%d, ridge=%g", n_rows, n_cols, ridge)
    return LinearModel(weights=coefficients[:n_cols], intercept=float(coefficients[n_cols]),
                       feature_names=tuple(feature_names))


@dataclass(frozen=True, eq=False)
class LogisticModel(ClassifierModel):
    family: ClassVar[str] = "lr"
    threshold: ClassVar[float] = 0.5
    weights: np.ndarray
    bias: float
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0), compare=False)

    def decision_scores(self, X) -> np.ndarray:
        X = check_width(X, len(self.weights))
        return special.expit(X @ self.weights + self.bias)


def logistic_loss(X: np.ndarray, y: np.ndarray, weights: np.ndarray, bias: float, l2: float) -> float:
    z = X @ weights + bias
    # log(1 + e^z) - y*z is the log-loss written without overflow
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(weights, weights))


def _gradient_descent(X, y, learning_rate, l2, epochs):
    n_rows, n_cols = X.shape
    weights = np.zeros(n_cols)
    bias = 0.0
    history = np.empty(epochs + 1)
    history[0] = logistic_loss(X, y, weights, bias, l2)
    monotone = True
    for epoch in range(1, epochs + 1):
        residual = special.expit(X @ weights + bias) - y
        weights = weights - learning_rate * (X.T @ residual / n_rows + l2 * weights)
        bias = bias - learning_rate * float(np.mean(residual))
        history[epoch] = logistic_loss(X, y, weights, bias, l2)
        if history[epoch] > history[epoch - 1] + MONOTONE_TOLERANCE:
            monotone = False
    return weights, bias, history, monotone


def fit_logistic(X, y, cfg: TrainConfig) -> LogisticModel:
    """Full-batch gradient descent; if the loss ever rises the run restarts once at half the rate."""
    X = as_dense(X)
    y = np.asarray(y, dtype=float)
    learning_rate = cfg.learning_rate
    weights, bias, history, monotone = _gradient_descent(X, y, learning_rate, cfg.l2, cfg.epochs)
    if not monotone:
        learning_rate /= 2
        logger.warning("Logistic loss increased; retrying with learning_rate=%g", learning_rate)
        weights, bias, history, monotone = _gradient_descent(X, y, learning_rate, cfg.l2, cfg.epochs)
        if not monotone:
            logger.warning("Logistic loss still not monotone at learning_rate=%g", learning_rate)
    logger.info("Logistic regression: final loss %.6f after %d epochs", history[-1], cfg.epochs)
    return LogisticModel(weights=weights, bias=bias, loss_history=history)
