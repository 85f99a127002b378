"""Linear SVM trained with Pegasos-style stochastic subgradient steps on the hinge loss."""

import logging
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from quantsig.models.base import STREAM_SHUFFLE, ClassifierModel, TrainConfig, as_dense, check_width, random_stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LinearSvmModel(ClassifierModel):
    family: ClassVar[str] = "svm"
    threshold: ClassVar[float] = 0.0
    weights: np.ndarray
    bias: float
    objective_history: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def decision_scores(self, X) -> np.ndarray:
        return check_width(X, len(self.weights)) @ self.weights + self.bias


def svm_objective(X: np.ndarray, signs: np.ndarray, weights: np.ndarray, lam: float) -> float:
    """lam/2 * |w|^2 + mean hinge loss, on the bias-augmented inputs."""
    hinge = np.maximum(0.0, 1.0 - signs * (X @ weights))
    return float(0.5 * lam * np.dot(weights, weights) + hinge.mean())


def fit_linear_svm(X, y, cfg: TrainConfig, project: bool = True) -> LinearSvmModel:
    """The bias is learned as the weight of a constant 1 column and is regularized with the rest."""
    X = as_dense(X)
    augmented = np.hstack([X, np.ones((X.shape[0], 1))])
    signs = np.where(np.asarray(y) == 1, 1.0, -1.0)
    lam = cfg.l2
    radius = 1.0 / np.sqrt(lam) if lam > 0 else np.inf
    rng = random_stream(cfg.seed, 0, STREAM_SHUFFLE)

    weights = np.zeros(augmented.shape[1])
    history = np.empty(cfg.epochs)
    step = 0
    for epoch in range(cfg.epochs):
        for row in rng.permutation(augmented.shape[0]):
            step += 1
            eta = 1.0 / (lam * step) if lam > 0 else 1.0 / np.sqrt(step)
            margin = signs[row] * np.dot(weights, augmented[row])
            weights *= 1.0 - eta * lam
            if margin < 1.0:
                weights += eta * signs[row] * augmented[row]
            if project:
                norm = np.linalg.norm(weights)
                if norm > radius:
                    weights *= radius / norm
        history[epoch] = svm_objective(augmented, signs, weights, lam)
        logger.debug("SVM epoch %d objective %.6f", epoch + 1, history[epoch])

    logger.info("Linear SVM: objective %.6f -> %.6f over %d epochs", history[0], history[-1], cfg.epochs)
    return LinearSvmModel(weights=weights[:-1].copy(), bias=float(weights[-1]), objective_history=history)
