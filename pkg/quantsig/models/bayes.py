"""Gaussian and Bernoulli naive Bayes."""

import logging
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from quantsig.errors import NonBinaryFeatures
from quantsig.models.base import ClassifierModel, as_dense, check_width

logger = logging.getLogger(__name__)

VARIANCE_FLOOR_RATIO = 1e-9
SMOOTHING = 1.0


def _priors(y: np.ndarray) -> np.ndarray:
    positives = float(np.sum(y == 1))
    return np.array([len(y) - positives, positives]) / len(y)


@dataclass(frozen=True, eq=False)
class GaussianNbModel(ClassifierModel):
    """Scores are log P(1|x) - log P(0|x) up to the shared evidence term."""
    family: ClassVar[str] = "gnb"
    threshold: ClassVar[float] = 0.0
    priors: np.ndarray     # (2,)
    means: np.ndarray      # (2, n_features)
    variances: np.ndarray  # (2, n_features), already floored
    variance_floor: float

    def _log_joint(self, X: np.ndarray) -> np.ndarray:
        joint = np.empty((X.shape[0], 2))
        for label in (0, 1):
            var = self.variances[label]
            log_density = -0.5 * (np.log(2.0 * np.pi * var) + (X - self.means[label]) ** 2 / var)
            joint[:, label] = np.log(self.priors[label]) + log_density.sum(axis=1)
        return joint

    def decision_scores(self, X) -> np.ndarray:
        joint = self._log_joint(check_width(X, self.means.shape[1]))
        return joint[:, 1] - joint[:, 0]


def fit_gaussian_nb(X, y) -> GaussianNbModel:
    X = as_dense(X)
    y = np.asarray(y)
    max_variance = float(X.var(axis=0).max())
    # constant inputs would leave the floor at zero
    floor = VARIANCE_FLOOR_RATIO * max_variance if max_variance > 0 else VARIANCE_FLOOR_RATIO
    means = np.vstack([X[y == label].mean(axis=0) for label in (0, 1)])
    variances = np.vstack([X[y == label].var(axis=0) for label in (0, 1)])
    floored = int(np.sum(variances < floor))
    if floored:
        logger.info("Gaussian NB: %d class variances raised to the floor %.3g", floored, floor)
    return GaussianNbModel(priors=_priors(y), means=means, variances=np.maximum(variances, floor),
                           variance_floor=floor)


@dataclass(frozen=True, eq=False)
class BernoulliNbModel(ClassifierModel):
    family: ClassVar[str] = "bnb"
    threshold: ClassVar[float] = 0.0
    priors: np.ndarray
    probabilities: np.ndarray  # (2, n_features), P(x_j = 1 | class)

    def decision_scores(self, X) -> np.ndarray:
        X = check_width(X, self.probabilities.shape[1])
        _require_binary(X)
        log_p = np.log(self.probabilities)
        log_q = np.log1p(-self.probabilities)
        joint = np.log(self.priors) + X @ (log_p - log_q).T + log_q.sum(axis=1)
        return joint[:, 1] - joint[:, 0]


def _require_binary(X: np.ndarray) -> None:
    if not np.all((X == 0) | (X == 1)):
        raise NonBinaryFeatures("Bernoulli naive Bayes needs 0/1 features; use binary bag-of-words")


def fit_bernoulli_nb(X, y) -> BernoulliNbModel:
    X = as_dense(X)
    _require_binary(X)
    y = np.asarray(y)
    probabilities = np.vstack([
        (X[y == label].sum(axis=0) + SMOOTHING) / (np.sum(y == label) + 2.0 * SMOOTHING)
        for label in (0, 1)
    ])
    return BernoulliNbModel(priors=_priors(y), probabilities=probabilities)
