"""k-nearest-neighbour classifier."""

from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy.spatial.distance import cdist

from quantsig.models.base import ClassifierModel, TrainConfig, as_dense, check_width

SCIPY_METRIC = {"euclidean": "euclidean", "manhattan": "cityblock"}
QUERY_CHUNK = 1024


@dataclass(frozen=True, eq=False)
class KnnModel(ClassifierModel):
    """Score is the class-1 fraction among the k nearest training rows; equal distances favour lower rows."""
    family: ClassVar[str] = "knn"
    threshold: ClassVar[float] = 0.5
    train_X: np.ndarray
    train_y: np.ndarray
    k: int
    metric: str = "euclidean"

    def neighbours(self, X) -> np.ndarray:
        X = check_width(X, self.train_X.shape[1])
        k = min(self.k, len(self.train_y))
        chunks = []
        for start in range(0, X.shape[0], QUERY_CHUNK):
            distances = cdist(X[start:start + QUERY_CHUNK], self.train_X, metric=SCIPY_METRIC[self.metric])
            chunks.append(np.argsort(distances, axis=1, kind="stable")[:, :k])
        if not chunks:
            return np.zeros((0, k), dtype=np.int64)
        return np.vstack(chunks)

    def decision_scores(self, X) -> np.ndarray:
        return self.train_y[self.neighbours(X)].mean(axis=1)


def fit_knn(X, y, cfg: TrainConfig) -> KnnModel:
    return KnnModel(train_X=as_dense(X).copy(), train_y=np.asarray(y, dtype=float).copy(),
                    k=cfg.k, metric=cfg.knn_metric)
