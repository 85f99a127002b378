"""Shared model plumbing: TrainConfig, seeded random streams, Adam, model base classes."""

from dataclasses import dataclass, fields
from typing import ClassVar, Dict, Optional

import numpy as np
from scipy import sparse

from quantsig.errors import ConfigError, ShapeMismatch

CLASSIFIER_FAMILIES = ("lr", "gnb", "bnb", "dt", "rf", "knn", "svm", "xgb", "ann")
REGRESSOR_FAMILIES = ("linear", "lstm")
KNN_METRICS = ("euclidean", "manhattan")

# family -> defaults for the keys left as None in TrainConfig
FAMILY_DEFAULTS: Dict[str, Dict[str, object]] = {
    "lr": {"epochs": 500, "learning_rate": 0.1, "l2": 1e-4},
    "svm": {"epochs": 20, "l2": 1e-4},
    "ann": {"epochs": 200, "learning_rate": 1e-3, "l2": 0.0, "hidden_size": 64},
    "lstm": {"epochs": 50, "learning_rate": 1e-3, "hidden_size": 32},
    "dt": {"max_depth": 10},
    "rf": {"max_depth": 10},
    "xgb": {"max_depth": 3, "learning_rate": 0.1},
}
FALLBACK_DEFAULTS = {"epochs": 100, "learning_rate": 0.1, "l2": 0.0, "hidden_size": 32, "max_depth": 10}

# Philox key word 1 separates independent uses of one seed
STREAM_GENERAL = 0
STREAM_TREE = 1
STREAM_SHUFFLE = 2
STREAM_INIT = 3
MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for every family; None picks the family default."""
    family: str = "lr"
    seed: int = 0
    epochs: Optional[int] = None
    learning_rate: Optional[float] = None
    l2: Optional[float] = None
    k: int = 5
    knn_metric: str = "euclidean"
    max_depth: Optional[int] = None
    min_samples_leaf: int = 2
    n_trees: int = 100
    max_features: Optional[int] = None
    bootstrap: bool = True
    hidden_size: Optional[int] = None
    window_length: int = 30
    batch_size: int = 32
    clip_norm: float = 5.0
    ridge: float = 1e-8

    def __post_init__(self):
        if self.family not in CLASSIFIER_FAMILIES + REGRESSOR_FAMILIES:
            raise ConfigError(f"unknown model family {self.family!r}; valid: "
                              f"{', '.join(CLASSIFIER_FAMILIES + REGRESSOR_FAMILIES)}")
        defaults = FAMILY_DEFAULTS.get(self.family, {})
        for key, fallback in FALLBACK_DEFAULTS.items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, defaults.get(key, fallback))
        if not 0 <= self.seed <= MASK64:
            raise ConfigError(f"seed must fit in 64 bits, got {self.seed}")
        positive_ints = ("epochs", "k", "max_depth", "min_samples_leaf", "n_trees",
                         "hidden_size", "window_length", "batch_size")
        for key in positive_ints:
            if int(getattr(self, key)) < 1:
                raise ConfigError(f"{key} must be >= 1, got {getattr(self, key)}")
        if self.max_features is not None and self.max_features < 1:
            raise ConfigError(f"max_features must be >= 1, got {self.max_features}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.l2 < 0 or self.ridge < 0:
            raise ConfigError("l2 and ridge must be non-negative")
        if not self.clip_norm > 0:
            raise ConfigError(f"clip_norm must be positive, got {self.clip_norm}")
        if self.knn_metric not in KNN_METRICS:
            raise ConfigError(f"knn_metric must be one of {KNN_METRICS}, got {self.knn_metric!r}")

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]


def random_stream(seed: int, index: int = 0, purpose: int = STREAM_GENERAL) -> np.random.Generator:
    """Counter-based generator for (seed XOR index, purpose); streams never overlap."""
    key = ((seed ^ index) & MASK64) | (purpose << 64)
    return np.random.Generator(np.random.Philox(key=key))


def as_dense(X) -> np.ndarray:
    if sparse.issparse(X):
        return X.toarray().astype(float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D feature matrix, got shape {X.shape}")
    return X


def check_width(X: np.ndarray, n_features: int) -> np.ndarray:
    X = as_dense(X)
    if X.shape[1] != n_features:
        raise ShapeMismatch(f"model expects {n_features} features, input has {X.shape[1]}")
    return X


def clip_by_global_norm(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    norm = float(np.sqrt(sum(np.sum(g * g) for g in grads.values())))
    if norm > max_norm:
        scale = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * scale
    return norm


class Adam:
    def __init__(self, params: Dict[str, np.ndarray], learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(value) for name, value in params.items()}
        self.v = {name: np.zeros_like(value) for name, value in params.items()}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for name, grad in grads.items():
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * grad * grad
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


class ClassifierModel:
    """Binary classifier; subclasses set `family` and `threshold` and implement decision_scores."""
    family: ClassVar[str] = ""
    threshold: ClassVar[float] = 0.5

    def decision_scores(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict_labels(self, X) -> np.ndarray:
        return (self.decision_scores(X) >= self.threshold).astype(int)


class RegressorModel:
    family: ClassVar[str] = ""

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError
