"""From-scratch regressors and classifiers behind one train / predict / persist surface."""

import logging
from typing import Callable, Dict

import numpy as np

from quantsig.errors import ConfigError, LengthMismatch, NonFiniteValues, SingleClassTraining
from quantsig.models.base import (CLASSIFIER_FAMILIES, REGRESSOR_FAMILIES, ClassifierModel, RegressorModel,
                                  TrainConfig, as_dense)
from quantsig.models.bayes import BernoulliNbModel, GaussianNbModel, fit_bernoulli_nb, fit_gaussian_nb
from quantsig.models.linear import LinearModel, LogisticModel, fit_linear_regression, fit_logistic
from quantsig.models.lstm import LstmModel, fit_lstm
from quantsig.models.mlp import MlpModel, fit_mlp
from quantsig.models.neighbors import KnnModel, fit_knn
from quantsig.models.persistence import load_model, save_model
from quantsig.models.svm import LinearSvmModel, fit_linear_svm
from quantsig.models.trees import (DecisionTreeModel, GradientBoostingModel, RandomForestModel,
                                   fit_decision_tree, fit_gradient_boosting, fit_random_forest)

logger = logging.getLogger(__name__)

CLASSIFIER_TRAINERS: Dict[str, Callable[..., ClassifierModel]] = {
    "lr": fit_logistic,
    "gnb": lambda X, y, cfg: fit_gaussian_nb(X, y),
    "bnb": lambda X, y, cfg: fit_bernoulli_nb(X, y),
    "dt": fit_decision_tree,
    "rf": fit_random_forest,
    "knn": fit_knn,
    "svm": fit_linear_svm,
    "xgb": fit_gradient_boosting,
    "ann": fit_mlp,
}

# display names used in metrics tables
FAMILY_LABELS = {
    "lr": "LR", "gnb": "GNB", "bnb": "BNB", "dt": "DT", "rf": "RF", "knn": "KNN",
    "svm": "SVM", "xgb": "XGB", "ann": "ANN", "linear": "Linear Regression", "lstm": "LSTM",
}


def fit_classifier(X, y, cfg: TrainConfig) -> ClassifierModel:
    if cfg.family not in CLASSIFIER_TRAINERS:
        raise ConfigError(f"{cfg.family!r} is not a classifier family; valid: {', '.join(CLASSIFIER_FAMILIES)}")
    X = as_dense(X)
    y = np.asarray(y)
    if len(y) != X.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} rows but {len(y)} labels")
    if not np.isfinite(X).all():
        raise NonFiniteValues("classifier input contains NaN or inf")
    classes = set(np.unique(y).tolist())
    if not classes <= {0, 1}:
        raise ConfigError(f"labels must be 0/1, got {sorted(classes)}")
    if classes != {0, 1}:
        raise SingleClassTraining(f"training labels contain only class {classes.pop() if classes else None}")
    logger.info("Training %s on %d rows x %d features (seed %d)",
                FAMILY_LABELS[cfg.family], X.shape[0], X.shape[1], cfg.seed)
    return CLASSIFIER_TRAINERS[cfg.family](X, y.astype(int), cfg)


def decision_scores(model: ClassifierModel, X) -> np.ndarray:
    return model.decision_scores(X)


def predict_labels(model: ClassifierModel, X) -> np.ndarray:
    return model.predict_labels(X)


def predict_regressor(model: RegressorModel, X) -> np.ndarray:
    return model.predict(X)


__all__ = [
    "CLASSIFIER_FAMILIES", "REGRESSOR_FAMILIES", "FAMILY_LABELS", "TrainConfig",
    "ClassifierModel", "RegressorModel", "LinearModel", "LstmModel", "LogisticModel", "GaussianNbModel",
    "BernoulliNbModel", "DecisionTreeModel", "RandomForestModel", "KnnModel", "LinearSvmModel",
    "GradientBoostingModel", "MlpModel",
    "fit_linear_regression", "fit_lstm", "predict_regressor", "fit_classifier", "decision_scores",
    "predict_labels", "save_model", "load_model",
]
