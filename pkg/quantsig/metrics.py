"""
Regression and classification metrics.

MAPE is reported in percent. Besides the normalized explained-variance
score, `ev_raw` keeps the plain sum of squared deviations of the
predictions from the mean target.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from quantsig.errors import LengthMismatch, SingleClass, ZeroVariance

logger = logging.getLogger(__name__)

REGRESSION_ROWS = (
    ("R2", "r2"),
    ("Explained Variation", "explained_variance_score"),
    ("MAPE", "mape_percent"),
    ("RMSE", "rmse"),
    ("MAE", "mae"),
)
CLASSIFICATION_ROWS = (
    ("Precision", "precision"),
    ("Recall", "recall"),
    ("F1-score", "f1"),
    ("Accuracy", "accuracy"),
    ("Specificity", "specificity"),
)


@dataclass(frozen=True)
class RegressionReport:
    r2: float
    explained_variance_score: float
    ev_raw: float
    mape_percent: float
    rmse: float
    mae: float
    n: int
    mape_excluded: int = 0


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ClassificationReport:
    precision: float
    recall: float
    f1: float
    accuracy: float
    specificity: float
    matrix: ConfusionMatrix
    precision_undefined: bool = False
    recall_undefined: bool = False
    f1_undefined: bool = False
    specificity_undefined: bool = False


@dataclass(frozen=True)
class RocCurve:
    points: Tuple[Tuple[float, float], ...]
    auc: float

    @property
    def fpr(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def tpr(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])


def _paired(y: Sequence[float], y_hat: Sequence[float], minimum: int) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape or y.ndim != 1:
        raise LengthMismatch(f"shapes differ: {y.shape} vs {y_hat.shape}")
    if len(y) < minimum:
        raise LengthMismatch(f"need at least {minimum} samples, got {len(y)}")
    return y, y_hat


def regression_report(y: Sequence[float], y_hat: Sequence[float]) -> RegressionReport:
    y, y_hat = _paired(y, y_hat, 2)
    residuals = y - y_hat
    deviations = y - y.mean()
    total = np.dot(deviations, deviations)
    if total == 0:
        raise ZeroVariance("R2 is undefined for a constant target")

    nonzero = y != 0
    excluded = int((~nonzero).sum())
    if excluded:
        logger.warning("Excluded %d zero targets from MAPE", excluded)
    mape = 100.0 * float(np.mean(np.abs(residuals[nonzero] / y[nonzero]))) if nonzero.any() else float("nan")

    return RegressionReport(
        r2=float(1.0 - np.dot(residuals, residuals) / total),
        explained_variance_score=float(1.0 - np.var(residuals) / np.var(y)),
        ev_raw=float(np.sum((y_hat - y.mean()) ** 2)),
        mape_percent=mape,
        rmse=float(np.sqrt(np.mean(residuals ** 2))),
        mae=float(np.mean(np.abs(residuals))),
        n=len(y),
        mape_excluded=excluded,
    )


def confusion_matrix(y: Sequence[int], y_hat: Sequence[int]) -> ConfusionMatrix:
    y, y_hat = _paired(y, y_hat, 1)
    truth = y == 1
    predicted = y_hat == 1
    return ConfusionMatrix(
        tp=int(np.sum(truth & predicted)),
        fp=int(np.sum(~truth & predicted)),
        fn=int(np.sum(truth & ~predicted)),
        tn=int(np.sum(~truth & ~predicted)),
    )


def _ratio(numerator: int, denominator: int) -> Tuple[float, bool]:
    if denominator == 0:
        return 0.0, True
    return numerator / denominator, False


def classification_report(y: Sequence[int], y_hat: Sequence[int]) -> ClassificationReport:
    """Precision/recall/F1/accuracy/specificity; zero denominators give 0 with a flag set."""
    matrix = confusion_matrix(y, y_hat)
    precision, precision_undefined = _ratio(matrix.tp, matrix.tp + matrix.fp)
    recall, recall_undefined = _ratio(matrix.tp, matrix.tp + matrix.fn)
    specificity, specificity_undefined = _ratio(matrix.tn, matrix.tn + matrix.fp)
    if precision + recall > 0:
        f1, f1_undefined = 2 * precision * recall / (precision + recall), False
    else:
        f1, f1_undefined = 0.0, True
    return ClassificationReport(
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=(matrix.tp + matrix.tn) / matrix.total,
        specificity=specificity,
        matrix=matrix,
        precision_undefined=precision_undefined,
        recall_undefined=recall_undefined,
        f1_undefined=f1_undefined,
        specificity_undefined=specificity_undefined,
    )


def roc_auc(y: Sequence[int], scores: Sequence[float]) -> RocCurve:
    """ROC curve over descending unique scores; tied scores form one diagonal step.

    The area is accumulated in integer pair units and divided once, so it
    equals the pair-counting statistic P(pos > neg) + P(tie)/2.
    """
    y, scores = _paired(y, scores, 1)
    positives = int(np.sum(y == 1))
    negatives = len(y) - positives
    if positives == 0 or negatives == 0:
        raise SingleClass("ROC needs both classes")

    order = np.argsort(-scores, kind="stable")
    ranked_scores = scores[order]
    ranked_truth = y[order] == 1
    # last position of each tie group
    boundaries = np.flatnonzero(np.diff(ranked_scores) != 0)
    ends = np.concatenate([boundaries, [len(ranked_scores) - 1]])
    tp = np.concatenate([[0], np.cumsum(ranked_truth)[ends]]).astype(np.int64)
    fp = np.concatenate([[0], np.cumsum(~ranked_truth)[ends]]).astype(np.int64)

    doubled_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    auc = doubled_area / (2 * positives * negatives)
    points: List[Tuple[float, float]] = [
        (float(f) / negatives, float(t) / positives) for f, t in zip(fp, tp)
    ]
    return RocCurve(points=tuple(points), auc=float(auc))
