"""
Feature preprocessing: min-max scaling, Pearson filter selection,
chronological splitting and PCA.

Scalers and PCA models are fitted on training rows only; the pipeline in
quantsig.cli enforces that.
"""

import logging
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from quantsig.errors import (
    BadFractions,
    ColumnMismatch,
    ConfigError,
    FileAccessError,
    InsufficientHistory,
    LengthMismatch,
    MalformedHeader,
    NonFiniteValues,
    ShapeMismatch,
    TooManyComponents,
    ZeroVariance,
)

logger = logging.getLogger(__name__)

JACOBI_TOLERANCE = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class FeatureMatrix:
    """Named feature columns, an optional target and an ordered row index."""
    column_names: Tuple[str, ...]
    rows: np.ndarray
    target: Optional[np.ndarray] = None
    index: Tuple = ()

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise ShapeMismatch(f"rows must be 2-D, got shape {rows.shape}")
        names = tuple(self.column_names)
        if rows.shape[1] != len(names):
            raise ShapeMismatch(f"{len(names)} names for {rows.shape[1]} columns")
        if len(set(names)) != len(names):
            raise ColumnMismatch(f"duplicate column names in {names}")
        if rows.shape[0] < 1:
            raise InsufficientHistory("feature matrix has no rows")
        if not np.isfinite(rows).all():
            raise NonFiniteValues("feature matrix contains non-finite values")
        index = tuple(self.index) if len(self.index) else tuple(range(rows.shape[0]))
        if len(index) != rows.shape[0]:
            raise ShapeMismatch(f"index has {len(index)} keys for {rows.shape[0]} rows")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "index", index)
        if self.target is not None:
            target = np.asarray(self.target, dtype=float)
            if target.shape != (rows.shape[0],):
                raise ShapeMismatch(f"target shape {target.shape} for {rows.shape[0]} rows")
            if not np.isfinite(target).all():
                raise NonFiniteValues("target contains non-finite values")
            object.__setattr__(self, "target", target)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_cols(self) -> int:
        return self.rows.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.column_names.index(name)]

    def take(self, positions: Sequence[int]) -> "FeatureMatrix":
        positions = np.asarray(positions, dtype=int)
        return FeatureMatrix(
            column_names=self.column_names,
            rows=self.rows[positions],
            target=None if self.target is None else self.target[positions],
            index=tuple(self.index[i] for i in positions),
        )

    def select_columns(self, names: Sequence[str]) -> "FeatureMatrix":
        missing = [name for name in names if name not in self.column_names]
        if missing:
            raise ColumnMismatch(f"unknown columns {missing}")
        positions = [self.column_names.index(name) for name in names]
        return replace(self, column_names=tuple(names), rows=self.rows[:, positions])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.rows, columns=list(self.column_names))
        keys = [key.isoformat() if isinstance(key, date) else key for key in self.index]
        frame.insert(0, "date", keys)
        if self.target is not None:
            frame["target"] = self.target
        return frame

    def to_csv(self, path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, lineterminator="\n")
        return path

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        try:
            frame = pd.read_csv(path, dtype={"date": str})
        except (UnicodeDecodeError, pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
            raise MalformedHeader(f"{path} is not a feature CSV: {exc}") from exc
        except OSError as exc:
            raise FileAccessError(path, exc.strerror or exc) from exc
        if "date" not in frame.columns:
            raise ColumnMismatch(f"{path} has no date column")
        keys = []
        for key in frame["date"]:
            try:
                keys.append(date.fromisoformat(key))
            except (TypeError, ValueError):
                keys.append(key)
        target = frame.pop("target").to_numpy(dtype=float) if "target" in frame.columns else None
        features = frame.drop(columns=["date"])
        return cls(tuple(features.columns), features.to_numpy(dtype=float), target, tuple(keys))


@dataclass(frozen=True)
class ScalerParams:
    column_names: Tuple[str, ...]
    a_min: np.ndarray
    a_max: np.ndarray

    def transform(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        span = self.a_max - self.a_min
        constant = span == 0
        scaled = (values - self.a_min) / np.where(constant, 1.0, span)
        return np.where(constant, 0.0, scaled)

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * (self.a_max - self.a_min) + self.a_min


def fit_minmax(matrix: FeatureMatrix) -> ScalerParams:
    return ScalerParams(matrix.column_names, matrix.rows.min(axis=0), matrix.rows.max(axis=0))


def fit_minmax_values(values: Sequence[float], name: str = "value") -> ScalerParams:
    values = np.asarray(values, dtype=float)
    return ScalerParams((name,), np.array([values.min()]), np.array([values.max()]))


def apply_minmax(matrix: FeatureMatrix, params: ScalerParams) -> FeatureMatrix:
    """Map each column onto [0, 1] by the fitted extremes; unseen data is not clipped."""
    if tuple(params.column_names) != matrix.column_names:
        raise ColumnMismatch(
            f"scaler fitted on {list(params.column_names)}, matrix has {list(matrix.column_names)}")
    return replace(matrix, rows=params.transform(matrix.rows))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"pearson needs equal-length vectors, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise LengthMismatch("pearson needs at least two observations")
    dx = x - x.mean()
    dy = y - y.mean()
    var_x = np.dot(dx, dx)
    var_y = np.dot(dy, dy)
    if var_x == 0 or var_y == 0:
        raise ZeroVariance("pearson is undefined for a constant vector")
    return float(np.clip(np.dot(dx, dy) / np.sqrt(var_x * var_y), -1.0, 1.0))


@dataclass(frozen=True)
class SelectionEntry:
    column: str
    rank: Optional[int]
    score: Optional[float]
    kept: bool
    reason: str


@dataclass(frozen=True)
class SelectionReport:
    top_k: int
    redundancy: float
    entries: Tuple[SelectionEntry, ...]

    @property
    def kept(self) -> List[str]:
        return [entry.column for entry in self.entries if entry.kept]

    @property
    def dropped(self) -> List[str]:
        return [entry.column for entry in self.entries if not entry.kept]

    def to_text(self) -> str:
        lines = [f"# feature selection: top_k={self.top_k} redundancy={self.redundancy}"]
        for entry in self.entries:
            rank = "-" if entry.rank is None else str(entry.rank)
            score = "-" if entry.score is None else f"{entry.score:.6f}"
            status = "kept" if entry.kept else "dropped"
            lines.append(f"{rank:>4}  {entry.column:<20} |r|={score:<10} {status:<8} {entry.reason}")
        return "\n".join(lines) + "\n"


def select_features(matrix: FeatureMatrix, top_k: int,
                    redundancy: float = 0.95) -> Tuple[FeatureMatrix, SelectionReport]:
    """Rank columns by |corr| with the target and keep up to `top_k` non-redundant ones.

    A column is dropped when its |corr| with any already kept column exceeds
    `redundancy`. Ties in score keep column order.
    """
    if top_k < 1:
        raise ConfigError(f"top_k must be >= 1, got {top_k}")
    if matrix.target is None:
        raise ColumnMismatch("feature selection needs a target")
    if np.ptp(matrix.target) == 0:
        raise ZeroVariance("target is constant, correlations are undefined")

    entries: List[SelectionEntry] = []
    scored = []
    for position, name in enumerate(matrix.column_names):
        values = matrix.rows[:, position]
        if np.ptp(values) == 0:
            entries.append(SelectionEntry(name, None, None, False, "zero variance"))
            continue
        scored.append((abs(pearson(values, matrix.target)), position, name))
    if not scored:
        raise ZeroVariance("every feature column is constant")

    scored.sort(key=lambda item: (-item[0], item[1]))
    kept: List[Tuple[int, str]] = []
    for rank, (score, position, name) in enumerate(scored, start=1):
        if len(kept) >= top_k:
            entries.append(SelectionEntry(name, rank, score, False, f"beyond top_k={top_k}"))
            continue
        reason = ""
        for kept_position, kept_name in kept:
            overlap = abs(pearson(matrix.rows[:, position], matrix.rows[:, kept_position]))
            if overlap > redundancy:
                reason = f"redundant with {kept_name} (|r|={overlap:.6f})"
                break
        if reason:
            entries.append(SelectionEntry(name, rank, score, False, reason))
        else:
            kept.append((position, name))
            entries.append(SelectionEntry(name, rank, score, True, "selected"))

    entries.sort(key=lambda entry: (entry.rank is None, entry.rank or 0))
    report = SelectionReport(top_k, redundancy, tuple(entries))
    logger.info("Selected %d of %d features: %s", len(kept), matrix.n_cols, report.kept)
    return matrix.select_columns([name for _, name in kept]), report


@dataclass(frozen=True)
class SplitIndices:
    train: range
    validation: range
    test: range


def chronological_split(n_rows: int,
                        fractions: Tuple[float, float, float] = (0.70, 0.15, 0.15)) -> SplitIndices:
    """Split row positions in time order; boundaries are floor(n*f_train) and floor(n*(f_train+f_val))."""
    if len(fractions) != 3 or any(not f > 0 for f in fractions):
        raise BadFractions(f"need three positive fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise BadFractions(f"fractions must sum to 1, got {sum(fractions)}")
    if n_rows < 3:
        raise InsufficientHistory(f"cannot split {n_rows} rows three ways")
    # the epsilon keeps products like 100 * 0.85 from landing on 84.999...
    first = int(np.floor(n_rows * fractions[0] + 1e-9))
    second = int(np.floor(n_rows * (fractions[0] + fractions[1]) + 1e-9))
    return SplitIndices(range(0, first), range(first, second), range(second, n_rows))


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    sweeps: int = field(default=0, compare=False)

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        total = self.eigenvalues.sum()
        if total == 0:
            return np.zeros(self.n_components)
        return self.eigenvalues[:self.n_components] / total


def _round_robin_pairs(n: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Disjoint (p, q) pairings such that every pair p<q appears once per sweep."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a >= 0 and b >= 0]
        rounds.append((np.array([p for p, _ in pairs], dtype=int),
                       np.array([q for _, q in pairs], dtype=int)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(matrix: np.ndarray, tolerance: float = JACOBI_TOLERANCE,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray, int]:
    """Eigendecompose a symmetric matrix with cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once, in round-robin order so
    that the rotations of one round touch disjoint rows and can be applied
    together. Returns (eigenvalues, eigenvectors as columns, sweeps used).
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    vectors = np.eye(n)
    rounds = _round_robin_pairs(n) if n > 1 else []
    sweeps = 0
    off_mask = ~np.eye(n, dtype=bool)
    while sweeps < max_sweeps and np.sqrt(np.sum(a[off_mask] ** 2)) >= tolerance:
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0
            theta = np.where(active, (a[q, q] - a[p, p]) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            col_p, col_q = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * col_p - s * col_q
            a[:, q] = s * col_p + c * col_q
            row_p, row_q = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * row_p - s[:, None] * row_q
            a[q, :] = s[:, None] * row_p + c[:, None] * row_q
            a[p, q] = 0.0
            a[q, p] = 0.0

            vec_p, vec_q = vectors[:, p].copy(), vectors[:, q].copy()
            vectors[:, p] = c * vec_p - s * vec_q
            vectors[:, q] = s * vec_p + c * vec_q
        sweeps += 1
    return np.diag(a).copy(), vectors, sweeps


def _as_array(matrix: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(matrix, FeatureMatrix):
        return matrix.rows
    return np.asarray(matrix, dtype=float)


def components_for_variance(eigenvalues: np.ndarray, variance_ratio: float) -> int:
    total = eigenvalues.sum()
    if total <= 0:
        return 1
    cumulative = np.cumsum(eigenvalues) / total
    return int(min(len(eigenvalues), np.searchsorted(cumulative, variance_ratio - 1e-12) + 1))


def pca_fit(matrix: Union[FeatureMatrix, np.ndarray], n_components: Optional[int] = None,
            variance_ratio: float = 0.95) -> PcaModel:
    """Fit PCA by Jacobi eigendecomposition of the sample covariance.

    With `n_components=None` the smallest count reaching `variance_ratio`
    of the total variance is kept. Each component is signed so that its
    largest-magnitude entry is positive.
    """
    data = _as_array(matrix)
    n_rows, n_cols = data.shape
    if n_components is not None:
        if n_components < 1:
            raise ConfigError(f"n_components must be >= 1, got {n_components}")
        if n_components > n_cols:
            raise TooManyComponents(f"{n_components} components requested from {n_cols} columns")
    if n_rows < 2:
        raise InsufficientHistory("PCA needs at least two rows")

    mean = data.mean(axis=0)
    centered = data - mean
    covariance = centered.T @ centered / (n_rows - 1)
    values, vectors, sweeps = jacobi_eigh(covariance)

    order = np.argsort(-values, kind="stable")
    values = np.clip(values[order], 0.0, None)
    vectors = vectors[:, order].T
    pivots = np.argmax(np.abs(vectors), axis=1)
    signs = np.where(vectors[np.arange(n_cols), pivots] < 0, -1.0, 1.0)
    vectors = vectors * signs[:, None]

    keep = n_components if n_components is not None else components_for_variance(values, variance_ratio)
    logger.info("PCA: kept %d of %d components after %d Jacobi sweeps", keep, n_cols, sweeps)
    return PcaModel(mean=mean, components=vectors[:keep].copy(), eigenvalues=values, sweeps=sweeps)


def pca_transform(matrix: Union[FeatureMatrix, np.ndarray], model: PcaModel):
    data = _as_array(matrix)
    if data.ndim != 2 or data.shape[1] != model.mean.shape[0]:
        raise ShapeMismatch(f"PCA fitted on {model.mean.shape[0]} columns, got shape {data.shape}")
    scores = (data - model.mean) @ model.components.T
    if isinstance(matrix, FeatureMatrix):
        names = tuple(f"pc_{i + 1}" for i in range(model.n_components))
        return FeatureMatrix(names, scores, matrix.target, matrix.index)
    return scores


def pca_inverse_transform(scores: np.ndarray, model: PcaModel) -> np.ndarray:
    return np.asarray(scores, dtype=float) @ model.components + model.mean
