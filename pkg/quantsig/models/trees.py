"""
CART trees, random forests and gradient-boosted trees.

A tree is stored as parallel node arrays in preorder. Node 0 is the root
and every child index is larger than its parent's, so the arrays always
describe an acyclic tree. Rows with x[feature] <= threshold go left.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import ClassVar, List, Optional, Tuple

import numpy as np
from scipy import special

from quantsig.errors import ShapeMismatch
from quantsig.models.base import STREAM_TREE, ClassifierModel, TrainConfig, as_dense, check_width, random_stream

logger = logging.getLogger(__name__)

LEAF = -1
MAX_TREE_WORKERS = 8


@dataclass(frozen=True, eq=False)
class TreeArrays:
    feature: np.ndarray    # int64, LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray       # int64, LEAF for leaves
    right: np.ndarray
    value: np.ndarray      # (n_nodes, 2) class counts, or (n_nodes, 1) mean residual

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.left[node] != LEAF:
                depths[self.left[node]] = depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def validate(self) -> None:
        """Raise ShapeMismatch unless the arrays form one tree rooted at node 0."""
        n = self.n_nodes
        if n == 0:
            raise ShapeMismatch("empty tree")
        parents = np.zeros(n, dtype=int)
        for node in range(n):
            left, right = int(self.left[node]), int(self.right[node])
            if (left == LEAF) != (right == LEAF):
                raise ShapeMismatch(f"node {node} has exactly one child")
            if left == LEAF:
                continue
            for child in (left, right):
                if not node < child < n:
                    raise ShapeMismatch(f"node {node} has child {child} out of order or range")
                parents[child] += 1
        if parents[0] != 0 or np.any(parents[1:] != 1):
            raise ShapeMismatch("every non-root node needs exactly one parent")

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[nodes] != LEAF)
        while active.size:
            current = nodes[active]
            go_left = X[active, self.feature[current]] <= self.threshold[current]
            nodes[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[nodes[active]] != LEAF]
        return nodes

    def class_fraction(self, X: np.ndarray) -> np.ndarray:
        counts = self.value[self.apply(X)]
        return counts[:, 1] / counts.sum(axis=1)

    def leaf_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X), 0]


def _split_positions(sorted_x: np.ndarray, min_leaf: int) -> np.ndarray:
    """Positions i splitting after sorted row i with distinct neighbours and both sides >= min_leaf."""
    n = len(sorted_x)
    positions = np.arange(n - 1)
    valid = (sorted_x[:-1] < sorted_x[1:]) & (positions + 1 >= min_leaf) & (n - positions - 1 >= min_leaf)
    return positions[valid]


def _gini_gain(sorted_y: np.ndarray, positions: np.ndarray) -> np.ndarray:
    n = len(sorted_y)
    left_n = positions + 1.0
    right_n = n - left_n
    left_pos = np.cumsum(sorted_y)[positions]
    right_pos = sorted_y.sum() - left_pos
    p = sorted_y.mean()
    parent = 2.0 * p * (1.0 - p)
    left_p = left_pos / left_n
    right_p = right_pos / right_n
    children = (left_n * 2.0 * left_p * (1.0 - left_p) + right_n * 2.0 * right_p * (1.0 - right_p)) / n
    return parent - children


def _sse_gain(sorted_y: np.ndarray, positions: np.ndarray) -> np.ndarray:
    n = len(sorted_y)
    left_n = positions + 1.0
    right_n = n - left_n
    cumulative = np.cumsum(sorted_y)
    left_sum = cumulative[positions]
    right_sum = cumulative[-1] - left_sum
    # SSE = sum(y^2) - (sum y)^2 / n; the sum(y^2) terms cancel in the gain
    return left_sum ** 2 / left_n + right_sum ** 2 / right_n - cumulative[-1] ** 2 / n


def _best_split(X: np.ndarray, y: np.ndarray, features: np.ndarray, min_leaf: int,
                gain_fn) -> Optional[Tuple[int, float]]:
    best_gain = 0.0
    best: Optional[Tuple[int, float]] = None
    for feature in features:
        order = np.argsort(X[:, feature], kind="stable")
        sorted_x = X[order, feature]
        positions = _split_positions(sorted_x, min_leaf)
        if positions.size == 0:
            continue
        gains = gain_fn(y[order], positions)
        # argmax keeps the first maximum, i.e. the lowest threshold
        pick = int(np.argmax(gains))
        if gains[pick] > best_gain:
            i = positions[pick]
            threshold = (sorted_x[i] + sorted_x[i + 1]) / 2.0
            if threshold >= sorted_x[i + 1]:
                threshold = sorted_x[i]
            best_gain = float(gains[pick])
            best = (int(feature), float(threshold))
    return best


class _TreeBuilder:
    def __init__(self, criterion: str, max_depth: int, min_leaf: int,
                 max_features: Optional[int], rng: Optional[np.random.Generator]):
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.rng = rng
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[List[float]] = []

    def _leaf_value(self, y: np.ndarray) -> List[float]:
        if self.criterion == "gini":
            positives = float(y.sum())
            return [len(y) - positives, positives]
        return [float(y.mean())]

    def _candidate_features(self, n_features: int) -> np.ndarray:
        if self.max_features is None or self.max_features >= n_features:
            return np.arange(n_features)
        return np.sort(self.rng.choice(n_features, size=self.max_features, replace=False))

    def _is_pure(self, y: np.ndarray) -> bool:
        return bool(np.all(y == y[0]))

    def build(self, X: np.ndarray, y: np.ndarray) -> TreeArrays:
        gain_fn = _gini_gain if self.criterion == "gini" else _sse_gain
        # explicit stack in preorder: (row indices, depth, parent node, is_left)
        stack = [(np.arange(len(y)), 0, LEAF, False)]
        while stack:
            rows, depth, parent, is_left = stack.pop()
            node = len(self.feature)
            if parent != LEAF:
                (self.left if is_left else self.right)[parent] = node
            self.feature.append(LEAF)
            self.threshold.append(0.0)
            self.left.append(LEAF)
            self.right.append(LEAF)
            self.value.append(self._leaf_value(y[rows]))

            if depth >= self.max_depth or len(rows) < 2 * self.min_leaf or self._is_pure(y[rows]):
                continue
            split = _best_split(X[rows], y[rows], self._candidate_features(X.shape[1]),
                                self.min_leaf, gain_fn)
            if split is None:
                continue
            feature, threshold = split
            self.feature[node] = feature
            self.threshold[node] = threshold
            goes_left = X[rows, feature] <= threshold
            # right pushed first so the left subtree is numbered first
            stack.append((rows[~goes_left], depth + 1, node, False))
            stack.append((rows[goes_left], depth + 1, node, True))

        return TreeArrays(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=float),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            value=np.array(self.value, dtype=float),
        )


def grow_tree(X: np.ndarray, y: np.ndarray, criterion: str = "gini", max_depth: int = 10,
              min_samples_leaf: int = 2, max_features: Optional[int] = None,
              rng: Optional[np.random.Generator] = None) -> TreeArrays:
    return _TreeBuilder(criterion, max_depth, min_samples_leaf, max_features, rng).build(X, y)


@dataclass(frozen=True, eq=False)
class DecisionTreeModel(ClassifierModel):
    family: ClassVar[str] = "dt"
    threshold: ClassVar[float] = 0.5
    tree: TreeArrays
    n_features: int

    def decision_scores(self, X) -> np.ndarray:
        return self.tree.class_fraction(check_width(X, self.n_features))


@dataclass(frozen=True, eq=False)
class RandomForestModel(ClassifierModel):
    family: ClassVar[str] = "rf"
    threshold: ClassVar[float] = 0.5
    trees: Tuple[TreeArrays, ...]
    tree_seeds: np.ndarray
    n_features: int

    def decision_scores(self, X) -> np.ndarray:
        X = check_width(X, self.n_features)
        return np.mean([tree.class_fraction(X) for tree in self.trees], axis=0)


@dataclass(frozen=True, eq=False)
class GradientBoostingModel(ClassifierModel):
    family: ClassVar[str] = "xgb"
    threshold: ClassVar[float] = 0.0
    trees: Tuple[TreeArrays, ...]
    learning_rate: float
    initial_log_odds: float
    n_features: int

    def decision_scores(self, X) -> np.ndarray:
        X = check_width(X, self.n_features)
        scores = np.full(X.shape[0], self.initial_log_odds)
        for tree in self.trees:
            scores += self.learning_rate * tree.leaf_value(X)
        return scores


def fit_decision_tree(X, y, cfg: TrainConfig) -> DecisionTreeModel:
    X = as_dense(X)
    y = np.asarray(y, dtype=float)
    tree = grow_tree(X, y, "gini", cfg.max_depth, cfg.min_samples_leaf)
    logger.info("Decision tree: %d nodes, depth %d", tree.n_nodes, tree.depth)
    return DecisionTreeModel(tree=tree, n_features=X.shape[1])


def _forest_member(X, y, cfg: TrainConfig, index: int, max_features: Optional[int]) -> TreeArrays:
    rng = random_stream(cfg.seed, index, STREAM_TREE)
    if cfg.bootstrap:
        rows = rng.integers(0, len(y), size=len(y))
        X, y = X[rows], y[rows]
    return grow_tree(X, y, "gini", cfg.max_depth, cfg.min_samples_leaf, max_features, rng)


def fit_random_forest(X, y, cfg: TrainConfig) -> RandomForestModel:
    """Each tree draws from its own seed^index stream, so trees fit in any order give the same forest."""
    X = as_dense(X)
    y = np.asarray(y, dtype=float)
    n_features = X.shape[1]
    if cfg.max_features is not None:
        max_features = min(cfg.max_features, n_features)
    else:
        max_features = max(1, int(np.sqrt(n_features)))
    if cfg.n_trees == 1 and not cfg.bootstrap and cfg.max_features is None:
        # a lone unbootstrapped tree considers every feature, like a plain decision tree
        max_features = None

    with ThreadPoolExecutor(max_workers=min(MAX_TREE_WORKERS, cfg.n_trees)) as executor:
        trees = tuple(executor.map(lambda i: _forest_member(X, y, cfg, i, max_features), range(cfg.n_trees)))
    seeds = np.array([(cfg.seed ^ i) for i in range(cfg.n_trees)], dtype=np.uint64).astype(np.int64)
    logger.info("Random forest: %d trees, %d features per split", len(trees),
                max_features if max_features else n_features)
    return RandomForestModel(trees=trees, tree_seeds=seeds, n_features=n_features)


def fit_gradient_boosting(X, y, cfg: TrainConfig) -> GradientBoostingModel:
    """Stagewise boosting on logistic loss; each round fits an SSE tree to y - p."""
    X = as_dense(X)
    y = np.asarray(y, dtype=float)
    positive_rate = float(y.mean())
    initial = float(np.log(positive_rate / (1.0 - positive_rate)))
    scores = np.full(len(y), initial)
    trees: List[TreeArrays] = []
    for _ in range(cfg.n_trees):
        residual = y - special.expit(scores)
        tree = grow_tree(X, residual, "sse", cfg.max_depth, cfg.min_samples_leaf)
        trees.append(tree)
        scores += cfg.learning_rate * tree.leaf_value(X)
    logger.info("Gradient boosting: %d rounds, learning rate %g", len(trees), cfg.learning_rate)
    return GradientBoostingModel(trees=tuple(trees), learning_rate=cfg.learning_rate,
                                 initial_log_odds=initial, n_features=X.shape[1])
