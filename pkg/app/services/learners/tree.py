"""
CART decision trees and random forests.

Trees are stored as flat node arrays (feature, threshold, children, value) so
that batch prediction walks every row down the tree at once.
"""
import math
from typing import List, Optional, Union

import numpy as np

from app.services.learners.base import ClassifierMixin, Learner

_LEAF = -1

# max_features value that disables per-split feature subsampling
ALL_FEATURES = "all"

MaxFeatures = Optional[Union[int, str]]


class _TreeBuilder:
    """Greedy best-first-by-depth CART growth shared by regression and classification."""

    def __init__(self, max_depth: int, min_leaf: int, max_features: MaxFeatures,
                 rng: Optional[np.random.Generator], n_classes: int = 0):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.rng = rng
        self.n_classes = n_classes

        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[np.ndarray] = []

    def _leaf_value(self, y: np.ndarray) -> np.ndarray:
        if self.n_classes:
            return np.bincount(y, minlength=self.n_classes) / y.shape[0]
        return np.array([y.mean()])

    def _impurity(self, y: np.ndarray) -> float:
        if self.n_classes:
            p = np.bincount(y, minlength=self.n_classes) / y.shape[0]
            return 1.0 - float(np.sum(p * p))
        return float(np.var(y))

    def _candidate_features(self, d: int) -> np.ndarray:
        if self.max_features in (None, ALL_FEATURES) or self.max_features >= d:
            return np.arange(d)
        return np.sort(self.rng.choice(d, size=self.max_features, replace=False))

    def _best_split(self, X: np.ndarray, y: np.ndarray):
        """Return (feature, threshold, weighted child impurity) or None."""
        n = y.shape[0]
        best = None
        best_score = np.inf
        positions = np.arange(1, n)  # left child size for a cut after sorted row i-1
        valid_size = (positions >= self.min_leaf) & (n - positions >= self.min_leaf)
        for f in self._candidate_features(X.shape[1]):
            order = np.argsort(X[:, f], kind="stable")
            xs = X[order, f]
            ys = y[order]
            valid = valid_size & (xs[1:] > xs[:-1])
            if not valid.any():
                continue
            if self.n_classes:
                counts = np.cumsum(np.eye(self.n_classes)[ys], axis=0)[:-1]
                total = counts[-1] + np.eye(self.n_classes)[ys[-1]]
                left_n = positions[:, None]
                right_counts = total - counts
                gini_left = 1.0 - np.sum((counts / left_n) ** 2, axis=1)
                gini_right = 1.0 - np.sum((right_counts / (n - left_n)) ** 2, axis=1)
                score = (positions * gini_left + (n - positions) * gini_right) / n
            else:
                csum = np.cumsum(ys)[:-1]
                csum2 = np.cumsum(ys * ys)[:-1]
                total, total2 = ys.sum(), (ys * ys).sum()
                sse_left = csum2 - csum ** 2 / positions
                sse_right = (total2 - csum2) - (total - csum) ** 2 / (n - positions)
                score = (sse_left + sse_right) / n
            score = np.where(valid, score, np.inf)
            i = int(np.argmin(score))
            if score[i] < best_score:
                best_score = score[i]
                best = (int(f), float((xs[i] + xs[i + 1]) / 2.0), float(score[i]))
        return best

    def _new_node(self, y: np.ndarray) -> int:
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.value.append(self._leaf_value(y))
        return len(self.feature) - 1

    def build(self, X: np.ndarray, y: np.ndarray, depth: int = 0) -> int:
        node = self._new_node(y)
        if depth >= self.max_depth or y.shape[0] < 2 * self.min_leaf:
            return node
        impurity = self._impurity(y)
        if impurity <= 0.0:
            return node
        split = self._best_split(X, y)
        # Strict improvement only
        if split is None or split[2] >= impurity - 1e-15:
            return node
        feature, threshold, _ = split
        mask = X[:, feature] <= threshold
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = self.build(X[mask], y[mask], depth + 1)
        self.right[node] = self.build(X[~mask], y[~mask], depth + 1)
        return node


class _BaseTree(Learner):

    def __init__(self, max_depth: int = 10, min_leaf: int = 1, max_features: MaxFeatures = None,
                 seed: int = 0):
        super().__init__()
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.seed = seed

    def _grow(self, X: np.ndarray, y: np.ndarray, n_classes: int,
              rng: Optional[np.random.Generator] = None) -> None:
        self.n_features_ = X.shape[1]
        builder = _TreeBuilder(self.max_depth, self.min_leaf, self.max_features,
                               rng or np.random.default_rng(self.seed), n_classes)
        builder.build(X, y)
        self.feature_ = np.asarray(builder.feature, dtype=int)
        self.threshold_ = np.asarray(builder.threshold, dtype=float)
        self.left_ = np.asarray(builder.left, dtype=int)
        self.right_ = np.asarray(builder.right, dtype=int)
        self.value_ = np.vstack(builder.value)

    @property
    def node_count(self) -> int:
        return self.feature_.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        node = np.zeros(X.shape[0], dtype=int)
        while True:
            active = np.flatnonzero(self.feature_[node] != _LEAF)
            if active.size == 0:
                return node
            current = node[active]
            go_left = X[active, self.feature_[current]] <= self.threshold_[current]
            node[active] = np.where(go_left, self.left_[current], self.right_[current])


class DecisionTreeRegressor(_BaseTree):
    """CART regression tree (variance reduction, leaf mean)."""

    def fit(self, X, y, rng=None) -> "DecisionTreeRegressor":
        self._grow(X, y.astype(float), n_classes=0, rng=rng)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value_[self.apply(X), 0]


class DecisionTreeClassifier(ClassifierMixin, _BaseTree):
    """CART classification tree (Gini impurity, majority leaf)."""

    def fit(self, X, y, rng=None, classes: Optional[np.ndarray] = None) -> "DecisionTreeClassifier":
        if classes is None:
            encoded = self._encode(y)
        else:
            self.classes_ = classes
            encoded = np.searchsorted(classes, y)
        self._grow(X, encoded, n_classes=len(self.classes_), rng=rng)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value_[self.apply(X)]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self._decode(self.predict_proba(X))


class _BaseForest(Learner):

    def __init__(self, n_trees: int = 100, max_depth: int = 10, min_leaf: int = 1,
                 max_features: MaxFeatures = None, bootstrap: bool = True, seed: int = 0):
        super().__init__()
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.seed = seed

    def _default_max_features(self, d: int) -> int:
        raise NotImplementedError

    def _fit_trees(self, X: np.ndarray, y: np.ndarray, make_tree, **fit_kwargs) -> None:
        n, d = X.shape
        self.n_features_ = d
        if self.max_features == ALL_FEATURES:
            max_features = d
        else:
            max_features = self.max_features or self._default_max_features(d)
        rng = np.random.default_rng(self.seed)
        self.trees_ = []
        for _ in range(self.n_trees):
            rows = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = make_tree(max_features)
            tree.fit(X[rows], y[rows], rng=rng, **fit_kwargs)
            self.trees_.append(tree)


class RandomForestRegressor(_BaseForest):
    """Bagged regression trees with ceil(d/3) candidate features per split."""

    def _default_max_features(self, d: int) -> int:
        return max(1, math.ceil(d / 3))

    def fit(self, X, y) -> "RandomForestRegressor":
        self._fit_trees(X, y.astype(float), lambda mf: DecisionTreeRegressor(
            self.max_depth, self.min_leaf, mf))
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.mean([tree.predict(X) for tree in self.trees_], axis=0)


class RandomForestClassifier(ClassifierMixin, _BaseForest):
    """Bagged classification trees with ceil(sqrt(d)) candidate features per split."""

    def _default_max_features(self, d: int) -> int:
        return max(1, math.ceil(math.sqrt(d)))

    def fit(self, X, y) -> "RandomForestClassifier":
        self._encode(y)
        self._fit_trees(X, y, lambda mf: DecisionTreeClassifier(
            self.max_depth, self.min_leaf, mf), classes=self.classes_)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.mean([tree.predict_proba(X) for tree in self.trees_], axis=0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self._decode(self.predict_proba(X))
