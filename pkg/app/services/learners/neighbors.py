"""
k-nearest-neighbour machines.
"""
import logging

import numpy as np

from app.services.learners.base import ClassifierMixin, Learner

logger = logging.getLogger(__name__)


class _KNeighbors(Learner):

    def __init__(self, n_neighbors: int = 5):
        super().__init__()
        self.n_neighbors = n_neighbors

    def _store(self, X: np.ndarray) -> None:
        self.X_ = X.copy()
        self.n_features_ = X.shape[1]
        self.k_ = min(self.n_neighbors, X.shape[0])
        if self.k_ < self.n_neighbors:
            message = f"n_neighbors={self.n_neighbors} exceeds {X.shape[0]} training rows; using {self.k_}"
            logger.warning(message)
            self.warnings_.append(message)

    def kneighbors(self, X: np.ndarray) -> np.ndarray:
        """Indices of the k nearest training rows; ties keep training order."""
        sq_dist = (
            np.sum(X * X, axis=1)[:, None]
            - 2.0 * X @ self.X_.T
            + np.sum(self.X_ * self.X_, axis=1)[None, :]
        )
        np.maximum(sq_dist, 0.0, out=sq_dist)
        return np.argsort(sq_dist, axis=1, kind="stable")[:, : self.k_]


class KNeighborsRegressor(_KNeighbors):
    """Mean target of the k nearest training rows."""

    def fit(self, X, y) -> "KNeighborsRegressor":
        self._store(X)
        self.y_ = y.astype(float)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.y_[self.kneighbors(X)].mean(axis=1)


class KNeighborsClassifier(ClassifierMixin, _KNeighbors):
    """Majority label of the k nearest training rows (ties to the smallest label)."""

    def fit(self, X, y) -> "KNeighborsClassifier":
        self._store(X)
        self.y_ = self._encode(y)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        neighbours = self.y_[self.kneighbors(X)]
        votes = np.apply_along_axis(np.bincount, 1, neighbours, minlength=len(self.classes_))
        return self._decode(votes)
