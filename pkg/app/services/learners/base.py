"""
Common interface of the base learners.
"""
from abc import ABC, abstractmethod
from typing import List

import numpy as np


class Learner(ABC):
    """A fit/predict estimator over dense float matrices."""

    def __init__(self):
        self.n_features_: int = 0
        # Non-fatal issues met while fitting (surfaced on the trained machine)
        self.warnings_: List[str] = []
        self.converged_: bool = True

    @abstractmethod
    def fit(self, X: np.ndarray, y: np.ndarray) -> "Learner":
        ...

    @abstractmethod
    def predict(self, X: np.ndarray) -> np.ndarray:
        ...


class ClassifierMixin:
    """Helpers for learners that predict integer labels."""

    classes_: np.ndarray

    def _encode(self, y: np.ndarray) -> np.ndarray:
        self.classes_, encoded = np.unique(y, return_inverse=True)
        return encoded

    def _decode(self, scores: np.ndarray) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. the smallest label on ties
        return self.classes_[np.argmax(scores, axis=1)]
