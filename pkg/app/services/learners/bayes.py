"""
Gaussian naive Bayes.
"""
import numpy as np

from app.services.learners.base import ClassifierMixin, Learner


class GaussianNaiveBayes(ClassifierMixin, Learner):
    """Per-class independent normal features; variances smoothed by
    `var_smoothing` times the largest feature variance."""

    def __init__(self, var_smoothing: float = 1e-9):
        super().__init__()
        self.var_smoothing = var_smoothing

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GaussianNaiveBayes":
        encoded = self._encode(y)
        self.n_features_ = X.shape[1]
        n_classes = len(self.classes_)
        epsilon = self.var_smoothing * max(float(np.var(X, axis=0).max()), 1e-300)
        self.theta_ = np.zeros((n_classes, self.n_features_))
        self.var_ = np.zeros((n_classes, self.n_features_))
        counts = np.bincount(encoded, minlength=n_classes)
        for c in range(n_classes):
            rows = X[encoded == c]
            self.theta_[c] = rows.mean(axis=0)
            self.var_[c] = rows.var(axis=0) + epsilon
        self.log_prior_ = np.log(counts / counts.sum())
        return self

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        diff = X[:, None, :] - self.theta_[None, :, :]
        log_density = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_)[None] + diff ** 2 / self.var_[None], axis=2)
        return log_density + self.log_prior_

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self._decode(self.joint_log_likelihood(X))
