"""
Linear machines: ridge (closed form), lasso (coordinate descent) and
multinomial logistic regression (gradient descent).
"""
import logging

import numpy as np
from scipy.special import softmax

from app.services.learners.base import ClassifierMixin, Learner

logger = logging.getLogger(__name__)

# Gram matrices with a larger condition number are solved by pseudo-inverse
_MAX_CONDITION = 1e12


class RidgeRegressor(Learner):
    """Ridge regression with an unpenalised intercept."""

    def __init__(self, regularization: float = 1.0):
        super().__init__()
        self.regularization = regularization

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RidgeRegressor":
        y = y.astype(float)
        self.n_features_ = X.shape[1]
        x_mean = X.mean(axis=0)
        y_mean = y.mean()
        Xc = X - x_mean
        gram = Xc.T @ Xc + self.regularization * np.eye(self.n_features_)
        rhs = Xc.T @ (y - y_mean)
        if np.linalg.cond(gram) < _MAX_CONDITION:
            self.coef_ = np.linalg.solve(gram, rhs)
        else:
            message = "Ridge normal equations are singular; using the pseudo-inverse"
            logger.warning(message)
            self.warnings_.append(message)
            self.coef_ = np.linalg.pinv(gram) @ rhs
        self.intercept_ = float(y_mean - x_mean @ self.coef_)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coef_ + self.intercept_


def soft_threshold(rho: float, alpha: float) -> float:
    """Soft threshold operator of the l1 proximal step."""
    if rho < -alpha:
        return rho + alpha
    if rho > alpha:
        return rho - alpha
    return 0.0


class LassoRegressor(Learner):
    """Lasso by cyclic coordinate descent on centred data.

    Minimises (1 / 2n) * ||y - X w - b||^2 + regularization * ||w||_1. Stops when
    the largest coefficient change of a sweep drops below `tol`, or after
    `max_iter` sweeps, in which case `converged_` is False and the current
    coefficients are kept.
    """

    def __init__(self, regularization: float = 0.1, tol: float = 1e-6, max_iter: int = 1000):
        super().__init__()
        self.regularization = regularization
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LassoRegressor":
        y = y.astype(float)
        n, d = X.shape
        self.n_features_ = d
        x_mean = X.mean(axis=0)
        y_mean = y.mean()
        Xc = X - x_mean
        column_norms = np.square(Xc).sum(axis=0) / n

        w = np.zeros(d)
        residual = y - y_mean
        self.converged_ = False
        for sweep in range(self.max_iter):
            max_change = 0.0
            for j in range(d):
                if column_norms[j] == 0.0:
                    continue
                x_j = Xc[:, j]
                old = w[j]
                rho = x_j @ residual / n + column_norms[j] * old
                w[j] = soft_threshold(rho, self.regularization) / column_norms[j]
                if w[j] != old:
                    residual -= x_j * (w[j] - old)
                    max_change = max(max_change, abs(w[j] - old))
            if max_change < self.tol:
                self.converged_ = True
                self.n_iter_ = sweep + 1
                break
        else:
            self.n_iter_ = self.max_iter
            message = f"Lasso did not converge after {self.max_iter} sweeps"
            logger.warning(message)
            self.warnings_.append(message)

        self.coef_ = w
        self.intercept_ = float(y_mean - x_mean @ w)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coef_ + self.intercept_


class LogisticRegressionClassifier(ClassifierMixin, Learner):
    """Multinomial logistic regression with L2 penalty, fitted by full-batch gradient descent.

    Features are standardised with the training statistics; the intercept is
    not penalised.
    """

    def __init__(self, regularization: float = 1e-3, step: float = 0.1, n_iter: int = 500):
        super().__init__()
        self.regularization = regularization
        self.step = step
        self.n_iter = n_iter

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LogisticRegressionClassifier":
        encoded = self._encode(y)
        n, d = X.shape
        self.n_features_ = d
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        Z = (X - self.mean_) / self.scale_

        n_classes = len(self.classes_)
        onehot = np.eye(n_classes)[encoded]
        W = np.zeros((d, n_classes))
        b = np.zeros(n_classes)
        for _ in range(self.n_iter):
            probs = softmax(Z @ W + b, axis=1)
            diff = (probs - onehot) / n
            W -= self.step * (Z.T @ diff + self.regularization * W)
            b -= self.step * diff.sum(axis=0)
        self.coef_ = W
        self.intercept_ = b
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return ((X - self.mean_) / self.scale_) @ self.coef_ + self.intercept_

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self._decode(self.decision_function(X))
