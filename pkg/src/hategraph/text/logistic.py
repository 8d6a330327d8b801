"""Binary logistic regression trained by full-batch gradient descent."""
from __future__ import annotations

import logging

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_binary_labels, check_features

logger = logging.getLogger(__name__)


def _log_sigmoid(z):
    return -np.logaddexp(0.0, -z)


def logistic_loss_and_grad(w, b, X, y, l2):
    """Mean cross-entropy plus ``l2/2 * ||w||^2`` and its gradient in ``(w, b)``."""
    z = X @ w + b
    loss = -np.mean(y * _log_sigmoid(z) + (1 - y) * _log_sigmoid(-z)) + 0.5 * l2 * (w @ w)
    r = (0.5 * (1.0 + np.tanh(0.5 * z)) - y) / X.shape[0]
    return loss, X.T @ r + l2 * w, r.sum()


class LogisticRegression(ClassifierMixin, BaseEstimator):
    """L2-regularised logistic regression.

    Features are standardised internally (the fitted mean and scale are
    kept), then full-batch gradient descent with Nesterov momentum runs for
    ``epochs`` steps or until the gradient norm drops below ``tol``.
    Weights start at zero, so the fit is deterministic.
    """

    def __init__(self, l2=1e-3, epochs=2000, lr=0.5, momentum=0.9, tol=1e-7,
                 standardize=True, random_state=0):
        self.l2 = l2
        self.epochs = epochs
        self.lr = lr
        self.momentum = momentum
        self.tol = tol
        self.standardize = standardize
        self.random_state = random_state

    def _scale(self, X):
        return (X - self.mean_) / self.scale_

    def fit(self, X, y):
        X = check_features(X)
        y = check_binary_labels(y).astype(np.float64)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y have different lengths")
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        if self.standardize:
            self.mean_ = X.mean(axis=0)
            sd = X.std(axis=0)
            self.scale_ = np.where(sd > 0, sd, 1.0)
        else:
            self.mean_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        Xs = self._scale(X)
        w = np.zeros(X.shape[1])
        b = 0.0
        vw, vb = np.zeros_like(w), 0.0
        history = []
        for _ in range(int(self.epochs)):
            # Nesterov look-ahead
            loss, gw, gb = logistic_loss_and_grad(w + self.momentum * vw, b + self.momentum * vb,
                                                  Xs, y, self.l2)
            history.append(loss)
            vw = self.momentum * vw - self.lr * gw
            vb = self.momentum * vb - self.lr * gb
            w, b = w + vw, b + vb
            if np.sqrt(gw @ gw + gb * gb) < self.tol:
                break
        self.loss_history_ = np.array(history)
        self.coef_ = w
        self.intercept_ = b
        self.n_iter_ = len(history)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_features(X)
        return self._scale(X) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        z = self.decision_function(X)
        p = 0.5 * (1.0 + np.tanh(0.5 * z))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(np.int64)

    def objective(self, X, y) -> float:
        """Regularised training loss at the fitted parameters (on raw features)."""
        Xs = self._scale(check_features(X))
        return float(logistic_loss_and_grad(self.coef_, self.intercept_, Xs,
                                            np.asarray(y, dtype=np.float64), self.l2)[0])
