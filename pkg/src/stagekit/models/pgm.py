"""Gaussian class-conditional generative classifier with a cost-weighted
Bayes decision."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

MAX_RIDGE_DOUBLINGS = 60


def cost_matrix(costs, n_classes: int = 3) -> np.ndarray:
    """C[y, k]: cost of predicting stage y+1 when the truth is k+1.

    A length-k vector gives each true class its misclassification cost
    (zero on the diagonal); a k x k matrix is used as is.
    """
    if costs is None:
        costs = np.ones(n_classes)
    c = np.asarray(costs, dtype=float)
    if c.ndim == 1:
        if c.shape != (n_classes,) or np.any(c < 0):
            raise ValueError(f"expected {n_classes} non-negative class costs")
        C = np.tile(c, (n_classes, 1))
        np.fill_diagonal(C, 0.0)
        return C
    if c.shape != (n_classes, n_classes) or np.any(c < 0):
        raise ValueError(f"cost matrix must be {n_classes}x{n_classes} and non-negative")
    return c.copy()


def bayes_decision(posterior, costs) -> np.ndarray:
    """argmin_y sum_k P(k|x) C(y|k), ties to the lower class; returns 1-based labels."""
    P = np.atleast_2d(np.asarray(posterior, dtype=float))
    C = np.asarray(costs, dtype=float)
    risk = P @ C.T
    return np.argmin(risk, axis=1) + 1


@dataclass(eq=False)
class PGMModel:
    class_means: np.ndarray
    class_covariances: np.ndarray
    priors: np.ndarray
    cost_matrix: np.ndarray
    ridges: np.ndarray

    def log_densities(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        k, m = self.class_means.shape
        out = np.empty((X.shape[0], k))
        for c in range(k):
            L = np.linalg.cholesky(self.class_covariances[c])
            z = np.linalg.solve(L, (X - self.class_means[c]).T)
            logdet = 2.0 * np.log(np.diag(L)).sum()
            out[:, c] = -0.5 * (z**2).sum(axis=0) - 0.5 * logdet - 0.5 * m * np.log(2 * np.pi)
        return out

    def predict_proba(self, X) -> np.ndarray:
        with np.errstate(divide="ignore"):
            joint = self.log_densities(X) + np.log(self.priors)
        return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))

    def predict(self, X) -> np.ndarray:
        return bayes_decision(self.predict_proba(X), self.cost_matrix)


def predict_pgm(model: PGMModel, x):
    post = model.predict_proba(np.asarray(x, dtype=float)[None, :])[0]
    return int(bayes_decision(post, model.cost_matrix)[0]), post


def fit_pgm(X, y, costs=None, ridge: float | None = None, n_classes: int = 3) -> PGMModel:
    """Class means, ridge-regularised class covariances and frequency priors.

    The default ridge for class c is 1e-3 * trace(S_c) / m. A covariance that
    is still not positive definite gets its ridge doubled until it is (or the
    doubling budget runs out, which raises).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n, m = X.shape
    means = np.empty((n_classes, m))
    covs = np.empty((n_classes, m, m))
    ridges = np.empty(n_classes)
    priors = np.empty(n_classes)
    for c in range(n_classes):
        Xc = X[y == c + 1]
        if Xc.shape[0] < 2:
            raise ValueError(f"class {c + 1} needs at least 2 observations")
        means[c] = Xc.mean(axis=0)
        S = np.atleast_2d(np.cov(Xc, rowvar=False, ddof=1))
        r = 1e-3 * np.trace(S) / m if ridge is None else float(ridge)
        r = max(r, 1e-9)
        for _ in range(MAX_RIDGE_DOUBLINGS):
            cand = S + r * np.eye(m)
            try:
                np.linalg.cholesky(cand)
                break
            except np.linalg.LinAlgError:
                r *= 2.0
        else:
            raise np.linalg.LinAlgError(f"covariance of class {c + 1} is not positive definite")
        covs[c], ridges[c] = cand, r
        priors[c] = Xc.shape[0] / n
    return PGMModel(means, covs, priors, cost_matrix(costs, n_classes), ridges)
