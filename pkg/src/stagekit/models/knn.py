"""k-nearest-neighbour majority vote with Euclidean distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class KNNModel:
    X: np.ndarray
    y: np.ndarray
    k_nn: int = 5
    n_classes: int = 3

    def neighbours(self, X) -> np.ndarray:
        """Indices of the k_nn nearest training rows; equal distances keep
        training order."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty((X.shape[0], self.k_nn), dtype=int)
        for start in range(0, X.shape[0], 64):
            chunk = X[start:start + 64]
            d2 = ((chunk[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=2)
            out[start:start + 64] = np.argsort(d2, axis=1, kind="stable")[:, : self.k_nn]
        return out

    def predict_proba(self, X) -> np.ndarray:
        """Vote fractions per class."""
        votes = self.y[self.neighbours(X)]
        counts = np.stack([(votes == c).sum(axis=1) for c in range(1, self.n_classes + 1)], axis=1)
        return counts / self.k_nn

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1) + 1


def fit_knn(X, y, k_nn: int = 5, n_classes: int = 3) -> KNNModel:
    X = np.asarray(X, dtype=float)
    if not 1 <= k_nn <= X.shape[0]:
        raise ValueError(f"k_nn must lie in [1, {X.shape[0]}]")
    return KNNModel(X.copy(), np.asarray(y, dtype=int).copy(), int(k_nn), n_classes)


def predict_knn(model: KNNModel, x) -> int:
    return int(model.predict(np.asarray(x, dtype=float)[None, :])[0])
