"""Brute-force k-nearest-neighbour classification with Euclidean distance."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch

CHUNK = 256


class KNearestNeighbors:
    """Majority vote among the ``k`` closest training points.

    Distance ties are broken by training-set order; vote ties by the lowest
    class index.
    """

    def __init__(self, k: int = 1):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = int(k)

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "KNearestNeighbors":
        self.X_ = np.array(X, dtype=float)
        self.y_ = np.asarray(y, dtype=np.int64).copy()
        self.n_classes_ = int(n_classes)
        self.n_features_ = self.X_.shape[1]
        self._sq = (self.X_ * self.X_).sum(1)
        return self

    def neighbors(self, X: np.ndarray, k: int | None = None) -> np.ndarray:
        """Indices of the ``k`` nearest training points, closest first."""
        k = min(self.k if k is None else k, len(self.X_))
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_:
            raise DimensionMismatch(f"expected {self.n_features_} features, got {X.shape[1]}")
        out = np.empty((len(X), k), dtype=np.int64)
        for lo in range(0, len(X), CHUNK):
            q = X[lo:lo + CHUNK]
            d2 = (q * q).sum(1)[:, None] + self._sq[None, :] - 2.0 * (q @ self.X_.T)
            np.maximum(d2, 0.0, out=d2)
            out[lo:lo + CHUNK] = np.argsort(d2, axis=1, kind="stable")[:, :k]
        return out

    def votes(self, neighbor_idx: np.ndarray) -> np.ndarray:
        lab = self.y_[neighbor_idx]
        votes = np.zeros((len(lab), self.n_classes_))
        for c in range(self.n_classes_):
            votes[:, c] = (lab == c).sum(1)
        return votes

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        """Fraction of the ``k`` neighbours voting for each class."""
        nb = self.neighbors(X)
        return self.votes(nb) / nb.shape[1]

    def state(self) -> dict:
        return {"k": self.k, "n_classes": self.n_classes_, "X": self.X_, "y": self.y_}

    @classmethod
    def from_state(cls, st: dict) -> "KNearestNeighbors":
        return cls(int(st["k"])).fit(st["X"], st["y"], int(st["n_classes"]))
