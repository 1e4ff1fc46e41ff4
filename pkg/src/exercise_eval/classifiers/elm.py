"""Extreme learning machine: random sigmoid hidden layer, ridge least-squares readout."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ..errors import DimensionMismatch

DEFAULT_RIDGE = 1e-6


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def solve_output_weights(H: np.ndarray, T: np.ndarray, ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    """Solve ``(H^T H + ridge I) beta = H^T T`` for the output weights."""
    A = H.T @ H
    A[np.diag_indices_from(A)] += ridge
    B = H.T @ T
    try:
        return scipy.linalg.solve(A, B, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        return scipy.linalg.lstsq(A, B)[0]


class ExtremeLearningMachine:
    def __init__(self, n_hidden: int = 100, seed: int = 0, ridge: float = DEFAULT_RIDGE):
        if not 1 <= n_hidden:
            raise ValueError("n_hidden must be positive")
        self.n_hidden = int(n_hidden)
        self.seed = seed
        self.ridge = ridge

    def hidden(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.input_weights_.shape[0]:
            raise DimensionMismatch(f"expected {self.input_weights_.shape[0]} features, got {X.shape[1]}")
        return sigmoid(X @ self.input_weights_ + self.biases_)

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "ExtremeLearningMachine":
        X = np.asarray(X, dtype=float)
        rng = np.random.default_rng(self.seed)
        self.input_weights_ = rng.uniform(-1.0, 1.0, size=(X.shape[1], self.n_hidden))
        self.biases_ = rng.uniform(-1.0, 1.0, size=self.n_hidden)
        self.n_classes_ = int(n_classes)
        self.n_features_ = X.shape[1]
        T = np.eye(self.n_classes_)[np.asarray(y, dtype=np.int64)]
        self.output_weights_ = solve_output_weights(self.hidden(X), T, self.ridge)
        return self

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        return self.hidden(X) @ self.output_weights_

    def state(self) -> dict:
        return {"n_hidden": self.n_hidden, "seed": self.seed, "ridge": self.ridge, "n_classes": self.n_classes_,
                "input_weights": self.input_weights_, "biases": self.biases_,
                "output_weights": self.output_weights_}

    @classmethod
    def from_state(cls, st: dict) -> "ExtremeLearningMachine":
        m = cls(int(st["n_hidden"]), int(st["seed"]), float(st["ridge"]))
        m.n_classes_ = int(st["n_classes"])
        m.input_weights_ = np.asarray(st["input_weights"], dtype=float)
        m.n_features_ = m.input_weights_.shape[0]
        m.biases_ = np.asarray(st["biases"], dtype=float)
        m.output_weights_ = np.asarray(st["output_weights"], dtype=float)
        return m
