"""One-hidden-layer perceptron trained by backpropagation.

tanh hidden units, softmax output, mean cross-entropy loss plus an optional
L2 penalty on the weight matrices. Training is full-batch gradient descent
with momentum and early stopping on a stratified held-out slice of the
training data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch


def hidden_size(n_inputs: int, n_classes: int, rule: str | int = "mean_in_out") -> int:
    """Hidden-layer width: ``(inputs + outputs) / 2`` or ``inputs / 2``, rounded half up."""
    if isinstance(rule, (int, np.integer)):
        return int(rule)
    if rule == "mean_in_out":
        return int(np.floor((n_inputs + n_classes) / 2 + 0.5))
    if rule == "half_inputs":
        return int(np.floor(n_inputs / 2 + 0.5))
    raise ValueError(f"unknown hidden-size rule {rule!r}")


@dataclass
class MlpParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), self.b2])

    @classmethod
    def unflat(cls, v: np.ndarray, n_in: int, n_hidden: int, n_out: int) -> "MlpParams":
        shapes = [(n_in, n_hidden), (n_hidden,), (n_hidden, n_out), (n_out,)]
        parts, pos = [], 0
        for shp in shapes:
            size = int(np.prod(shp))
            parts.append(v[pos:pos + size].reshape(shp))
            pos += size
        return cls(*parts)

    def copy(self) -> "MlpParams":
        return MlpParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(p: MlpParams, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = np.tanh(X @ p.W1 + p.b1)
    return h, softmax(h @ p.W2 + p.b2)


def loss_and_grad(p: MlpParams, X: np.ndarray, Y: np.ndarray, l2: float = 0.0) -> tuple[float, MlpParams]:
    """Mean cross-entropy (plus L2) and its analytic gradient; ``Y`` is one-hot."""
    n = len(X)
    h, prob = forward(p, X)
    loss = -np.sum(Y * np.log(np.clip(prob, 1e-300, None))) / n
    loss += 0.5 * l2 * (np.sum(p.W1 ** 2) + np.sum(p.W2 ** 2))
    d_out = (prob - Y) / n
    gW2 = h.T @ d_out + l2 * p.W2
    gb2 = d_out.sum(0)
    d_h = (d_out @ p.W2.T) * (1.0 - h * h)
    gW1 = X.T @ d_h + l2 * p.W1
    gb1 = d_h.sum(0)
    return float(loss), MlpParams(gW1, gb1, gW2, gb2)


def init_params(n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator) -> MlpParams:
    lim1 = np.sqrt(6.0 / (n_in + n_hidden))
    lim2 = np.sqrt(6.0 / (n_hidden + n_out))
    return MlpParams(
        rng.uniform(-lim1, lim1, size=(n_in, n_hidden)),
        np.zeros(n_hidden),
        rng.uniform(-lim2, lim2, size=(n_hidden, n_out)),
        np.zeros(n_out),
    )


def stratified_holdout(y: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask of held-out rows; classes with fewer than 5 rows stay in training."""
    mask = np.zeros(len(y), dtype=bool)
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if len(idx) < 5:
            continue
        take = max(1, int(round(fraction * len(idx))))
        mask[rng.choice(idx, size=take, replace=False)] = True
    return mask


class MultilayerPerceptron:
    def __init__(self, n_hidden: str | int = "mean_in_out", learning_rate: float = 0.1, momentum: float = 0.9,
                 epochs: int = 2000, patience: int = 50, holdout_fraction: float = 0.1, l2: float = 1e-4,
                 seed: int = 0):
        self.n_hidden = n_hidden
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.epochs = epochs
        self.patience = patience
        self.holdout_fraction = holdout_fraction
        self.l2 = l2
        self.seed = seed

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "MultilayerPerceptron":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        rng = np.random.default_rng(self.seed)
        self.n_classes_ = int(n_classes)
        self.n_features_ = X.shape[1]
        self.hidden_units_ = hidden_size(self.n_features_, self.n_classes_, self.n_hidden)
        Y = np.eye(self.n_classes_)[y]
        held = stratified_holdout(y, self.holdout_fraction, rng) if self.holdout_fraction > 0 else \
            np.zeros(len(y), dtype=bool)
        if held.all() or not held.any():
            held = np.zeros(len(y), dtype=bool)
        Xtr, Ytr = X[~held], Y[~held]
        Xva, Yva = (X[held], Y[held]) if held.any() else (Xtr, Ytr)

        p = init_params(self.n_features_, self.hidden_units_, self.n_classes_, rng)
        vel = np.zeros_like(p.flat())
        best, best_loss, wait = p.copy(), np.inf, 0
        self.n_epochs_ = 0
        for epoch in range(self.epochs):
            _, g = loss_and_grad(p, Xtr, Ytr, self.l2)
            vel = self.momentum * vel - self.learning_rate * g.flat()
            p = MlpParams.unflat(p.flat() + vel, self.n_features_, self.hidden_units_, self.n_classes_)
            _, prob = forward(p, Xva)
            val_loss = -np.sum(Yva * np.log(np.clip(prob, 1e-300, None))) / len(Xva)
            self.n_epochs_ = epoch + 1
            if val_loss < best_loss - 1e-7:
                best, best_loss, wait = p.copy(), val_loss, 0
            else:
                wait += 1
                if wait >= self.patience:
                    break
        self.params_ = best
        self.best_val_loss_ = float(best_loss)
        return self

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_:
            raise DimensionMismatch(f"expected {self.n_features_} features, got {X.shape[1]}")
        return forward(self.params_, X)[1]

    def state(self) -> dict:
        return {"n_classes": self.n_classes_, "n_features": self.n_features_, "hidden_units": self.hidden_units_,
                "seed": self.seed, "W1": self.params_.W1, "b1": self.params_.b1, "W2": self.params_.W2,
                "b2": self.params_.b2}

    @classmethod
    def from_state(cls, st: dict) -> "MultilayerPerceptron":
        m = cls(n_hidden=int(st["hidden_units"]), seed=int(st["seed"]))
        m.n_classes_ = int(st["n_classes"])
        m.n_features_ = int(st["n_features"])
        m.hidden_units_ = int(st["hidden_units"])
        m.params_ = MlpParams(*(np.asarray(st[k], dtype=float) for k in ("W1", "b1", "W2", "b2")))
        return m
