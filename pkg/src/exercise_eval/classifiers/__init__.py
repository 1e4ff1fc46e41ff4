"""Uniform train/predict/tune contract over the six classifier families."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import DegenerateLabels, DimensionMismatch, EmptyGrid, NonFiniteFeature
from ..features import Standardizer
from .elm import ExtremeLearningMachine
from .knn import KNearestNeighbors
from .mlp import MultilayerPerceptron
from .svm import KernelParams, OneVsOneSVC, kernel_eval, kernel_matrix
from .tree import DecisionTree, RandomForest

ALGO_KINDS = ("SVM_L", "SVM_P", "SVM_G", "DT", "RF", "KNN", "ELM", "MLP")
CLI_NAMES = {k.lower().replace("_", "-"): k for k in ALGO_KINDS}

KNN_K_RANGE = (1, 20)
ELM_HIDDEN_RANGE = (10, 1000)

DEFAULT_HYPERPARAMS: dict[str, dict] = {
    "SVM_L": {"C": 1.0, "tol": 1e-3},
    "SVM_P": {"C": 1.0, "gamma": None, "degree": 3, "coef0": 1.0, "tol": 1e-3},
    "SVM_G": {"C": 1.0, "gamma": None, "tol": 1e-3},
    "DT": {"min_leaf_size": 1},
    "RF": {"n_trees": 100, "min_leaf_size": 1, "features_per_split": None},
    "KNN": {"k": 5},
    "ELM": {"n_hidden": 100, "ridge": 1e-6},
    "MLP": {"n_hidden": "mean_in_out", "epochs": 2000, "learning_rate": 0.1, "momentum": 0.9,
            "patience": 50, "l2": 1e-4},
}

DEFAULT_GRIDS: dict[str, list[dict]] = {
    "KNN": [{"k": k} for k in range(KNN_K_RANGE[0], KNN_K_RANGE[1] + 1)],
    "ELM": [{"n_hidden": n} for n in (10, 20, 50, 100, 200, 500, 1000)],
    "DT": [{"min_leaf_size": m} for m in (1, 2, 5, 10, 20, 50)],
}


@dataclass(frozen=True)
class AlgoConfig:
    kind: str
    hyperparams: Mapping = field(default_factory=dict)

    def __post_init__(self):
        kind = CLI_NAMES.get(self.kind, self.kind)
        if kind not in ALGO_KINDS:
            raise ValueError(f"unknown algorithm {self.kind!r}; expected one of {ALGO_KINDS}")
        object.__setattr__(self, "kind", kind)
        merged = dict(DEFAULT_HYPERPARAMS[kind])
        unknown = set(self.hyperparams) - set(merged) - {"seed"}
        if unknown:
            raise ValueError(f"{kind}: unknown hyperparameters {sorted(unknown)}")
        merged.update(self.hyperparams)
        object.__setattr__(self, "hyperparams", merged)
        hp = merged
        if kind == "KNN" and not KNN_K_RANGE[0] <= int(hp["k"]) <= KNN_K_RANGE[1]:
            raise ValueError(f"KNN k must lie in {KNN_K_RANGE}, got {hp['k']}")
        if kind == "ELM" and not ELM_HIDDEN_RANGE[0] <= int(hp["n_hidden"]) <= ELM_HIDDEN_RANGE[1]:
            raise ValueError(f"ELM n_hidden must lie in {ELM_HIDDEN_RANGE}, got {hp['n_hidden']}")
        if kind.startswith("SVM") and not float(hp["C"]) > 0:
            raise ValueError("SVM C must be positive")
        if kind in ("DT", "RF") and int(hp["min_leaf_size"]) < 1:
            raise ValueError("min_leaf_size must be positive")

    @property
    def cli_name(self) -> str:
        return self.kind.lower().replace("_", "-")

    def with_params(self, **kw) -> "AlgoConfig":
        return AlgoConfig(self.kind, {**self.hyperparams, **kw})

    def size_key(self) -> tuple:
        """Smaller tuples mean smaller models; used to break tuning ties."""
        hp = self.hyperparams
        if self.kind == "KNN":
            return (hp["k"],)
        if self.kind == "ELM":
            return (hp["n_hidden"],)
        if self.kind == "DT":
            return (-hp["min_leaf_size"],)
        if self.kind == "RF":
            return (hp["n_trees"], -hp["min_leaf_size"])
        if self.kind == "MLP":
            return (hp["n_hidden"] if isinstance(hp["n_hidden"], int) else 0,)
        return (hp["C"],)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparams": dict(self.hyperparams)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "AlgoConfig":
        return cls(d["kind"], dict(d.get("hyperparams", {})))


def make_estimator(config: AlgoConfig, seed: int = 0):
    hp = dict(config.hyperparams)
    seed = int(hp.pop("seed", seed))
    k = config.kind
    if k.startswith("SVM"):
        kernel = {"SVM_L": "linear", "SVM_P": "polynomial", "SVM_G": "gaussian"}[k]
        return OneVsOneSVC(kernel=kernel, C=hp["C"], gamma=hp.get("gamma"), degree=hp.get("degree", 3),
                           coef0=hp.get("coef0", 1.0), tol=hp["tol"])
    if k == "DT":
        return DecisionTree(min_leaf_size=hp["min_leaf_size"])
    if k == "RF":
        return RandomForest(n_trees=hp["n_trees"], min_leaf_size=hp["min_leaf_size"],
                            features_per_split=hp["features_per_split"], seed=seed)
    if k == "KNN":
        return KNearestNeighbors(k=hp["k"])
    if k == "ELM":
        return ExtremeLearningMachine(n_hidden=hp["n_hidden"], seed=seed, ridge=hp["ridge"])
    return MultilayerPerceptron(n_hidden=hp["n_hidden"], learning_rate=hp["learning_rate"], momentum=hp["momentum"],
                                epochs=hp["epochs"], patience=hp["patience"], l2=hp["l2"], seed=seed)


ESTIMATOR_TYPES = {
    "SVM_L": OneVsOneSVC, "SVM_P": OneVsOneSVC, "SVM_G": OneVsOneSVC, "DT": DecisionTree,
    "RF": RandomForest, "KNN": KNearestNeighbors, "ELM": ExtremeLearningMachine, "MLP": MultilayerPerceptron,
}


@dataclass(frozen=True)
class TrainedModel:
    """A fitted classifier with its label dictionary.

    ``predict`` expects inputs in the same (possibly standardized) space as
    the training data; ``standardizer`` records that mapping for raw inputs.
    """

    config: AlgoConfig
    classes: tuple[str, ...]
    estimator: object
    standardizer: Standardizer | None = None
    seed: int = 0

    @property
    def n_features(self) -> int:
        return int(self.estimator.n_features_)

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        return self.estimator.decision_scores(X)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        """Label of every row; argmax of scores, ties to the lowest class index."""
        s = self.scores(X)
        return np.asarray(self.classes, dtype=object)[np.argmax(s, axis=1)]

    def predict_raw(self, X: np.ndarray) -> np.ndarray:
        if self.standardizer is not None:
            X = self.standardizer.apply(X)
        return self.predict_batch(X)


def _check_training_data(X: np.ndarray, y: Sequence) -> None:
    if X.ndim != 2:
        raise DimensionMismatch("X must be a 2-D array of feature vectors")
    if len(X) != len(y) or len(X) < 2:
        raise DimensionMismatch(f"need |X| = |y| >= 2, got {len(X)} and {len(y)}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("training features contain NaN or infinity")
    if len(set(y)) < 2:
        raise DegenerateLabels("training labels contain a single class")


def train(config: AlgoConfig, X: np.ndarray, y: Sequence[str], seed: int = 0,
          classes: Sequence[str] | None = None, standardizer: Standardizer | None = None) -> TrainedModel:
    """Fit ``config`` on ``(X, y)``.

    ``classes`` fixes the label dictionary order (default: sorted labels);
    classes absent from ``y`` may be listed and are simply never scored high.
    """
    X = np.asarray(X, dtype=float)
    y = list(y)
    _check_training_data(X, y)
    classes = tuple(classes) if classes is not None else tuple(sorted(set(y)))
    index = {c: i for i, c in enumerate(classes)}
    missing = set(y) - set(index)
    if missing:
        raise ValueError(f"labels {sorted(missing)} not in the class list")
    y_idx = np.array([index[v] for v in y], dtype=np.int64)
    est = make_estimator(config, seed).fit(X, y_idx, len(classes))
    return TrainedModel(config=config, classes=classes, estimator=est, standardizer=standardizer, seed=seed)


def predict(model: TrainedModel, x: np.ndarray) -> tuple[str, np.ndarray]:
    """Label and per-class scores for one feature vector."""
    s = model.scores(np.asarray(x, dtype=float).reshape(1, -1))[0]
    return model.classes[int(np.argmax(s))], s


def accuracy(truth: Sequence, pred: Sequence) -> float:
    truth, pred = np.asarray(truth, dtype=object), np.asarray(pred, dtype=object)
    return float(np.mean(truth == pred)) if len(truth) else 0.0


@dataclass
class TuneResult:
    config: AlgoConfig
    val_accuracy: float
    table: list[tuple[AlgoConfig, float]]


def _knn_grid_scores(grid_configs, X_tr, y_tr, X_va, y_va, classes):
    """All k at once: the k nearest neighbours are a prefix of the k_max nearest."""
    index = {c: i for i, c in enumerate(classes)}
    y_idx = np.array([index[v] for v in y_tr], dtype=np.int64)
    kmax = max(c.hyperparams["k"] for c in grid_configs)
    knn = KNearestNeighbors(kmax).fit(X_tr, y_idx, len(classes))
    nb = knn.neighbors(X_va, kmax)
    truth = np.array([index.get(v, -1) for v in y_va])
    out = []
    for cfg in grid_configs:
        k = min(cfg.hyperparams["k"], nb.shape[1])
        pred = np.argmax(knn.votes(nb[:, :k]), axis=1)
        out.append(float(np.mean(pred == truth)))
    return out


def tune(kind: str | AlgoConfig, train_data: tuple[np.ndarray, Sequence], val_data: tuple[np.ndarray, Sequence],
         grid: Sequence[Mapping] | None = None, seed: int = 0, classes: Sequence[str] | None = None) -> TuneResult:
    """Pick the grid point with the highest validation accuracy.

    Ties go to the smaller model (smaller k, fewer neurons, larger leaves),
    then to grid order.
    """
    base = kind if isinstance(kind, AlgoConfig) else AlgoConfig(kind)
    if grid is None:
        grid = DEFAULT_GRIDS.get(base.kind, [{}])
    if len(grid) == 0:
        raise EmptyGrid(f"empty hyperparameter grid for {base.kind}")
    configs = [base.with_params(**g) for g in grid]
    X_tr, y_tr = np.asarray(train_data[0], dtype=float), list(train_data[1])
    X_va, y_va = np.asarray(val_data[0], dtype=float), list(val_data[1])
    classes = tuple(classes) if classes is not None else tuple(sorted(set(y_tr)))
    if len(configs) == 1:
        return TuneResult(configs[0], float("nan"), [(configs[0], float("nan"))])
    _check_training_data(X_tr, y_tr)
    if base.kind == "KNN":
        scores = _knn_grid_scores(configs, X_tr, y_tr, X_va, y_va, classes)
    else:
        scores = []
        for cfg in configs:
            m = train(cfg, X_tr, y_tr, seed=seed, classes=classes)
            scores.append(accuracy(y_va, m.predict_batch(X_va)))
    best = min(range(len(configs)), key=lambda i: (-scores[i], configs[i].size_key(), i))
    return TuneResult(configs[best], scores[best], list(zip(configs, scores)))


__all__ = [
    "ALGO_KINDS", "AlgoConfig", "DEFAULT_GRIDS", "DEFAULT_HYPERPARAMS", "KernelParams", "TrainedModel",
    "TuneResult", "accuracy", "kernel_eval", "kernel_matrix", "make_estimator", "predict", "train", "tune",
]
