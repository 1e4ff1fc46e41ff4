"""CART classification trees (Gini impurity) and bootstrap-aggregated forests."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch

LEAF = -1


def gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - p @ p)


def _best_split(x: np.ndarray, y_onehot: np.ndarray, min_leaf: int) -> tuple[float, float] | None:
    """Best threshold on one feature as (score, threshold); higher score is better.

    The score is sum_c n_Lc^2 / n_L + sum_c n_Rc^2 / n_R, which increases as
    the weighted child Gini impurity decreases.
    """
    n = len(x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    left = np.cumsum(y_onehot[order], axis=0)[:-1]  # counts in the left child for split after position k
    n_left = np.arange(1, n)
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None
    total = left[-1] + y_onehot[order[-1]]
    right = total - left
    score = (left * left).sum(1) / n_left + (right * right).sum(1) / (n - n_left)
    score = np.where(valid, score, -np.inf)
    k = int(np.argmax(score))
    lo, hi = xs[k], xs[k + 1]
    thr = lo + (hi - lo) / 2.0
    if not (lo <= thr < hi):
        thr = lo
    return float(score[k]), float(thr)


class DecisionTree:
    """Greedy recursive partitioning; samples with ``x[f] <= threshold`` go left."""

    def __init__(self, min_leaf_size: int = 1, features_per_split: int | None = None,
                 max_depth: int | None = None, seed=None):
        if min_leaf_size < 1:
            raise ValueError("min_leaf_size must be >= 1")
        self.min_leaf_size = int(min_leaf_size)
        self.features_per_split = features_per_split
        self.max_depth = max_depth
        self.seed = seed

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "DecisionTree":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        n, d = X.shape
        self.n_classes_ = int(n_classes)
        self.n_features_ = d
        rng = np.random.default_rng(self.seed)
        onehot = np.eye(self.n_classes_)[y]
        mtry = d if self.features_per_split is None else max(1, min(d, int(self.features_per_split)))

        feature, threshold, left, right, value, n_samples = [], [], [], [], [], []

        def new_node(idx):
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            value.append(onehot[idx].sum(0))
            n_samples.append(len(idx))
            return len(feature) - 1

        root = new_node(np.arange(n))
        stack = [(root, np.arange(n), 0)]
        while stack:
            node, idx, depth = stack.pop()
            counts = value[node]
            if (np.count_nonzero(counts) <= 1 or len(idx) < 2 * self.min_leaf_size
                    or (self.max_depth is not None and depth >= self.max_depth)):
                continue
            feats = np.arange(d) if mtry == d else np.sort(rng.choice(d, size=mtry, replace=False))
            best = None
            Xn, Yn = X[idx], onehot[idx]
            for f in feats:
                res = _best_split(Xn[:, f], Yn, self.min_leaf_size)
                if res is not None and (best is None or res[0] > best[0]):
                    best = (res[0], res[1], f)
            if best is None:
                continue
            _, thr, f = best
            go_left = Xn[:, f] <= thr
            li, ri = idx[go_left], idx[~go_left]
            feature[node], threshold[node] = int(f), thr
            left[node] = new_node(li)
            right[node] = new_node(ri)
            # right pushed first so the left subtree is expanded first
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))

        self.feature_ = np.array(feature, dtype=np.int64)
        self.threshold_ = np.array(threshold, dtype=float)
        self.left_ = np.array(left, dtype=np.int64)
        self.right_ = np.array(right, dtype=np.int64)
        self.value_ = np.array(value, dtype=float).reshape(-1, self.n_classes_)
        self.n_node_samples_ = np.array(n_samples, dtype=np.int64)
        return self

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_:
            raise DimensionMismatch(f"expected {self.n_features_} features, got {X.shape[1]}")
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature_[node] != LEAF
        while active.any():
            cur = node[active]
            go_left = X[active, self.feature_[cur]] <= self.threshold_[cur]
            node[active] = np.where(go_left, self.left_[cur], self.right_[cur])
            active = self.feature_[node] != LEAF
        return node

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        """Class proportions in the reached leaf."""
        v = self.value_[self.apply(X)]
        return v / v.sum(1, keepdims=True)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature_ == LEAF

    def state(self) -> dict:
        return {
            "min_leaf_size": self.min_leaf_size,
            "n_classes": self.n_classes_,
            "n_features": self.n_features_,
            "feature": self.feature_,
            "threshold": self.threshold_,
            "left": self.left_,
            "right": self.right_,
            "value": self.value_,
            "n_node_samples": self.n_node_samples_,
        }

    @classmethod
    def from_state(cls, st: dict) -> "DecisionTree":
        t = cls(min_leaf_size=int(st["min_leaf_size"]))
        t.n_classes_ = int(st["n_classes"])
        t.n_features_ = int(st["n_features"])
        t.feature_ = np.asarray(st["feature"], dtype=np.int64)
        t.threshold_ = np.asarray(st["threshold"], dtype=float)
        t.left_ = np.asarray(st["left"], dtype=np.int64)
        t.right_ = np.asarray(st["right"], dtype=np.int64)
        t.value_ = np.asarray(st["value"], dtype=float).reshape(-1, t.n_classes_)
        t.n_node_samples_ = np.asarray(st["n_node_samples"], dtype=np.int64)
        return t


def bootstrap_plan(seed: int, n_trees: int, n_samples: int) -> list[tuple[np.ndarray, np.random.SeedSequence]]:
    """Bootstrap indices and tree seed for every tree of a forest."""
    plan = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        boot_seq, tree_seq = child.spawn(2)
        idx = np.random.default_rng(boot_seq).integers(0, n_samples, size=n_samples)
        plan.append((idx, tree_seq))
    return plan


class RandomForest:
    """Bagged CART trees with a random feature subset at every split.

    Scores are leaf class proportions averaged over trees.
    """

    def __init__(self, n_trees: int = 100, min_leaf_size: int = 1, features_per_split: int | None = None,
                 seed: int = 0):
        if n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        self.n_trees = int(n_trees)
        self.min_leaf_size = int(min_leaf_size)
        self.features_per_split = features_per_split
        self.seed = seed

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "RandomForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        mtry = self.features_per_split
        if mtry is None:
            mtry = int(np.floor(np.sqrt(X.shape[1])))
        self.n_classes_ = int(n_classes)
        self.n_features_ = X.shape[1]
        self.trees_ = []
        for idx, tree_seed in bootstrap_plan(self.seed, self.n_trees, len(X)):
            tree = DecisionTree(self.min_leaf_size, features_per_split=mtry, seed=tree_seed)
            self.trees_.append(tree.fit(X[idx], y[idx], n_classes))
        return self

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_:
            raise DimensionMismatch(f"expected {self.n_features_} features, got {X.shape[1]}")
        acc = np.zeros((len(X), self.n_classes_))
        for t in self.trees_:
            acc += t.decision_scores(X)
        return acc / len(self.trees_)

    def state(self) -> dict:
        st = {"n_trees": self.n_trees, "min_leaf_size": self.min_leaf_size, "seed": self.seed,
              "n_classes": self.n_classes_, "n_features": self.n_features_}
        for k, t in enumerate(self.trees_):
            for key, val in t.state().items():
                st[f"tree{k}.{key}"] = val
        return st

    @classmethod
    def from_state(cls, st: dict) -> "RandomForest":
        f = cls(n_trees=int(st["n_trees"]), min_leaf_size=int(st["min_leaf_size"]), seed=int(st["seed"]))
        f.n_classes_ = int(st["n_classes"])
        f.n_features_ = int(st["n_features"])
        f.trees_ = []
        for k in range(f.n_trees):
            prefix = f"tree{k}."
            f.trees_.append(DecisionTree.from_state(
                {key[len(prefix):]: v for key, v in st.items() if key.startswith(prefix)}))
        return f
