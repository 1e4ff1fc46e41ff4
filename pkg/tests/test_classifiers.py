"""Oracle and contract tests for the six classifier families."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from exercise_eval.classifiers import (ALGO_KINDS, AlgoConfig, KernelParams, kernel_eval, kernel_matrix, predict,
                                       train, tune)
from exercise_eval.classifiers.elm import ExtremeLearningMachine
from exercise_eval.classifiers.knn import KNearestNeighbors
from exercise_eval.classifiers.mlp import MlpParams, MultilayerPerceptron, hidden_size, init_params, loss_and_grad
from exercise_eval.classifiers.svm import OneVsOneSVC, smo_solve
from exercise_eval.classifiers.tree import DecisionTree, RandomForest, bootstrap_plan, gini
from exercise_eval.errors import DegenerateLabels, DimensionMismatch, EmptyGrid, NonFiniteFeature
from exercise_eval.serialize import FormatError, load_model, model_from_arrays, model_to_arrays, save_model

FAST = {"RF": {"n_trees": 5}, "MLP": {"epochs": 200}}


def blobs(rng, n_per=30, d=6, k=3, spread=0.3):
    centers = rng.normal(scale=3.0, size=(k, d))
    X = np.vstack([c + spread * rng.normal(size=(n_per, d)) for c in centers])
    y = np.repeat([f"c{i}" for i in range(k)], n_per)
    return X, y


def fast_config(kind):
    return AlgoConfig(kind, FAST.get(kind, {}))


# ---------------------------------------------------------------------------
# KNN


def knn_oracle(Xtr, ytr, q, k, n_classes):
    d = [float(np.sum((x - q) ** 2)) for x in Xtr]
    order = sorted(range(len(Xtr)), key=lambda i: (d[i], i))[:k]
    votes = [0] * n_classes
    for i in order:
        votes[ytr[i]] += 1
    return max(range(n_classes), key=lambda c: (votes[c], -c))


def test_knn_matches_exhaustive_oracle(rng):
    Xtr = rng.integers(-3, 4, size=(150, 4)).astype(float)  # integer grid: plenty of distance ties
    ytr = rng.integers(0, 4, size=150)
    Q = rng.integers(-3, 4, size=(200, 4)).astype(float)
    for k in (1, 4, 7):
        m = KNearestNeighbors(k).fit(Xtr, ytr, 4)
        got = np.argmax(m.decision_scores(Q), axis=1)
        want = [knn_oracle(Xtr, ytr, q, k, 4) for q in Q]
        assert got.tolist() == want


def test_knn_k1_reproduces_training_labels(rng):
    X, y = blobs(rng)
    m = train(AlgoConfig("KNN", {"k": 1}), X, y)
    assert list(m.predict_batch(X)) == list(y)


# ---------------------------------------------------------------------------
# ELM


def test_elm_output_weights_solve_normal_equations(rng):
    X, y = blobs(rng, n_per=40)
    m = ExtremeLearningMachine(n_hidden=50, seed=1, ridge=1e-6)
    yi = np.searchsorted(np.unique(y), y)
    m.fit(X, yi, 3)
    H = m.hidden(X)
    T = np.eye(3)[yi]
    lhs = (H.T @ H + 1e-6 * np.eye(50)) @ m.output_weights_
    rhs = H.T @ T
    assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-8


def test_elm_seeded(rng):
    X, y = blobs(rng)
    a = train(AlgoConfig("ELM", {"n_hidden": 20}), X, y, seed=3)
    b = train(AlgoConfig("ELM", {"n_hidden": 20}), X, y, seed=3)
    np.testing.assert_array_equal(a.estimator.output_weights_, b.estimator.output_weights_)


# ---------------------------------------------------------------------------
# SVM


def test_svm_two_point_max_margin():
    a, b = np.array([1.0, 1.0]), np.array([-1.0, 0.0])
    X = np.vstack([a, b])
    svc = OneVsOneSVC("linear", C=10.0, tol=1e-6).fit(X, np.array([0, 1]), 2)
    # analytic solution: w = 2 (a - b) / |a - b|^2, boundary through the midpoint
    w_true = 2 * (a - b) / np.sum((a - b) ** 2)
    np.testing.assert_allclose(svc.linear_w_[0], w_true, atol=1e-3)
    mid = (a + b) / 2
    assert abs(svc.pair_decisions(mid[None])[0, 0]) < 1e-3
    np.testing.assert_allclose(svc.pair_decisions(X)[:, 0], [1.0, -1.0], atol=1e-3)


def dual_objective(alpha, K, y):
    Q = (y[:, None] * y[None, :]) * K
    return 0.5 * alpha @ Q @ alpha - alpha.sum()


@pytest.mark.parametrize("kind", ["linear", "gaussian", "polynomial"])
def test_smo_matches_generic_qp(rng, kind):
    X = rng.normal(size=(30, 3))
    y = np.where(X[:, 0] + 0.5 * X[:, 1] ** 2 + 0.3 * rng.normal(size=30) > 0.3, 1.0, -1.0)
    K = kernel_matrix(KernelParams(kind, gamma=0.5), X, X)
    C = 1.0
    res = smo_solve(K, y, C, tol=1e-6)
    assert res.converged
    qp = minimize(dual_objective, np.zeros(30), args=(K, y), jac=lambda a, K, y: ((y[:, None] * y) * K) @ a - 1,
                  bounds=[(0, C)] * 30, constraints=[{"type": "eq", "fun": lambda a: a @ y, "jac": lambda a: y}],
                  method="SLSQP", options={"ftol": 1e-12, "maxiter": 1000})
    f_smo, f_qp = dual_objective(res.alpha, K, y), qp.fun
    assert f_smo <= f_qp + 1e-4 * abs(f_qp)
    assert abs(res.alpha @ y) < 1e-9
    assert np.all((res.alpha >= 0) & (res.alpha <= C))


def test_kernel_matrix_matches_pointwise(rng):
    A, B = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
    for kind in ("linear", "polynomial", "gaussian"):
        p = KernelParams(kind, gamma=0.3)
        K = kernel_matrix(p, A, B)
        for i in range(4):
            for j in range(5):
                assert K[i, j] == pytest.approx(kernel_eval(p, A[i], B[j]), rel=1e-10, abs=1e-12)


def test_gaussian_kernel_self_similarity(rng):
    A = rng.normal(size=(6, 4))
    np.testing.assert_allclose(np.diag(kernel_matrix(KernelParams("gaussian", gamma=2.0), A, A)), 1.0)


def test_svm_separable_multiclass(rng):
    X, y = blobs(rng, k=4)
    for kind in ("SVM_L", "SVM_P", "SVM_G"):
        m = train(AlgoConfig(kind), X, y)
        assert list(m.predict_batch(X)) == list(y)


# ---------------------------------------------------------------------------
# trees


def best_split_oracle(X, y):
    """Exhaustive search: minimum weighted Gini over all features and midpoints."""
    n = len(y)
    best = (np.inf, None, None)
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = (lo + hi) / 2
            left = X[:, f] <= thr
            cl = np.bincount(y[left], minlength=3)
            cr = np.bincount(y[~left], minlength=3)
            imp = (left.sum() * gini(cl) + (~left).sum() * gini(cr)) / n
            if imp < best[0] - 1e-12:
                best = (imp, f, thr)
    return best


def test_tree_root_split_matches_exhaustive_search(rng):
    for _ in range(10):
        X = rng.normal(size=(40, 4)).round(1)
        y = rng.integers(0, 3, size=40)
        t = DecisionTree().fit(X, y, 3)
        imp, f, thr = best_split_oracle(X, y)
        left = X[:, t.feature_[0]] <= t.threshold_[0]
        got = (left.sum() * gini(np.bincount(y[left], minlength=3))
               + (~left).sum() * gini(np.bincount(y[~left], minlength=3))) / 40
        assert got == pytest.approx(imp, abs=1e-12)


def test_tree_fits_training_data_with_unit_leaves(rng):
    X, y = blobs(rng, spread=2.0)
    m = train(AlgoConfig("DT"), X, y)
    assert list(m.predict_batch(X)) == list(y)


@given(st.integers(1, 12))
def test_tree_min_leaf_respected(min_leaf):
    r = np.random.default_rng(min_leaf)
    X = r.normal(size=(60, 3))
    y = r.integers(0, 2, size=60)
    t = DecisionTree(min_leaf_size=min_leaf).fit(X, y, 2)
    assert t.n_node_samples_[t.is_leaf].min() >= min_leaf


def test_single_tree_forest_equals_replayed_tree(rng):
    X, y = blobs(rng, spread=1.5)
    yi = np.searchsorted(np.unique(y), y)
    forest = RandomForest(n_trees=1, features_per_split=2, seed=11).fit(X, yi, 3)
    (idx, tree_seed), = bootstrap_plan(11, 1, len(X))
    tree = DecisionTree(features_per_split=2, seed=tree_seed).fit(X[idx], yi[idx], 3)
    np.testing.assert_array_equal(forest.trees_[0].feature_, tree.feature_)
    np.testing.assert_array_equal(forest.trees_[0].threshold_, tree.threshold_)
    Q = rng.normal(scale=3.0, size=(50, 6))
    np.testing.assert_array_equal(forest.decision_scores(Q), tree.decision_scores(Q))


def test_forest_seeded_and_seed_sensitive(rng):
    X, y = blobs(rng, spread=2.0)
    a = train(AlgoConfig("RF", {"n_trees": 4}), X, y, seed=1)
    b = train(AlgoConfig("RF", {"n_trees": 4}), X, y, seed=1)
    c = train(AlgoConfig("RF", {"n_trees": 4}), X, y, seed=2)
    Q = rng.normal(scale=3.0, size=(40, 6))
    np.testing.assert_array_equal(a.scores(Q), b.scores(Q))
    assert not np.array_equal(a.scores(Q), c.scores(Q))


# ---------------------------------------------------------------------------
# MLP


def test_mlp_gradient_matches_central_differences(rng):
    n_in, n_h, n_out = 4, 5, 3
    p = init_params(n_in, n_h, n_out, rng)
    p.b1 += rng.normal(size=n_h) * 0.1
    p.b2 += rng.normal(size=n_out) * 0.1
    X = rng.normal(size=(7, n_in))
    Y = np.eye(n_out)[rng.integers(0, n_out, size=7)]
    _, g = loss_and_grad(p, X, Y, l2=1e-3)
    v, ga = p.flat(), g.flat()
    eps = 1e-6
    num = np.empty_like(v)
    for i in range(len(v)):
        up, dn = v.copy(), v.copy()
        up[i] += eps
        dn[i] -= eps
        fu = loss_and_grad(MlpParams.unflat(up, n_in, n_h, n_out), X, Y, 1e-3)[0]
        fd = loss_and_grad(MlpParams.unflat(dn, n_in, n_h, n_out), X, Y, 1e-3)[0]
        num[i] = (fu - fd) / (2 * eps)
    assert np.linalg.norm(ga - num) / np.linalg.norm(num) < 1e-5


def test_hidden_size_rules():
    assert hidden_size(96, 19) == 58
    assert hidden_size(96, 12) == 54
    assert hidden_size(96, 2, "half_inputs") == 48
    with pytest.raises(ValueError):
        hidden_size(96, 2, "other")


def test_mlp_learns_separable_blobs(rng):
    X, y = blobs(rng)
    m = train(AlgoConfig("MLP", {"epochs": 300}), X, y, seed=0)
    assert np.mean(m.predict_batch(X) == y) == 1.0
    assert isinstance(m.estimator, MultilayerPerceptron)


# ---------------------------------------------------------------------------
# uniform contract


@pytest.mark.parametrize("kind", ALGO_KINDS)
def test_every_family_separates_blobs_and_round_trips(tmp_path, rng, kind):
    X, y = blobs(rng)
    m = train(fast_config(kind), X, y, seed=4)
    assert np.mean(m.predict_batch(X) == y) == 1.0
    label, scores = predict(m, X[0])
    assert label == y[0] and scores.shape == (3,)
    path = save_model(m, tmp_path / "m.npz")
    back = load_model(path)
    Q = rng.normal(scale=3.0, size=(25, X.shape[1]))
    np.testing.assert_array_equal(back.scores(Q), m.scores(Q))
    assert back.config == m.config and back.classes == m.classes


@pytest.mark.parametrize("kind", ALGO_KINDS)
def test_deterministic_for_fixed_seed(rng, kind):
    X, y = blobs(rng)
    Q = rng.normal(scale=3.0, size=(20, X.shape[1]))
    a = train(fast_config(kind), X, y, seed=9).scores(Q)
    b = train(fast_config(kind), X, y, seed=9).scores(Q)
    np.testing.assert_array_equal(a, b)


def test_training_errors(rng):
    X, y = blobs(rng)
    with pytest.raises(DegenerateLabels):
        train(AlgoConfig("KNN"), X, ["a"] * len(X))
    with pytest.raises(DimensionMismatch):
        train(AlgoConfig("KNN"), X, y[:-1])
    Xn = X.copy()
    Xn[3, 2] = np.nan
    with pytest.raises(NonFiniteFeature):
        train(AlgoConfig("KNN"), Xn, y)
    m = train(AlgoConfig("KNN"), X, y)
    with pytest.raises(DimensionMismatch):
        predict(m, np.zeros(X.shape[1] + 1))


def test_config_validation():
    with pytest.raises(ValueError):
        AlgoConfig("KNN", {"k": 0})
    with pytest.raises(ValueError):
        AlgoConfig("ELM", {"n_hidden": 5000})
    with pytest.raises(ValueError):
        AlgoConfig("SVM_G", {"C": -1})
    with pytest.raises(ValueError):
        AlgoConfig("XGB")
    assert AlgoConfig("svm-g").kind == "SVM_G"
    cfg = AlgoConfig("ELM", {"n_hidden": 50})
    assert AlgoConfig.from_dict(cfg.to_dict()) == cfg


def test_tune_picks_best_and_breaks_ties_to_smaller(rng):
    X, y = blobs(rng, spread=0.05)
    res = tune("KNN", (X, y), (X, y))
    # every k is perfect on well separated blobs; the smallest wins
    assert res.config.hyperparams["k"] == 1 and res.val_accuracy == 1.0
    assert len(res.table) == 20


def test_tune_knn_fast_path_matches_refits(rng):
    X, y = blobs(rng, spread=2.5)
    Xv, yv = blobs(np.random.default_rng(1), spread=2.5)
    res = tune("KNN", (X, y), (Xv, yv))
    for cfg, acc in res.table:
        m = train(cfg, X, y)
        assert acc == pytest.approx(np.mean(m.predict_batch(Xv) == yv))


def test_tune_dt_and_elm_grid(rng):
    X, y = blobs(rng, spread=1.5)
    r = tune("DT", (X, y), (X, y))
    assert r.config.hyperparams["min_leaf_size"] in (1, 2, 5, 10, 20, 50)
    r = tune("ELM", (X, y), (X, y), grid=[{"n_hidden": 10}, {"n_hidden": 20}])
    assert len(r.table) == 2


def test_tune_empty_grid(rng):
    X, y = blobs(rng)
    with pytest.raises(EmptyGrid):
        tune("KNN", (X, y), (X, y), grid=[])


def test_untuned_family_returns_default(rng):
    X, y = blobs(rng)
    res = tune("SVM_L", (X, y), (X, y))
    assert res.config == AlgoConfig("SVM_L")


def test_bad_container(tmp_path, rng):
    X, y = blobs(rng)
    arrays = model_to_arrays(train(AlgoConfig("KNN"), X, y))
    arrays["__meta__"] = np.array('{"format": "other", "version": 1}')
    with pytest.raises(FormatError):
        model_from_arrays(arrays)
