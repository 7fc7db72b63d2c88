import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from pyrolens.errors import ArgumentError, DegenerateError
from pyrolens.tree import (DecisionTree, decision_path, feature_importance, fit_boosted_tree, fit_cart_regression,
                           fit_gini_tree, predict_tree, predict_trees)


def _dataset(seed, n, m=3, levels=6):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, levels, (n, m)).astype(np.float64)
    return rng, X


@given(st.integers(0, 2**31), st.integers(2, 64), st.integers(1, 4), st.sampled_from([0.0, 0.3]),
       st.sampled_from([0.5, 1.0, 3.0]))
def test_newton_tree_matches_exhaustive_search(seed, n, depth, gamma, lam):
    rng, X = _dataset(seed, n)
    g = rng.normal(size=n)
    h = rng.uniform(0.05, 1.0, n)
    t = fit_boosted_tree(X, g, h, max_depth=depth, gamma=gamma, reg_lambda=lam, min_child_weight=0.5)
    params = {"gamma": gamma, "reg_lambda": lam, "min_child_weight": 0.5}
    assert oracles.audit_splits(t, X, g, h, "newton", depth, params) == []


@given(st.integers(0, 2**31), st.integers(2, 64), st.sampled_from([None, 1, 3]), st.integers(2, 6))
def test_cart_tree_matches_exhaustive_search(seed, n, depth, mss):
    rng, X = _dataset(seed, n, levels=8)
    y = rng.normal(size=n)
    t = fit_cart_regression(X, y, max_depth=depth, min_samples_split=mss)
    limit = 10**9 if depth is None else depth
    assert oracles.audit_splits(t, X, y, np.ones(n), "sse", limit, {"min_samples_split": mss}) == []


@given(st.integers(0, 2**31), st.integers(4, 48))
def test_weighted_cart_matches_exhaustive_search(seed, n):
    rng, X = _dataset(seed, n)
    y = rng.normal(size=n)
    w = rng.integers(1, 4, n).astype(np.float64)
    t = fit_cart_regression(X, y, max_depth=3, sample_weight=w)
    assert oracles.audit_splits(t, X, y, w, "sse", 3) == []


def test_leaf_values():
    X = np.array([[0.0], [0.0], [1.0], [1.0]])
    g = np.array([1.0, 1.0, -2.0, -2.0])
    h = np.ones(4)
    t = fit_boosted_tree(X, g, h, max_depth=1, reg_lambda=1.0)
    assert t.feature[0] == 0 and t.threshold[0] == 0.5
    assert t.value[t.left[0]] == pytest.approx(-2.0 / 3.0)
    assert t.value[t.right[0]] == pytest.approx(4.0 / 3.0)
    assert t.cover[0] == 4.0
    c = fit_cart_regression(X, np.array([1.0, 3.0, 10.0, 12.0]), max_depth=None)
    np.testing.assert_allclose(c.predict(X), [2.0, 2.0, 11.0, 11.0])


def test_ties_prefer_lowest_feature_then_threshold():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    y = np.array([0.0, 1.0, 1.0, 2.0])
    t = fit_cart_regression(X, y, max_depth=1)
    assert t.feature[0] == 0
    # thresholds 0.5 and 2.5 reduce SSE equally
    assert t.threshold[0] == 0.5


def test_gamma_blocks_weak_splits():
    X = np.array([[0.0], [1.0]])
    g = np.array([0.1, -0.1])
    h = np.ones(2)
    assert fit_boosted_tree(X, g, h, max_depth=3, gamma=0.0).n_splits == 1
    assert fit_boosted_tree(X, g, h, max_depth=3, gamma=1.0).n_nodes == 1


def test_min_child_weight():
    X = np.arange(6, dtype=float)[:, None]
    g = np.array([5.0, -1, -1, -1, -1, -1])
    h = np.full(6, 0.4)
    t = fit_boosted_tree(X, g, h, max_depth=1, min_child_weight=1.0)
    left = t.left[0]
    assert t.cover[left] >= 1.0 and t.cover[t.right[0]] >= 1.0


def test_cover_is_child_sum_and_ids_breadth_first():
    rng, X = _dataset(3, 60)
    t = fit_cart_regression(X, rng.normal(size=60), max_depth=4)
    d = t.node_depths()
    assert np.all(np.diff(d) >= 0)
    for i in np.flatnonzero(t.feature >= 0):
        assert t.cover[i] == t.cover[t.left[i]] + t.cover[t.right[i]]


def test_gini_tree_majority_leaves():
    rng, X = _dataset(1, 80)
    y = (X[:, 0] + X[:, 1] > 5).astype(float)
    t = fit_gini_tree(X, y, max_depth=None)
    np.testing.assert_array_equal(t.predict(X), y)
    assert set(np.unique(t.value)) <= {0.0, 1.0}
    with pytest.raises(ArgumentError):
        fit_gini_tree(X, y + 1)


def test_gini_root_matches_oracle():
    for seed in range(20):
        rng, X = _dataset(seed, 40)
        y = rng.integers(0, 2, 40).astype(float)
        best = oracles.exhaustive_gini_split(X, y)
        t = fit_gini_tree(X, y, max_depth=1)
        if best is None:
            assert t.n_nodes == 1
        else:
            assert (t.feature[0], t.threshold[0]) == (best[1], best[2])


def test_decision_path_and_predict():
    rng, X = _dataset(5, 50)
    t = fit_cart_regression(X, rng.normal(size=50), max_depth=3)
    for x in X[:10]:
        path = decision_path(t, x)
        assert path[0] == 0 and t.feature[path[-1]] == -1
        assert predict_tree(t, x) == t.value[path[-1]]
        assert all(b in (t.left[a], t.right[a]) for a, b in zip(path, path[1:]))


def test_predict_trees_weighted_sum():
    rng, X = _dataset(6, 30)
    trees = [fit_cart_regression(X, rng.normal(size=30), max_depth=2) for _ in range(3)]
    w = np.array([0.5, -1.0, 2.0])
    expect = 0.25 + sum(wi * t.predict(X) for wi, t in zip(w, trees))
    np.testing.assert_allclose(predict_trees(trees, X, w, 0.25), expect, atol=1e-12)


def test_dict_round_trip_through_json():
    rng, X = _dataset(7, 40)
    t = fit_boosted_tree(X, rng.normal(size=40), np.ones(40), max_depth=3)
    back = DecisionTree.from_dict(json.loads(json.dumps(t.to_dict())))
    for name in ("feature", "threshold", "left", "right", "value", "cover", "gain"):
        np.testing.assert_array_equal(getattr(back, name), getattr(t, name))


def test_invalid_structures_rejected():
    with pytest.raises(ArgumentError):
        DecisionTree([0, -1, -1], [0.5, 0, 0], [1, -1, -1], [1, -1, -1], [0, 0, 0], [2, 1, 1], [0, 0, 0])
    with pytest.raises(ArgumentError):
        DecisionTree([-1], [0], [0], [-1], [0], [1], [0])
    with pytest.raises(ArgumentError):
        fit_boosted_tree(np.zeros((2, 1)), np.zeros(2), -np.ones(2))
    with pytest.raises(ArgumentError):
        fit_cart_regression(np.array([[np.nan]]), np.zeros(1))


def test_feature_importance_kinds():
    rng, X = _dataset(8, 80, m=4)
    y = 3 * X[:, 2] + 0.1 * rng.normal(size=80)
    t = fit_cart_regression(X, y, max_depth=3)
    for kind in ("gain", "cover", "frequency"):
        imp = feature_importance([t], 4, kind)
        assert imp.sum() == pytest.approx(1.0)
        assert np.all(imp >= 0)
    assert np.argmax(feature_importance([t], 4, "gain")) == 2
    stump = fit_cart_regression(X, np.zeros(80))
    with pytest.raises(DegenerateError):
        feature_importance([stump], 4)
    with pytest.raises(ArgumentError):
        feature_importance([t], 4, "weight")
