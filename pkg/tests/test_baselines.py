import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize

from pyrolens.baselines import (elastic_net_objective, fit_elastic_net, fit_gini_tree_classifier, fit_knn,
                                fit_lasso, fit_linear, fit_logistic, fit_ridge, fit_weighted_least_squares,
                                knn_predict)
from pyrolens.data import fit_standardizer, synthesize
from pyrolens.errors import ArgumentError, RankError


def _regression(seed, n=60, m=4):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, m)) * rng.uniform(0.5, 3, m) + rng.normal(size=m)
    beta = rng.normal(size=m)
    return X, X @ beta + 1.5 + 0.1 * rng.normal(size=n), beta


def test_linear_recovers_exact_plane():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 3))
    y = X @ np.array([2.0, -1.0, 0.5]) + 4.0
    m = fit_linear(X, y)
    np.testing.assert_allclose(m.coefficients, [2.0, -1.0, 0.5], atol=1e-12)
    assert m.intercept == pytest.approx(4.0, abs=1e-12)


@given(st.integers(0, 10_000))
def test_weighted_ridge_solves_normal_equations(seed):
    X, y, _ = _regression(seed)
    w = np.random.default_rng(seed + 1).uniform(0.1, 2.0, len(y))
    alpha = 0.7
    m = fit_weighted_least_squares(X, y, w, alpha)
    # stationarity of the weighted, intercept-free penalized objective
    r = y - m.decision_function(X)
    np.testing.assert_allclose(X.T @ (w * r), alpha * m.coefficients, atol=1e-8)
    assert abs(w @ r) < 1e-8


def test_ridge_shrinks_and_rank_error():
    X, y, _ = _regression(3)
    assert np.linalg.norm(fit_ridge(X, y, 100.0).coefficients) < np.linalg.norm(fit_linear(X, y).coefficients)
    Xd = np.column_stack([X[:, 0], X[:, 0]])
    with pytest.raises(RankError):
        fit_linear(Xd, y)
    assert np.all(np.isfinite(fit_ridge(Xd, y, 1.0).coefficients))


def test_logistic_matches_scipy_optimum():
    d = synthesize(300, 1)
    X, y = d.features, d.safety_label
    C = 0.5
    m = fit_logistic(X, y, "l2", C, tol=1e-10, max_iter=20000)
    st_ = fit_standardizer(X)
    Z = st_.transform(X)

    def obj(theta):
        w, b = theta[:-1], theta[-1]
        t = Z @ w + b
        return np.sum(np.logaddexp(0, t) - y * t) + 0.5 * w @ w / C

    ref = minimize(obj, np.zeros(6), method="BFGS", options={"gtol": 1e-9}).x
    coef_raw = ref[:-1] / st_.std
    np.testing.assert_allclose(m.coefficients, coef_raw, rtol=1e-4, atol=1e-6)
    assert fit_logistic(X, y, "l2", C).converged


def test_logistic_l1_sparsifies():
    d = synthesize(400, 2)
    m = fit_logistic(d.features, d.safety_label, "l1", 0.01)
    assert abs(m.coefficients[1]) < 1e-12 and abs(m.coefficients[3]) < 1e-12
    assert np.all(np.diff(m.objective_trace) <= 1e-9)


def test_logistic_accuracy_and_errors():
    d = synthesize(600, 3)
    m = fit_logistic(d.features, d.safety_label)
    assert np.mean(m.predict(d.features) == d.safety_label) > 0.85
    with pytest.raises(ArgumentError):
        fit_logistic(d.features, d.safety_label, "l3")


@given(st.integers(0, 10_000), st.sampled_from([0.05, 0.3]), st.sampled_from([0.2, 0.7, 1.0]))
def test_elastic_net_kkt(seed, alpha, l1_ratio):
    X, y, _ = _regression(seed)
    m = fit_elastic_net(X, y, alpha, l1_ratio)
    st_ = fit_standardizer(X)
    Z = st_.transform(X)
    w = m.coefficients * st_.std
    r = (y - y.mean()) - Z @ w
    grad = Z.T @ r / len(y) - alpha * (1 - l1_ratio) * w
    l1 = alpha * l1_ratio
    active = np.abs(w) > 1e-10
    np.testing.assert_allclose(grad[active], l1 * np.sign(w[active]), atol=1e-7)
    assert np.all(np.abs(grad[~active]) <= l1 + 1e-7)
    assert np.all(np.diff(m.objective_trace) <= 1e-12)


def test_lasso_large_alpha_is_all_zero():
    X, y, _ = _regression(4)
    m = fit_lasso(X, y, 1e3)
    assert np.all(m.coefficients == 0) and m.intercept == pytest.approx(y.mean())


def test_elastic_net_objective_value():
    X = np.array([[1.0], [2.0]])
    y = np.array([1.0, 3.0])
    val = elastic_net_objective(X, y, np.array([1.0]), 0.0, 0.5, 0.5)
    assert val == pytest.approx((0 + 1) / 4 + 0.25 + 0.125)


def test_knn_matches_brute_force():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(50, 3)) * [1, 10, 100]
    y = (rng.random(50) < 0.5).astype(float)
    idx = fit_knn(X, y, n_neighbors=5, p=1)
    Z = (X - X.mean(0)) / X.std(0, ddof=1)
    for q in rng.normal(size=(10, 3)) * [1, 10, 100]:
        zq = (q - X.mean(0)) / X.std(0, ddof=1)
        d = np.abs(Z - zq).sum(1)
        expect = sorted(range(50), key=lambda i: (d[i], i))[:5]
        assert idx.neighbors(q)[0].tolist() == expect
        cls, votes = knn_predict(idx, q)
        assert votes[1] == int(y[expect].sum()) and cls == int(votes[1] > votes[0])


def test_knn_arguments():
    X = np.zeros((4, 2))
    with pytest.raises(ArgumentError):
        fit_knn(X, np.zeros(4), n_neighbors=5)
    with pytest.raises(ArgumentError):
        fit_knn(X, np.zeros(4), p=3)


def test_gini_classifier_wrapper():
    d = synthesize(300, 6)
    m = fit_gini_tree_classifier(d.features, d.safety_label)
    assert m.kind == "dtree"
    assert np.mean(m.predict(d.features) == d.safety_label) > 0.9
