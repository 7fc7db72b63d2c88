"""Light baselines: (weighted) least squares and ridge, logistic regression,
k-nearest neighbours, lasso / elastic net by coordinate descent, and a gini tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .data import fit_standardizer
from .ensemble import SingleTreeModel, _check_binary, sigmoid
from .errors import ArgumentError, RankError
from .metrics import binary_cross_entropy
from .tree import fit_gini_tree


@dataclass(eq=False)
class LinearModel:
    intercept: float
    coefficients: np.ndarray
    penalty: dict = field(default_factory=lambda: {"kind": "none"})
    link: str = "identity"
    converged: bool = True
    n_iter: int = 0
    objective_trace: list = field(default_factory=list, repr=False)
    kind: str = "linear"

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if not np.all(np.isfinite(self.coefficients)) or not np.isfinite(self.intercept):
            raise ArgumentError("linear model coefficients must be finite")

    @property
    def n_features(self) -> int:
        return len(self.coefficients)

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return X @ self.coefficients + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        if self.link != "logit":
            raise ArgumentError("predict_proba is only defined for logistic models")
        return sigmoid(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        if self.link == "logit":
            return (self.predict_proba(X) >= 0.5).astype(np.int64)
        return self.decision_function(X)

    def raw_output(self, X) -> np.ndarray:
        return self.decision_function(X)


def fit_weighted_least_squares(X, y, weights=None, ridge_alpha: float = 0.0, fit_intercept: bool = True,
                               kind: str = "linear") -> LinearModel:
    """Minimize ``sum w_i (y_i - b0 - x_i.b)^2 + alpha |b|^2`` in closed form.

    The intercept is not penalized. With ``alpha == 0`` the weighted design
    must have full column rank.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ArgumentError("X must be n x m and y length n")
    n, m = X.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (n,) or np.any(w < 0) or not np.any(w > 0):
        raise ArgumentError("weights must be non-negative, one per row, not all zero")
    if ridge_alpha < 0:
        raise ArgumentError("ridge_alpha must be non-negative")
    sw = w.sum()
    if fit_intercept:
        xm = w @ X / sw
        ym = w @ y / sw
    else:
        xm = np.zeros(m)
        ym = 0.0
    Xc = X - xm
    yc = y - ym
    A = Xc.T @ (Xc * w[:, None]) + ridge_alpha * np.eye(m)
    rhs = Xc.T @ (w * yc)
    if ridge_alpha == 0:
        if np.linalg.matrix_rank(A) < m:
            raise RankError("normal equations are singular; add a ridge penalty")
        coef = np.linalg.lstsq(A, rhs, rcond=None)[0]
    else:
        coef = np.linalg.solve(A, rhs)
    intercept = float(ym - xm @ coef) if fit_intercept else 0.0
    pen = {"kind": "l2", "alpha": float(ridge_alpha)} if ridge_alpha > 0 else {"kind": "none"}
    return LinearModel(intercept, coef, pen, kind=kind)


def fit_ridge(X, y, alpha: float = 1.0) -> LinearModel:
    return fit_weighted_least_squares(X, y, None, alpha, kind="ridge")


def fit_linear(X, y, fit_intercept: bool = True) -> LinearModel:
    return fit_weighted_least_squares(X, y, None, 0.0, fit_intercept=fit_intercept, kind="linear")


# ---------------------------------------------------------------------------
# logistic regression


def _logistic_objective(Z, y, w, b, C, kind):
    margin = Z @ w + b
    # sum of log losses, written stably
    loss = float(np.sum(np.logaddexp(0.0, margin) - y * margin))
    if kind == "l2":
        loss += 0.5 * float(w @ w) / C
    elif kind == "l1":
        loss += float(np.abs(w).sum()) / C
    return loss


def _soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def fit_logistic(X, y, penalty: str = "l2", C: float = 1.0, max_iter: int = 2000, tol: float = 1e-6,
                 solver: str | None = None) -> LinearModel:
    """Penalized logistic regression on internally standardized features.

    Minimizes ``sum_i logloss_i + R(b) / C`` with ``R = |b|^2/2`` (l2),
    ``|b|_1`` (l1) or 0 (none); the intercept is unpenalized. The problem
    goes to L-BFGS-B; for l1 the weights are split into non-negative parts
    so the objective is smooth and exact zeros sit on the bounds. ``tol`` is
    the projected-gradient tolerance per training row. ``solver`` is accepted
    for search-space compatibility and ignored.
    """
    X = np.asarray(X, dtype=np.float64)
    y = _check_binary(y)
    if penalty not in ("l1", "l2", "none"):
        raise ArgumentError(f"penalty must be l1, l2 or none, got {penalty!r}")
    if not C > 0:
        raise ArgumentError("C must be positive")
    st = fit_standardizer(X)
    Z = st.transform(X)
    n, m = Z.shape
    split = penalty == "l1"

    def unpack(theta):
        w = theta[:m] - theta[m:2 * m] if split else theta[:m]
        return w, theta[-1]

    def fun(theta):
        w, b = unpack(theta)
        t = Z @ w + b
        r = sigmoid(t) - y
        f = float(np.sum(np.logaddexp(0.0, t) - y * t))
        gw = Z.T @ r
        if penalty == "l2":
            f += 0.5 * float(w @ w) / C
            gw = gw + w / C
        if split:
            f += float(theta[:2 * m].sum()) / C
            grad = np.concatenate([gw + 1.0 / C, -gw + 1.0 / C, [r.sum()]])
        else:
            grad = np.concatenate([gw, [r.sum()]])
        return f, grad

    theta0 = np.zeros(2 * m + 1 if split else m + 1)
    theta0[-1] = float(np.log(y.mean() / (1 - y.mean())))
    bounds = [(0.0, None)] * (2 * m) + [(None, None)] if split else None
    trace = []

    def record(theta):
        w, b = unpack(theta)
        trace.append(_logistic_objective(Z, y, w, b, C, penalty))

    res = minimize(fun, theta0, jac=True, method="L-BFGS-B", bounds=bounds, callback=record,
                   options={"maxiter": int(max_iter), "gtol": tol * n, "ftol": 0.0, "maxcor": 20})
    w, b = unpack(res.x)
    w = np.asarray(w, dtype=np.float64).copy()
    converged = bool(res.success)
    scale = np.where(st.degenerate, 1.0, st.std)
    coef = np.where(st.degenerate, 0.0, w / scale)
    intercept = float(b - np.sum(np.where(st.degenerate, 0.0, w * st.mean / scale)))
    return LinearModel(intercept, coef, {"kind": penalty, "C": float(C)}, link="logit",
                       converged=converged, n_iter=int(res.nit), objective_trace=trace, kind="logistic")


# ---------------------------------------------------------------------------
# k nearest neighbours


@dataclass(eq=False)
class KnnIndex:
    Z: np.ndarray
    labels: np.ndarray
    k: int
    p: int
    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray

    kind = "knn"

    @property
    def n_features(self) -> int:
        return self.Z.shape[1]

    def _standardize(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if not np.all(np.isfinite(X)):
            raise ArgumentError("inputs must be finite")
        scale = np.where(self.degenerate, 1.0, self.std)
        return np.where(self.degenerate, 0.0, (X - self.mean) / scale)

    def neighbors(self, X) -> np.ndarray:
        """Indices of the k nearest stored rows; distance ties go to the lower index."""
        Q = self._standardize(X)
        diff = np.abs(Q[:, None, :] - self.Z[None, :, :])
        d = diff.sum(axis=2) if self.p == 1 else np.sqrt((diff * diff).sum(axis=2))
        return np.argsort(d, axis=1, kind="stable")[:, : self.k]

    def vote_fraction(self, X) -> np.ndarray:
        nb = self.neighbors(X)
        return self.labels[nb].mean(axis=1)

    def predict_proba(self, X) -> np.ndarray:
        return self.vote_fraction(X)

    def predict(self, X) -> np.ndarray:
        # vote ties resolve to class 0
        return (self.vote_fraction(X) > 0.5).astype(np.int64)

    def raw_output(self, X) -> np.ndarray:
        return self.vote_fraction(X)


def fit_knn(X, y, n_neighbors: int = 5, p: int = 2) -> KnnIndex:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p not in (1, 2):
        raise ArgumentError("Minkowski order p must be 1 or 2")
    if not 1 <= n_neighbors <= len(y):
        raise ArgumentError(f"k must be in [1, n={len(y)}], got {n_neighbors}")
    st = fit_standardizer(X)
    return KnnIndex(st.transform(X), y, int(n_neighbors), int(p), st.mean, st.std, st.degenerate)


def knn_predict(idx: KnnIndex, x) -> tuple[int, dict]:
    """Majority class for one point and the neighbour vote counts."""
    nb = idx.neighbors(x)[0]
    votes = idx.labels[nb]
    ones = int(votes.sum())
    return int(ones > len(votes) - ones), {0: len(votes) - ones, 1: ones}


# ---------------------------------------------------------------------------
# elastic net


def elastic_net_objective(X, y, coef, intercept, alpha, l1_ratio) -> float:
    """``|y - Xb - b0|^2 / (2n) + alpha*l1_ratio*|b|_1 + alpha*(1-l1_ratio)/2*|b|^2``."""
    r = y - X @ coef - intercept
    return float(r @ r / (2 * len(y)) + alpha * l1_ratio * np.abs(coef).sum()
                 + 0.5 * alpha * (1 - l1_ratio) * coef @ coef)


def fit_elastic_net(X, y, alpha: float = 1.0, l1_ratio: float = 0.5, max_iter: int = 10000,
                    tol: float = 1e-10, kind: str = "elasticnet") -> LinearModel:
    """Cyclic coordinate descent with soft-thresholding on standardized columns.

    The penalty applies to the standardized coefficients; the returned model
    is mapped back to raw feature units. ``objective_trace`` holds the
    standardized objective after every sweep.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if alpha < 0:
        raise ArgumentError("alpha must be non-negative")
    if not 0 <= l1_ratio <= 1:
        raise ArgumentError("l1_ratio must lie in [0, 1]")
    n, m = X.shape
    if n < 2:
        raise ArgumentError("elastic net needs at least two rows")
    st = fit_standardizer(X)
    Z = st.transform(X)
    ym = y.mean()
    yc = y - ym
    col_sq = (Z * Z).sum(axis=0) / n
    w = np.zeros(m)
    resid = yc.copy()
    l1 = alpha * l1_ratio
    l2 = alpha * (1 - l1_ratio)
    trace = [elastic_net_objective(Z, yc, w, 0.0, alpha, l1_ratio)]
    converged = False
    sweep = 0
    for sweep in range(1, max_iter + 1):
        max_delta = 0.0
        for j in range(m):
            if col_sq[j] == 0:
                continue
            old = w[j]
            rho = Z[:, j] @ resid / n + col_sq[j] * old
            new = _soft_threshold(rho, l1) / (col_sq[j] + l2)
            if new != old:
                resid -= Z[:, j] * (new - old)
                w[j] = new
                max_delta = max(max_delta, abs(new - old))
        trace.append(elastic_net_objective(Z, yc, w, 0.0, alpha, l1_ratio))
        if max_delta <= tol * max(1.0, np.abs(w).max()):
            converged = True
            break
    scale = np.where(st.degenerate, 1.0, st.std)
    coef = np.where(st.degenerate, 0.0, w / scale)
    intercept = float(ym - coef @ st.mean)
    pen = {"kind": "elastic", "alpha": float(alpha), "l1_ratio": float(l1_ratio)}
    if l1_ratio == 1:
        pen = {"kind": "l1", "alpha": float(alpha)}
    return LinearModel(intercept, coef, pen, converged=converged, n_iter=sweep, objective_trace=trace, kind=kind)


def fit_lasso(X, y, alpha: float = 1.0, **kw) -> LinearModel:
    return fit_elastic_net(X, y, alpha, 1.0, kind="lasso", **kw)


# ---------------------------------------------------------------------------
# gini tree


def fit_gini_tree_classifier(X, y, *, max_depth: int | None = 14, min_samples_split: int = 8,
                             min_samples_leaf: int = 1) -> SingleTreeModel:
    """Single gini CART classifier; defaults are the tuned decision-tree values."""
    y = _check_binary(y)
    X = np.asarray(X, dtype=np.float64)
    tree = fit_gini_tree(X, y, max_depth=max_depth, min_samples_split=min_samples_split,
                         min_samples_leaf=min_samples_leaf)
    return SingleTreeModel(tree, X.shape[1], {"max_depth": max_depth, "min_samples_split": min_samples_split})


def logistic_log_loss(model: LinearModel, X, y) -> float:
    return binary_cross_entropy(y, model.predict_proba(X))
