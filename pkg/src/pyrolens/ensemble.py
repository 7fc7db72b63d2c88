"""Second-order gradient boosting and random forests on :mod:`pyrolens.tree`."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DegenerateError
from .metrics import binary_cross_entropy
from .tree import (DecisionTree, _check_matrix, _presort, fit_boosted_tree, fit_cart_regression,
                   fit_gini_tree, predict_trees)

GBDT_DEFAULTS = {"learning_rate": 0.1140, "max_depth": 3, "n_estimators": 140}
FOREST_DEFAULTS = {"max_depth": 18, "min_samples_split": 3, "n_estimators": 64}

# nextafter bounds keep probabilities strictly inside (0, 1)
_P_LO = np.nextafter(0.0, 1.0)
_P_HI = np.nextafter(1.0, 0.0)


def sigmoid(m):
    m = np.asarray(m, dtype=np.float64)
    p = np.exp(-np.logaddexp(0.0, -m))
    return np.clip(p, _P_LO, _P_HI)


class TreeModel:
    """Mixin for models whose output is ``base + sum_t weight_t * tree_t(x)``."""

    trees: list
    n_features: int

    @property
    def tree_weights(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def base_offset(self) -> float:
        return 0.0

    def raw_output(self, X) -> np.ndarray:
        """The additive tree output that TreeSHAP explains."""
        X = _check_matrix(X)
        if X.shape[1] != self.n_features:
            raise ArgumentError(f"expected {self.n_features} features, got {X.shape[1]}")
        if not self.trees:
            return np.full(X.shape[0], self.base_offset)
        return predict_trees(self.trees, X, self.tree_weights, self.base_offset)


def _check_binary(y):
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise ArgumentError("labels must be 0/1")
    if y.min() == y.max():
        raise DegenerateError("both classes must be present in the training labels")
    return y


@dataclass(eq=False)
class GbdtClassifier(TreeModel):
    base_score: float
    trees: list
    learning_rate: float
    n_estimators: int
    max_depth: int
    n_features: int = 5
    params: dict = field(default_factory=dict)
    loss_trace: list = field(default_factory=list, repr=False)

    kind = "gbdt"

    @property
    def tree_weights(self):
        return np.full(len(self.trees), self.learning_rate)

    @property
    def base_offset(self):
        return self.base_score

    def margin(self, X) -> np.ndarray:
        return self.raw_output(X)

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.margin(X))

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def truncated(self, k: int) -> "GbdtClassifier":
        return GbdtClassifier(self.base_score, self.trees[:k], self.learning_rate, k, self.max_depth,
                              self.n_features, dict(self.params))


def fit_gbdt_classifier(X, y, *, n_estimators: int = 140, learning_rate: float = 0.1140, max_depth: int = 3,
                        min_child_weight: float = 1.0, reg_lambda: float = 1.0, gamma: float = 0.0,
                        seed: int = 0, track_loss: bool = False) -> GbdtClassifier:
    """Newton boosting on the binary log loss, starting from the training log-odds.

    Each round fits a tree to ``g = p - y`` and ``h = p (1 - p)``. ``seed`` is
    accepted for interface symmetry; the fit uses no randomness.
    """
    X = _check_matrix(X)
    y = _check_binary(y)
    if len(y) != X.shape[0]:
        raise ArgumentError("X and y row counts differ")
    if n_estimators < 0 or not 0 < learning_rate <= 1:
        raise ArgumentError("need n_estimators >= 0 and learning_rate in (0, 1]")
    pos = y.sum()
    base = math.log(pos / (len(y) - pos))
    order = _presort(X)
    margin = np.full(len(y), base)
    trees = []
    trace = []
    for _ in range(int(n_estimators)):
        p = sigmoid(margin)
        g = p - y
        h = p * (1 - p)
        t = fit_boosted_tree(X, g, h, max_depth=max_depth, min_child_weight=min_child_weight,
                             reg_lambda=reg_lambda, gamma=gamma, presorted=order)
        trees.append(t)
        margin = margin + learning_rate * t.predict(X)
        if track_loss:
            trace.append(binary_cross_entropy(y, sigmoid(margin)))
    params = {"n_estimators": int(n_estimators), "learning_rate": float(learning_rate),
              "max_depth": int(max_depth), "min_child_weight": float(min_child_weight),
              "reg_lambda": float(reg_lambda), "gamma": float(gamma)}
    return GbdtClassifier(base, trees, float(learning_rate), int(n_estimators), int(max_depth),
                          X.shape[1], params, trace)


def predict_proba(model: GbdtClassifier, x) -> np.ndarray:
    return model.predict_proba(x)


@dataclass(eq=False)
class GbdtRegressor(TreeModel):
    base_score: float
    trees: list
    learning_rate: float
    n_estimators: int
    max_depth: int
    n_features: int = 5
    params: dict = field(default_factory=dict)

    kind = "gbdt-reg"

    @property
    def tree_weights(self):
        return np.full(len(self.trees), self.learning_rate)

    @property
    def base_offset(self):
        return self.base_score

    def predict(self, X) -> np.ndarray:
        return self.raw_output(X)


def fit_gbdt_regressor(X, y, *, n_estimators: int = 140, learning_rate: float = 0.1140, max_depth: int = 3,
                       min_child_weight: float = 1.0, reg_lambda: float = 1.0, gamma: float = 0.0,
                       seed: int = 0) -> GbdtRegressor:
    """Newton boosting on squared error (``g = f - y``, ``h = 1``) from the target mean."""
    X = _check_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    if len(y) != X.shape[0] or len(y) == 0:
        raise ArgumentError("X and y row counts differ or are empty")
    if n_estimators < 0 or not 0 < learning_rate <= 1:
        raise ArgumentError("need n_estimators >= 0 and learning_rate in (0, 1]")
    base = float(np.mean(y))
    order = _presort(X)
    pred = np.full(len(y), base)
    h = np.ones(len(y))
    trees = []
    for _ in range(int(n_estimators)):
        t = fit_boosted_tree(X, pred - y, h, max_depth=max_depth, min_child_weight=min_child_weight,
                             reg_lambda=reg_lambda, gamma=gamma, presorted=order)
        trees.append(t)
        pred = pred + learning_rate * t.predict(X)
    params = {"n_estimators": int(n_estimators), "learning_rate": float(learning_rate),
              "max_depth": int(max_depth), "min_child_weight": float(min_child_weight),
              "reg_lambda": float(reg_lambda), "gamma": float(gamma)}
    return GbdtRegressor(base, trees, float(learning_rate), int(n_estimators), int(max_depth), X.shape[1], params)


@dataclass(eq=False)
class ForestRegressor(TreeModel):
    trees: list
    n_estimators: int
    max_depth: int | None
    min_samples_split: int
    max_features: int
    seed: int
    bootstrap: bool = True
    n_features: int = 5
    params: dict = field(default_factory=dict)

    kind = "forest-reg"

    @property
    def tree_weights(self):
        return np.full(len(self.trees), 1.0 / len(self.trees))

    def predict(self, X) -> np.ndarray:
        return self.raw_output(X)

    def member_predictions(self, X) -> np.ndarray:
        X = _check_matrix(X)
        return np.stack([t.predict(X) for t in self.trees])


@dataclass(eq=False)
class ForestClassifier(ForestRegressor):
    kind = "forest-clf"

    def vote_fraction(self, X) -> np.ndarray:
        """Share of trees voting for class 1."""
        return self.raw_output(X)

    def predict_proba(self, X) -> np.ndarray:
        return self.vote_fraction(X)

    def predict(self, X) -> np.ndarray:
        # vote ties resolve to class 0 (safe)
        return (self.vote_fraction(X) > 0.5).astype(np.int64)


def _fit_forest(cls, fit_member, X, y, n_estimators, max_depth, min_samples_split, max_features, seed,
                bootstrap, min_samples_leaf):
    X = _check_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    n, m = X.shape
    if len(y) != n:
        raise ArgumentError("X and y row counts differ")
    if n < 2:
        raise ArgumentError("a forest needs at least two training rows")
    if not 1 <= max_features <= m:
        raise ArgumentError(f"max_features must be in [1, {m}], got {max_features}")
    if n_estimators < 1:
        raise ArgumentError("n_estimators must be at least 1")
    trees = []
    for k in range(int(n_estimators)):
        rng = np.random.default_rng([seed, k])
        if bootstrap:
            counts = np.bincount(rng.integers(0, n, n), minlength=n)
            rows = np.flatnonzero(counts)
            w = counts[rows].astype(np.float64)
        else:
            rows = np.arange(n)
            w = None
        trees.append(fit_member(X[rows], y[rows], max_depth=max_depth, min_samples_split=min_samples_split,
                                min_samples_leaf=min_samples_leaf, sample_weight=w,
                                max_features=max_features, rng=rng))
    params = {"n_estimators": int(n_estimators), "max_depth": max_depth,
              "min_samples_split": int(min_samples_split), "max_features": int(max_features),
              "bootstrap": bool(bootstrap), "min_samples_leaf": int(min_samples_leaf)}
    return cls(trees, int(n_estimators), max_depth, int(min_samples_split), int(max_features), int(seed),
               bool(bootstrap), m, params)


def fit_random_forest(X, y, *, n_estimators: int = 64, max_depth: int | None = 18, min_samples_split: int = 3,
                      max_features: int | None = None, seed: int = 0, bootstrap: bool = True,
                      min_samples_leaf: int = 1) -> ForestRegressor:
    """Bagged variance-reduction trees; tree ``k`` draws from ``default_rng([seed, k])``."""
    m = np.asarray(X).shape[1]
    return _fit_forest(ForestRegressor, fit_cart_regression, X, y, n_estimators, max_depth, min_samples_split,
                       m if max_features is None else max_features, seed, bootstrap, min_samples_leaf)


def fit_forest_classifier(X, y, *, n_estimators: int = 64, max_depth: int | None = 18,
                          min_samples_split: int = 3, max_features: int | None = None, seed: int = 0,
                          bootstrap: bool = True, min_samples_leaf: int = 1) -> ForestClassifier:
    """Bagged gini trees with majority-class leaves; prediction is the majority vote."""
    y = _check_binary(y)
    m = np.asarray(X).shape[1]
    return _fit_forest(ForestClassifier, fit_gini_tree, X, y, n_estimators, max_depth, min_samples_split,
                       math.ceil(math.sqrt(m)) if max_features is None else max_features, seed, bootstrap,
                       min_samples_leaf)


def predict_forest(model: ForestRegressor, x) -> np.ndarray:
    return model.predict(x)


def predict_vote(model: ForestClassifier, x) -> tuple[np.ndarray, np.ndarray]:
    """Majority class and the fraction of trees voting for class 1."""
    frac = model.vote_fraction(x)
    return (frac > 0.5).astype(np.int64), frac


@dataclass(eq=False)
class SingleTreeModel(TreeModel):
    """A lone CART tree exposed through the ensemble interface (gini classifier baseline)."""

    tree: DecisionTree
    n_features: int = 5
    params: dict = field(default_factory=dict)

    kind = "dtree"

    @property
    def trees(self):
        return [self.tree]

    @property
    def tree_weights(self):
        return np.ones(1)

    def predict_proba(self, X):
        return self.raw_output(X)

    def predict(self, X):
        return (self.raw_output(X) > 0.5).astype(np.int64)
