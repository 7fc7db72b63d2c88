"""Binary decision trees shared by every tree learner.

Split finding is exact and greedy over the sorted distinct values of each
feature; thresholds are midpoints, rows with ``x[f] <= threshold`` go left.
Among equal-gain candidates the lowest feature index wins, then the lowest
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import ArgumentError, DegenerateError

IMPORTANCE_KINDS = ("gain", "cover", "frequency")


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Flat node-array tree.

    Node ``i`` is a leaf when ``feature[i] == -1``. Children always carry
    larger indices than their parent. ``gain`` is zero at leaves.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    gain: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        arrays = {
            "feature": np.ascontiguousarray(self.feature, dtype=np.int64),
            "threshold": np.ascontiguousarray(self.threshold, dtype=np.float64),
            "left": np.ascontiguousarray(self.left, dtype=np.int64),
            "right": np.ascontiguousarray(self.right, dtype=np.int64),
            "value": np.ascontiguousarray(self.value, dtype=np.float64),
            "cover": np.ascontiguousarray(self.cover, dtype=np.float64),
            "gain": np.ascontiguousarray(self.gain, dtype=np.float64),
        }
        n = len(arrays["feature"])
        if n == 0:
            raise ArgumentError("a tree needs at least one node")
        for name, arr in arrays.items():
            if arr.shape != (n,):
                raise ArgumentError(f"node array {name!r} has shape {arr.shape}, expected ({n},)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        internal = arrays["feature"] >= 0
        idx = np.flatnonzero(internal)
        lc = arrays["left"][idx]
        rc = arrays["right"][idx]
        if (lc <= idx).any() or (rc <= idx).any() or (lc >= n).any() or (rc >= n).any():
            raise ArgumentError("child indices must point forward inside the node array")
        if (arrays["left"][~internal] != -1).any() or (arrays["right"][~internal] != -1).any():
            raise ArgumentError("leaves must not have children")
        parents = np.bincount(np.concatenate([lc, rc]), minlength=n)
        if parents[0] != 0 or (parents[1:] != 1).any():
            raise ArgumentError("every non-root node must have exactly one parent")

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def n_splits(self) -> int:
        return int(np.sum(self.feature >= 0))

    def node_depths(self) -> np.ndarray:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in np.flatnonzero(self.feature >= 0):
            depth[self.left[i]] = depth[i] + 1
            depth[self.right[i]] = depth[i] + 1
        return depth

    @property
    def depth(self) -> int:
        return int(self.node_depths().max())

    def predict(self, X) -> np.ndarray:
        X = _check_matrix(X)
        idx = _kernels.apply_tree(X, self.feature, self.threshold, self.left, self.right)
        return self.value[idx]

    def apply(self, X) -> np.ndarray:
        X = _check_matrix(X)
        return _kernels.apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def expected_value(self) -> float:
        packed = pack_trees([self])
        return float(_kernels.expected_value_packed(
            packed.feature, packed.left, packed.right, packed.value, packed.cover,
            packed.offsets, np.ones(1)))

    def scaled(self, s: float) -> "DecisionTree":
        """Copy with every node value multiplied by ``s``."""
        return DecisionTree(self.feature, self.threshold, self.left, self.right,
                            self.value * s, self.cover, self.gain, dict(self.params))

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                nodes.append({
                    "id": i,
                    "feature": int(self.feature[i]),
                    "threshold": float(self.threshold[i]),
                    "left": int(self.left[i]),
                    "right": int(self.right[i]),
                    "cover": float(self.cover[i]),
                    "gain": float(self.gain[i]),
                    "value": float(self.value[i]),
                })
            else:
                nodes.append({"id": i, "value": float(self.value[i]), "cover": float(self.cover[i])})
        return {"params": dict(self.params), "nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        nodes = sorted(d["nodes"], key=lambda nd: nd["id"])
        if [nd["id"] for nd in nodes] != list(range(len(nodes))):
            raise ArgumentError("node ids must be contiguous from 0")
        n = len(nodes)
        feature = np.full(n, -1)
        threshold = np.zeros(n)
        left = np.full(n, -1)
        right = np.full(n, -1)
        value = np.zeros(n)
        cover = np.zeros(n)
        gain = np.zeros(n)
        for i, nd in enumerate(nodes):
            value[i] = nd.get("value", 0.0)
            cover[i] = nd["cover"]
            if "feature" in nd:
                feature[i] = nd["feature"]
                threshold[i] = nd["threshold"]
                left[i] = nd["left"]
                right[i] = nd["right"]
                gain[i] = nd.get("gain", 0.0)
        return cls(feature, threshold, left, right, value, cover, gain, dict(d.get("params", {})))


@dataclass(frozen=True)
class PackedTrees:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    offsets: np.ndarray
    max_depth: int


def pack_trees(trees: Sequence[DecisionTree]) -> PackedTrees:
    if len(trees) == 0:
        raise DegenerateError("no trees to pack")
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([t.n_nodes for t in trees])
    return PackedTrees(
        feature=np.concatenate([t.feature for t in trees]),
        threshold=np.concatenate([t.threshold for t in trees]),
        left=np.concatenate([t.left for t in trees]),
        right=np.concatenate([t.right for t in trees]),
        value=np.concatenate([t.value for t in trees]),
        cover=np.concatenate([t.cover for t in trees]),
        offsets=offsets,
        max_depth=max(t.depth for t in trees),
    )


def predict_trees(trees: Sequence[DecisionTree], X, weights, base: float = 0.0) -> np.ndarray:
    """``base + sum_t weights[t] * tree_t(X)`` for every row of ``X``."""
    X = _check_matrix(X)
    packed = pack_trees(trees)
    out = np.full(X.shape[0], float(base))
    _kernels.predict_packed(X, packed.feature, packed.threshold, packed.left, packed.right,
                            packed.value, packed.offsets, np.asarray(weights, dtype=np.float64), out)
    return out


def _check_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ArgumentError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ArgumentError("inputs must be finite")
    return np.ascontiguousarray(X)


def _presort(X: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def _depth_limit(max_depth) -> int:
    if max_depth is None:
        return np.iinfo(np.int64).max
    if max_depth < 0:
        raise ArgumentError("max_depth must be non-negative")
    return int(max_depth)


def _feature_keys(rng, n_rows: int, m: int, max_features: int | None) -> tuple[int, np.ndarray]:
    if max_features is None or max_features >= m:
        return m, np.zeros((1, m))
    if max_features < 1:
        raise ArgumentError("max_features must be at least 1")
    if rng is None:
        raise ArgumentError("feature subsampling needs an rng")
    return int(max_features), rng.random((2 * n_rows + 1, m))


def fit_boosted_tree(X, g, h, *, max_depth: int = 3, min_child_weight: float = 1.0,
                     reg_lambda: float = 1.0, gamma: float = 0.0, presorted=None) -> DecisionTree:
    """Fit one Newton-boosting tree to per-row gradients ``g`` and hessians ``h``.

    Leaf weight is ``-G / (H + reg_lambda)``; a split is kept only when
    ``0.5 * (G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)) - gamma`` is positive.
    Node cover is the hessian sum.
    """
    X = _check_matrix(X)
    g = np.ascontiguousarray(g, dtype=np.float64)
    h = np.ascontiguousarray(h, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ArgumentError("cannot fit a tree on zero rows")
    if g.shape != (n,) or h.shape != (n,):
        raise ArgumentError("g and h must have one entry per row")
    if np.any(h < 0):
        raise ArgumentError("hessians must be non-negative")
    if reg_lambda < 0 or gamma < 0 or min_child_weight < 0:
        raise ArgumentError("reg_lambda, gamma and min_child_weight must be non-negative")
    order = _presort(X) if presorted is None else presorted.copy()
    arrays = _kernels.grow_tree(X, g, h, order, _depth_limit(max_depth), 0.0, float(min_child_weight),
                                float(reg_lambda), float(gamma), _kernels.MODE_NEWTON,
                                X.shape[1], np.zeros((1, X.shape[1])), False)
    params = {"max_depth": max_depth, "min_child_weight": min_child_weight,
              "reg_lambda": reg_lambda, "gamma": gamma}
    return DecisionTree(*arrays, params=params)


def _fit_cart(X, y, mode, *, max_depth, min_samples_split, min_samples_leaf, sample_weight,
              max_features, rng) -> DecisionTree:
    X = _check_matrix(X)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ArgumentError("cannot fit a tree on zero rows")
    if y.shape != (n,):
        raise ArgumentError("y must have one entry per row")
    if not np.all(np.isfinite(y)):
        raise ArgumentError("targets must be finite")
    if sample_weight is None:
        w = np.ones(n)
    else:
        w = np.ascontiguousarray(sample_weight, dtype=np.float64)
        if w.shape != (n,) or np.any(w <= 0):
            raise ArgumentError("sample weights must be positive, one per row")
    if min_samples_split < 2:
        raise ArgumentError("min_samples_split must be at least 2")
    if min_samples_leaf < 1:
        raise ArgumentError("min_samples_leaf must be at least 1")
    k, keys = _feature_keys(rng, n, X.shape[1], max_features)
    arrays = _kernels.grow_tree(X, w * y, w, _presort(X), _depth_limit(max_depth),
                                float(min_samples_split), float(min_samples_leaf), 0.0, 0.0,
                                mode, k, keys, True)
    params = {"max_depth": max_depth, "min_samples_split": min_samples_split,
              "min_samples_leaf": min_samples_leaf, "max_features": max_features}
    return DecisionTree(*arrays, params=params)


def fit_cart_regression(X, y, *, max_depth: int | None = None, min_samples_split: int = 2,
                        min_samples_leaf: int = 1, sample_weight=None, max_features: int | None = None,
                        rng: np.random.Generator | None = None) -> DecisionTree:
    """Variance-reduction regression tree; leaves hold the (weighted) mean target."""
    return _fit_cart(X, y, _kernels.MODE_MEAN, max_depth=max_depth, min_samples_split=min_samples_split,
                     min_samples_leaf=min_samples_leaf, sample_weight=sample_weight,
                     max_features=max_features, rng=rng)


def fit_gini_tree(X, y, *, max_depth: int | None = None, min_samples_split: int = 2,
                  min_samples_leaf: int = 1, sample_weight=None, max_features: int | None = None,
                  rng: np.random.Generator | None = None) -> DecisionTree:
    """Binary gini CART; leaves hold the majority class as 0.0/1.0 (ties to 0)."""
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise ArgumentError("gini trees need labels in {0, 1}")
    return _fit_cart(X, y, _kernels.MODE_MAJORITY, max_depth=max_depth,
                     min_samples_split=min_samples_split, min_samples_leaf=min_samples_leaf,
                     sample_weight=sample_weight, max_features=max_features, rng=rng)


def predict_tree(tree: DecisionTree, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ArgumentError("predict_tree takes a single feature vector")
    return float(tree.predict(x[None, :])[0])


def decision_path(tree: DecisionTree, x) -> list[int]:
    """Node ids from the root to the leaf that predicts ``x``."""
    x = _check_matrix(x)[0]
    node = 0
    path = [0]
    while tree.feature[node] >= 0:
        node = int(tree.left[node] if x[tree.feature[node]] <= tree.threshold[node] else tree.right[node])
        path.append(node)
    return path


def feature_importance(trees: Sequence[DecisionTree], n_features: int, kind: str = "gain") -> np.ndarray:
    """Normalized per-feature importance accumulated across ``trees``."""
    if kind not in IMPORTANCE_KINDS:
        raise ArgumentError(f"importance kind must be one of {IMPORTANCE_KINDS}, got {kind!r}")
    if len(trees) == 0:
        raise ArgumentError("need at least one tree")
    total = np.zeros(n_features)
    for t in trees:
        split = t.feature >= 0
        if kind == "gain":
            w = t.gain[split]
        elif kind == "cover":
            w = t.cover[split]
        else:
            w = np.ones(int(split.sum()))
        np.add.at(total, t.feature[split], w)
    s = total.sum()
    if not s > 0:
        raise DegenerateError("no splits in any tree; importance is undefined")
    return total / s
