"""Explanations: path-dependent TreeSHAP, brute-force Shapley oracles, LIME and PDP.

Classifier explanations target the additive raw output (the log-odds margin
for boosting, the vote share for forests), never the sigmoid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .baselines import fit_weighted_least_squares
from .data import FEATURES, fit_standardizer
from .errors import ArgumentError, DegenerateError, SizeError
from .tree import _check_matrix, pack_trees

LOCAL_ACCURACY_TOL = 1e-9
DEFAULT_KERNEL_WIDTH = 0.75 * math.sqrt(5.0)
DEFAULT_LIME_SAMPLES = 2000
MAX_BRUTE_FORCE_FEATURES = 12


@dataclass
class Attribution:
    base_value: float
    phi: np.ndarray
    prediction: float
    model_id: str = ""
    feature_names: Sequence[str] = FEATURES

    def local_accuracy_gap(self) -> float:
        return abs(self.base_value + float(np.sum(self.phi)) - self.prediction)

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "base_value": float(self.base_value),
            "prediction": float(self.prediction),
            "phi": {name: float(v) for name, v in zip(self.feature_names, self.phi)},
        }


@dataclass
class LimeExplanation:
    intercept: float
    coefficients: np.ndarray
    kernel_width: float
    n_samples: int
    seed: int
    local_fit_r2: float
    prediction: float = float("nan")
    feature_names: Sequence[str] = FEATURES

    def to_json(self) -> dict:
        return {
            "intercept": float(self.intercept),
            "coefficients": {n: float(c) for n, c in zip(self.feature_names, self.coefficients)},
            "kernel_width": float(self.kernel_width),
            "n_samples": int(self.n_samples),
            "seed": int(self.seed),
            "local_fit_r2": float(self.local_fit_r2),
            "prediction": float(self.prediction),
        }


@dataclass
class PdpCurve:
    feature: int
    grid: np.ndarray
    values: np.ndarray
    n_background: int
    feature_name: str = ""

    def to_json(self) -> dict:
        return {
            "feature": self.feature_name or FEATURES[self.feature],
            "feature_index": int(self.feature),
            "grid": [float(g) for g in self.grid],
            "values": [float(v) for v in self.values],
            "n_background": int(self.n_background),
        }


# ---------------------------------------------------------------------------
# TreeSHAP


def _tree_parts(model):
    trees = list(model.trees)
    if not trees:
        raise DegenerateError("model has no trees to explain")
    return trees, np.asarray(model.tree_weights, dtype=np.float64), float(model.base_offset)


def tree_shap_values(model, X) -> tuple[float, np.ndarray, np.ndarray]:
    """Base value, per-row attributions and raw predictions for a tree model."""
    trees, weights, base = _tree_parts(model)
    X = _check_matrix(X)
    pk = pack_trees(trees)
    phi = _kernels.tree_shap_packed(X, pk.feature, pk.threshold, pk.left, pk.right, pk.value, pk.cover,
                                    pk.offsets, weights, pk.max_depth)
    ev = base + _kernels.expected_value_packed(pk.feature, pk.left, pk.right, pk.value, pk.cover,
                                               pk.offsets, weights)
    return float(ev), phi, model.raw_output(X)


def tree_shap(model, x, model_id: str = "") -> Attribution:
    x = np.asarray(x, dtype=np.float64)
    base, phi, pred = tree_shap_values(model, x[None, :] if x.ndim == 1 else x)
    return Attribution(base, phi[0], float(pred[0]), model_id or getattr(model, "kind", ""),
                       _names(phi.shape[1]))


def _names(m):
    return FEATURES if m == len(FEATURES) else tuple(f"x{j}" for j in range(m))


# ---------------------------------------------------------------------------
# brute-force oracles


def _shapley_from_values(v: np.ndarray, M: int) -> np.ndarray:
    """Exact Shapley values from a coalition value table indexed by bitmask."""
    fact = [math.factorial(k) for k in range(M + 1)]
    weight = [fact[s] * fact[M - s - 1] / fact[M] for s in range(M)]
    phi = np.zeros(M)
    for i in range(M):
        bit = 1 << i
        acc = 0.0
        for mask in range(1 << M):
            if mask & bit:
                continue
            acc += weight[bin(mask).count("1")] * (v[mask | bit] - v[mask])
        phi[i] = acc
    return phi


def brute_force_shapley(predict: Callable, x, background, model_id: str = "") -> Attribution:
    """Interventional Shapley values by enumerating all 2^M coalitions.

    ``v(S)`` is the mean prediction over background rows with the features in
    ``S`` replaced by the values of ``x``.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    B = np.asarray(background, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] == 0:
        raise ArgumentError("background must be a non-empty row matrix")
    M = len(x)
    if M > MAX_BRUTE_FORCE_FEATURES:
        raise SizeError(f"brute-force Shapley is limited to {MAX_BRUTE_FORCE_FEATURES} features, got {M}")
    nb = B.shape[0]
    stacked = np.repeat(B[None, :, :], 1 << M, axis=0)
    for mask in range(1 << M):
        cols = [j for j in range(M) if mask >> j & 1]
        stacked[mask][:, cols] = x[cols]
    preds = np.asarray(predict(stacked.reshape(-1, M)), dtype=np.float64).reshape(1 << M, nb)
    v = preds.mean(axis=1)
    phi = _shapley_from_values(v, M)
    pred = float(np.asarray(predict(x[None, :]), dtype=np.float64)[0])
    return Attribution(float(v[0]), phi, pred, model_id, _names(M))


def _conditional_expectation(tree, x, in_coalition) -> float:
    """E[tree(X) | X_S = x_S] with cover ratios standing in for the unknown conditionals."""

    def rec(node):
        f = tree.feature[node]
        if f < 0:
            return float(tree.value[node])
        l, r = tree.left[node], tree.right[node]
        if in_coalition[f]:
            return rec(l if x[f] <= tree.threshold[node] else r)
        return (tree.cover[l] * rec(l) + tree.cover[r] * rec(r)) / tree.cover[node]

    return rec(0)


def brute_force_tree_shapley(model, x, model_id: str = "") -> Attribution:
    """Shapley values of the path-dependent tree game by full coalition enumeration.

    This is the definitional counterpart of :func:`tree_shap`: same value
    function, exponential instead of polynomial algorithm.
    """
    trees, weights, base = _tree_parts(model)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    M = len(x)
    if M > MAX_BRUTE_FORCE_FEATURES:
        raise SizeError(f"brute-force Shapley is limited to {MAX_BRUTE_FORCE_FEATURES} features, got {M}")
    v = np.zeros(1 << M)
    for mask in range(1 << M):
        member = [bool(mask >> j & 1) for j in range(M)]
        v[mask] = base + sum(w * _conditional_expectation(t, x, member) for t, w in zip(trees, weights))
    phi = _shapley_from_values(v, M)
    return Attribution(float(v[0]), phi, float(v[-1]), model_id or getattr(model, "kind", ""), _names(M))


# ---------------------------------------------------------------------------
# summaries


def shap_summary(phi: np.ndarray, feature_names: Sequence[str] = FEATURES) -> list[tuple[str, float]]:
    """Features ranked by mean |phi|, descending; ties keep feature order."""
    phi = np.atleast_2d(np.asarray(phi, dtype=np.float64))
    if phi.shape[0] == 0:
        raise ArgumentError("need at least one attribution row")
    means = np.abs(phi).mean(axis=0)
    order = sorted(range(phi.shape[1]), key=lambda j: (-means[j], j))
    return [(feature_names[j], float(means[j])) for j in order]


def model_shap_summary(model, X) -> list[tuple[str, float]]:
    _, phi, _ = tree_shap_values(model, X)
    return shap_summary(phi, _names(phi.shape[1]))


# ---------------------------------------------------------------------------
# LIME


def lime_explain(predict: Callable, x, background, *, n_samples: int = DEFAULT_LIME_SAMPLES,
                 kernel_width: float = DEFAULT_KERNEL_WIDTH, ridge_alpha: float = 1e-3,
                 seed: int = 0) -> LimeExplanation:
    """Local weighted-ridge surrogate around ``x``.

    Each perturbation keeps a feature of ``x`` when its mask bit is 1 and
    otherwise draws that feature from the background's empirical column.
    Points are weighted by ``exp(-d^2 / kernel_width^2)`` with ``d`` the
    Euclidean distance to ``x`` in background-standardized units; the
    surrogate is fitted in raw feature units.
    """
    if not kernel_width > 0:
        raise ArgumentError("kernel_width must be positive")
    if n_samples < 50:
        raise ArgumentError("LIME needs at least 50 perturbation samples")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    B = np.asarray(background, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] < 2:
        raise ArgumentError("LIME background needs at least two rows")
    n, m = n_samples, len(x)
    rng = np.random.default_rng(seed)
    masks = rng.integers(0, 2, size=(n, m)).astype(bool)
    draws = rng.integers(0, B.shape[0], size=(n, m))
    Xp = np.where(masks, x[None, :], B[draws, np.arange(m)[None, :]])
    st = fit_standardizer(B)
    D = st.transform(Xp) - st.transform(x[None, :])
    d2 = (D * D).sum(axis=1)
    w = np.exp(-d2 / kernel_width ** 2)
    y = np.asarray(predict(Xp), dtype=np.float64)
    lm = fit_weighted_least_squares(Xp, y, w, ridge_alpha)
    fitted = lm.decision_function(Xp)
    yw = w @ y / w.sum()
    tss = float(w @ (y - yw) ** 2)
    rss = float(w @ (y - fitted) ** 2)
    r2 = 1.0 if tss == 0 and rss <= 1e-24 else (1.0 - rss / tss if tss > 0 else 0.0)
    pred = float(np.asarray(predict(x[None, :]), dtype=np.float64)[0])
    return LimeExplanation(lm.intercept, lm.coefficients, float(kernel_width), n, int(seed), r2, pred,
                           _names(m))


# ---------------------------------------------------------------------------
# partial dependence


def pdp_grid(background, feature: int, count: int = 20, percentiles=(1.0, 99.0)) -> np.ndarray:
    col = np.asarray(background, dtype=np.float64)[:, feature]
    lo, hi = np.percentile(col, percentiles)
    if not hi > lo:
        raise DegenerateError(f"feature {feature} has no spread between the {percentiles} percentiles")
    return np.linspace(lo, hi, count)


def level_grid(background, feature: int) -> np.ndarray:
    levels = np.unique(np.asarray(background, dtype=np.float64)[:, feature])
    if len(levels) < 2:
        raise DegenerateError(f"feature {feature} has fewer than two levels; partial dependence is undefined")
    return levels


def pdp(predict: Callable, background, feature: int, grid=20) -> PdpCurve:
    """Mean prediction over background rows with ``feature`` pinned to each grid value.

    ``grid`` is a point count (equally spaced between the 1st and 99th
    percentiles) or an explicit strictly ascending array.
    """
    B = np.asarray(background, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] == 0:
        raise ArgumentError("PDP background must be a non-empty row matrix")
    if not 0 <= feature < B.shape[1]:
        raise ArgumentError(f"feature index {feature} out of range")
    if isinstance(grid, (int, np.integer)):
        if grid < 1:
            raise ArgumentError("grid needs at least one point")
        g = pdp_grid(B, feature, int(grid))
    else:
        g = np.asarray(grid, dtype=np.float64).reshape(-1)
        if g.size == 0:
            raise ArgumentError("grid is empty")
        if np.any(np.diff(g) <= 0) or not np.all(np.isfinite(g)):
            raise ArgumentError("grid must be finite and strictly ascending")
    nb = B.shape[0]
    stacked = np.repeat(B[None, :, :], len(g), axis=0)
    stacked[:, :, feature] = g[:, None]
    preds = np.asarray(predict(stacked.reshape(-1, B.shape[1])), dtype=np.float64).reshape(len(g), nb)
    values = preds.mean(axis=1)
    name = FEATURES[feature] if B.shape[1] == len(FEATURES) else f"x{feature}"
    return PdpCurve(int(feature), g, values, nb, name)
