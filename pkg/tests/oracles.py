"""Independent reference implementations used only by the tests.

Everything here is written for clarity over speed: direct enumeration, masks
instead of running sums, and plain recursion. None of it imports the code
under test beyond the DecisionTree container.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np

from pyrolens.tree import DecisionTree


def candidate_thresholds(col: np.ndarray) -> list[float]:
    u = np.unique(col)
    out = []
    for a, b in zip(u[:-1], u[1:]):
        mid = a + (b - a) / 2.0
        out.append(a if mid >= b else mid)
    return out


def exhaustive_newton_split(X, g, h, reg_lambda=1.0, gamma=0.0, min_child=1.0):
    """Best (gain, feature, threshold) by the second-order gain; None if nothing is positive."""
    G, H = g.sum(), h.sum()
    parent = G * G / (H + reg_lambda)
    best = None
    for f in range(X.shape[1]):
        for t in candidate_thresholds(X[:, f]):
            left = X[:, f] <= t
            GL, HL = g[left].sum(), h[left].sum()
            GR, HR = g[~left].sum(), h[~left].sum()
            if HL < min_child or HR < min_child:
                continue
            gain = 0.5 * (GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - parent) - gamma
            if gain > 0 and (best is None or gain > best[0]):
                best = (gain, f, t)
    return best


def all_newton_gains(X, g, h, reg_lambda=1.0, gamma=0.0, min_child=1.0):
    G, H = g.sum(), h.sum()
    parent = G * G / (H + reg_lambda)
    out = []
    for f in range(X.shape[1]):
        for t in candidate_thresholds(X[:, f]):
            left = X[:, f] <= t
            HL, HR = h[left].sum(), h[~left].sum()
            if HL < min_child or HR < min_child:
                continue
            GL, GR = g[left].sum(), g[~left].sum()
            out.append(0.5 * (GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - parent) - gamma)
    return out


def sse(y, w):
    if w.sum() == 0:
        return 0.0
    m = (w * y).sum() / w.sum()
    return float((w * (y - m) ** 2).sum())


def exhaustive_sse_split(X, y, w=None, min_leaf=1.0):
    """Best (reduction, feature, threshold) of weighted SSE; None if no positive reduction."""
    w = np.ones(len(y)) if w is None else w
    total = sse(y, w)
    best = None
    for f in range(X.shape[1]):
        for t in candidate_thresholds(X[:, f]):
            left = X[:, f] <= t
            if w[left].sum() < min_leaf or w[~left].sum() < min_leaf:
                continue
            red = total - sse(y[left], w[left]) - sse(y[~left], w[~left])
            if red > 0 and (best is None or red > best[0]):
                best = (red, f, t)
    return best


def all_sse_reductions(X, y, w=None, min_leaf=1.0):
    w = np.ones(len(y)) if w is None else w
    total = sse(y, w)
    out = []
    for f in range(X.shape[1]):
        for t in candidate_thresholds(X[:, f]):
            left = X[:, f] <= t
            if w[left].sum() < min_leaf or w[~left].sum() < min_leaf:
                continue
            out.append(total - sse(y[left], w[left]) - sse(y[~left], w[~left]))
    return out


def gini(y):
    if len(y) == 0:
        return 0.0
    p = y.mean()
    return 2 * p * (1 - p)


def exhaustive_gini_split(X, y):
    """Best (weighted impurity decrease, feature, threshold) for 0/1 labels."""
    n = len(y)
    total = n * gini(y)
    best = None
    for f in range(X.shape[1]):
        for t in candidate_thresholds(X[:, f]):
            left = X[:, f] <= t
            dec = total - left.sum() * gini(y[left]) - (~left).sum() * gini(y[~left])
            if dec > 1e-12 and (best is None or dec > best[0] + 1e-12):
                best = (dec, f, t)
    return best


def node_members(tree: DecisionTree, X) -> list[np.ndarray]:
    """Boolean row mask for every node, by explicit top-down routing."""
    masks = [None] * tree.n_nodes
    masks[0] = np.ones(len(X), dtype=bool)
    for i in range(tree.n_nodes):
        f = tree.feature[i]
        if f < 0:
            continue
        go_left = X[:, f] <= tree.threshold[i]
        masks[tree.left[i]] = masks[i] & go_left
        masks[tree.right[i]] = masks[i] & ~go_left
    return masks


# ---------------------------------------------------------------------------
# Shapley


def shapley_from_game(v, M: int) -> np.ndarray:
    """phi_j = sum_S |S|!(M-|S|-1)!/M! (v(S+j) - v(S)), with v taking frozensets."""
    cache = {}

    def val(S):
        if S not in cache:
            cache[S] = v(S)
        return cache[S]

    phi = np.zeros(M)
    for j in range(M):
        others = [k for k in range(M) if k != j]
        for size in range(M):
            wgt = math.factorial(size) * math.factorial(M - size - 1) / math.factorial(M)
            for S in combinations(others, size):
                S = frozenset(S)
                phi[j] += wgt * (val(S | {j}) - val(S))
    return phi


def cover_expectation(tree: DecisionTree, x, S) -> float:
    """E[f(x) | x_S] with unknown features marginalized by node covers."""

    def rec(i):
        f = tree.feature[i]
        if f < 0:
            return tree.value[i]
        l, r = tree.left[i], tree.right[i]
        if f in S:
            return rec(l if x[f] <= tree.threshold[i] else r)
        return (tree.cover[l] * rec(l) + tree.cover[r] * rec(r)) / tree.cover[i]

    return rec(0)


def path_dependent_shapley(trees, weights, x, M: int, base: float = 0.0):
    """Exact path-dependent Shapley values of ``base + sum_t w_t tree_t`` and the base value."""
    def v(S):
        return base + sum(w * cover_expectation(t, x, S) for t, w in zip(trees, weights))

    return v(frozenset()), shapley_from_game(v, M)


def random_tree(rng, m: int, max_depth: int, feature_pool=None) -> DecisionTree:
    """A random valid tree built directly (no fitting) in breadth-first order."""
    feats, thr, left, right, value, cover = [], [], [], [], [], []
    depth = []
    pool = list(range(m)) if feature_pool is None else list(feature_pool)

    def add(d):
        feats.append(-1)
        thr.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(rng.normal()))
        cover.append(0.0)
        depth.append(d)
        return len(feats) - 1

    add(0)
    i = 0
    while i < len(feats):
        if depth[i] < max_depth and (i == 0 or rng.random() < 0.7):
            feats[i] = int(rng.choice(pool))
            thr[i] = float(rng.uniform(-1, 1))
            left[i] = add(depth[i] + 1)
            right[i] = add(depth[i] + 1)
        i += 1
    for j in range(len(feats) - 1, -1, -1):
        if feats[j] < 0:
            cover[j] = float(rng.integers(1, 20))
        else:
            cover[j] = cover[left[j]] + cover[right[j]]
    return DecisionTree(np.array(feats), np.array(thr), np.array(left), np.array(right), np.array(value),
                        np.array(cover), np.zeros(len(feats)))


def dense_grid_argmin(f, low, high, n=200001):
    grid = np.linspace(low, high, n)
    vals = np.array([f(t) for t in grid])
    return float(grid[int(np.argmin(vals))])


def _gain_of(kind, X, a, b, f, t, params):
    left = X[:, f] <= t
    if kind == "newton":
        g, h = a, b
        lam = params.get("reg_lambda", 1.0)
        G, H = g.sum(), h.sum()
        GL, HL = g[left].sum(), h[left].sum()
        GR, HR = G - GL, H - HL
        return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam)) - params.get("gamma", 0.0)
    y, w = a, b
    return sse(y, w) - sse(y[left], w[left]) - sse(y[~left], w[~left])


def audit_splits(tree: DecisionTree, X, a, b, kind: str, max_depth: int, params=None, rtol=1e-9) -> list[str]:
    """Problems found when every node of ``tree`` is re-derived by exhaustive search.

    ``kind`` is "newton" (a=g, b=h) or "sse" (a=y, b=weights). An internal
    node must carry the best available gain and its (feature, threshold) must
    score that gain; a leaf above the depth limit must have no positive split.
    """
    params = params or {}
    problems = []
    masks = node_members(tree, X)
    depths = tree.node_depths()
    for i in range(tree.n_nodes):
        m = masks[i]
        Xi, ai, bi = X[m], a[m], b[m]
        if kind == "newton":
            best = exhaustive_newton_split(Xi, ai, bi, params.get("reg_lambda", 1.0), params.get("gamma", 0.0),
                                           params.get("min_child_weight", 1.0))
        else:
            best = exhaustive_sse_split(Xi, ai, bi, params.get("min_samples_leaf", 1.0))
            if bi.sum() < params.get("min_samples_split", 2):
                best = None
        scale = max(1.0, abs(best[0]) if best else 0.0)
        if tree.feature[i] < 0:
            if depths[i] < max_depth and best is not None and best[0] > rtol * scale * 10:
                problems.append(f"leaf {i} could split on x{best[1]} with gain {best[0]}")
            continue
        f, t = int(tree.feature[i]), float(tree.threshold[i])
        if best is None:
            problems.append(f"node {i} split although no positive gain exists")
            continue
        if t not in candidate_thresholds(Xi[:, f]):
            problems.append(f"node {i} threshold {t} is not a midpoint of feature {f}")
            continue
        chosen = _gain_of(kind, Xi, ai, bi, f, t, params)
        if abs(chosen - best[0]) > rtol * scale:
            problems.append(f"node {i} chose gain {chosen}, best is {best[0]} at ({best[1]}, {best[2]})")
        if abs(tree.gain[i] - best[0]) > rtol * scale:
            problems.append(f"node {i} stores gain {tree.gain[i]}, best is {best[0]}")
    return problems


class TreeBag:
    """Minimal additive tree model: ``base + sum_t weights[t] * trees[t](x)``."""

    kind = "bag"

    def __init__(self, trees, weights, base=0.0, n_features=None):
        self.trees = list(trees)
        self.tree_weights = np.asarray(weights, dtype=np.float64)
        self.base_offset = float(base)
        self.n_features = n_features

    def raw_output(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.full(len(X), self.base_offset)
        for t, w in zip(self.trees, self.tree_weights):
            out = out + w * np.array([_route(t, x) for x in X])
        return out


def _route(tree, x):
    i = 0
    while tree.feature[i] >= 0:
        i = tree.left[i] if x[tree.feature[i]] <= tree.threshold[i] else tree.right[i]
    return tree.value[i]


def random_bag(rng, m: int, max_depth: int, max_trees: int) -> TreeBag:
    k = int(rng.integers(1, max_trees + 1))
    trees = [random_tree(rng, m, int(rng.integers(1, max_depth + 1))) for _ in range(k)]
    return TreeBag(trees, rng.uniform(-1.5, 1.5, k), float(rng.normal()), m)
