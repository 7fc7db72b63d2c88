"""Compiled inner loops: exact greedy tree growth, prediction and path-dependent TreeSHAP.

Trees are passed around as flat node arrays (feature, threshold, left, right,
value, cover). Leaves carry ``feature == -1``. Ensembles are packed by
concatenating node arrays and keeping per-tree offsets; child indices stay
local to their tree.
"""

import numpy as np
from numba import njit

MODE_NEWTON = 0  # second-order boosting: leaf -G/(H+lambda), halved gain minus gamma
MODE_MEAN = 1  # weighted least squares CART: leaf G/H, SSE reduction
MODE_MAJORITY = 2  # binary gini CART: leaf is the weighted majority class


@njit(cache=True)
def _score(G, H, reg_lambda):
    return G * G / (H + reg_lambda)


@njit(cache=True)
def _leaf_value(G, H, reg_lambda, mode):
    if mode == MODE_NEWTON:
        return -G / (H + reg_lambda)
    if mode == MODE_MEAN:
        return G / H
    # ties go to class 0
    return 1.0 if G / H > 0.5 else 0.0


@njit(cache=True)
def grow_tree(X, a, b, order, max_depth, min_split, min_child, reg_lambda, gamma, mode,
              max_features, feature_keys, check_const):
    """Grow one tree breadth-first.

    ``a``/``b`` are per-row first/second statistics: gradients and hessians in
    Newton mode, ``w*y`` and ``w`` in the CART modes. ``order[f]`` holds the row
    ids sorted by feature ``f``; it is partitioned in place as nodes split.
    ``feature_keys[i]`` ranks candidate features at node ``i`` when
    ``max_features < m``. ``check_const`` turns nodes with a constant target
    (``a/b``) into leaves.
    """
    n, m = X.shape
    cap = 2 * n + 1
    feat = np.full(cap, -1, dtype=np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    cover = np.zeros(cap)
    gain = np.zeros(cap)
    seg_start = np.zeros(cap, dtype=np.int64)
    seg_end = np.zeros(cap, dtype=np.int64)
    depth = np.zeros(cap, dtype=np.int64)
    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(n, dtype=np.int64)
    all_feats = np.arange(m)

    seg_end[0] = n
    n_nodes = 1
    i = 0
    while i < n_nodes:
        s = seg_start[i]
        e = seg_end[i]
        G = 0.0
        H = 0.0
        for k in range(s, e):
            r = order[0, k]
            G += a[r]
            H += b[r]
        cover[i] = H
        lam = reg_lambda if mode == MODE_NEWTON else 0.0
        value[i] = _leaf_value(G, H, lam, mode)

        can_split = depth[i] < max_depth and H >= min_split and e - s >= 2
        if can_split and check_const:
            r0 = order[0, s]
            y0 = a[r0] / b[r0]
            const = True
            for k in range(s + 1, e):
                r = order[0, k]
                if a[r] / b[r] != y0:
                    const = False
                    break
            if const:
                can_split = False

        if can_split:
            parent = _score(G, H, lam)
            if max_features < m:
                cand = np.sort(np.argsort(feature_keys[i])[:max_features])
            else:
                cand = all_feats
            best_gain = 0.0
            best_f = -1
            best_thr = 0.0
            for f in cand:
                GL = 0.0
                HL = 0.0
                for k in range(s, e - 1):
                    r = order[f, k]
                    GL += a[r]
                    HL += b[r]
                    xv = X[r, f]
                    xn = X[order[f, k + 1], f]
                    if not xn > xv:
                        continue
                    GR = G - GL
                    HR = H - HL
                    if HL < min_child or HR < min_child:
                        continue
                    raw = _score(GL, HL, lam) + _score(GR, HR, lam) - parent
                    if mode == MODE_NEWTON:
                        g = 0.5 * raw - gamma
                    elif mode == MODE_MAJORITY:
                        g = 2.0 * raw
                    else:
                        g = raw
                    if g > best_gain:
                        best_gain = g
                        best_f = f
                        mid = xv + (xn - xv) / 2.0
                        if mid >= xn:
                            mid = xv
                        best_thr = mid
            if best_f >= 0:
                feat[i] = best_f
                thr[i] = best_thr
                gain[i] = best_gain
                n_left = 0
                for k in range(s, e):
                    r = order[0, k]
                    gl = X[r, best_f] <= best_thr
                    goes_left[r] = gl
                    if gl:
                        n_left += 1
                for f in range(m):
                    p = 0
                    for k in range(s, e):
                        r = order[f, k]
                        if goes_left[r]:
                            buf[p] = r
                            p += 1
                    for k in range(s, e):
                        r = order[f, k]
                        if not goes_left[r]:
                            buf[p] = r
                            p += 1
                    for k in range(e - s):
                        order[f, s + k] = buf[k]
                li = n_nodes
                ri = n_nodes + 1
                left[i] = li
                right[i] = ri
                seg_start[li] = s
                seg_end[li] = s + n_left
                seg_start[ri] = s + n_left
                seg_end[ri] = e
                depth[li] = depth[i] + 1
                depth[ri] = depth[i] + 1
                n_nodes += 2
        i += 1

    # make internal covers exact sums of their children
    for j in range(n_nodes - 1, -1, -1):
        if feat[j] >= 0:
            cover[j] = cover[left[j]] + cover[right[j]]
    return (feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), cover[:n_nodes].copy(),
            gain[:n_nodes].copy())


@njit(cache=True)
def predict_packed(X, feat, thr, left, right, value, offsets, weights, out):
    """out[r] += sum_t weights[t] * tree_t(X[r]), accumulated tree by tree onto out[r]."""
    n_trees = offsets.shape[0] - 1
    for r in range(X.shape[0]):
        acc = out[r]
        for t in range(n_trees):
            o = offsets[t]
            node = 0
            while feat[o + node] >= 0:
                if X[r, feat[o + node]] <= thr[o + node]:
                    node = left[o + node]
                else:
                    node = right[o + node]
            acc += weights[t] * value[o + node]
        out[r] = acc


@njit(cache=True)
def apply_tree(X, feat, thr, left, right):
    """Leaf index reached by each row."""
    out = np.empty(X.shape[0], dtype=np.int64)
    for r in range(X.shape[0]):
        node = 0
        while feat[node] >= 0:
            if X[r, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


# ---------------------------------------------------------------------------
# path-dependent TreeSHAP


@njit(cache=True)
def _extend(pf, pz, po, pw, lv, ud, zf, of, fi):
    pf[lv, ud] = fi
    pz[lv, ud] = zf
    po[lv, ud] = of
    pw[lv, ud] = 1.0 if ud == 0 else 0.0
    for i in range(ud - 1, -1, -1):
        pw[lv, i + 1] += of * pw[lv, i] * (i + 1) / (ud + 1)
        pw[lv, i] = zf * pw[lv, i] * (ud - i) / (ud + 1)


@njit(cache=True)
def _unwind(pf, pz, po, pw, lv, ud, pi):
    of = po[lv, pi]
    zf = pz[lv, pi]
    nxt = pw[lv, ud]
    for i in range(ud - 1, -1, -1):
        if of != 0.0:
            tmp = pw[lv, i]
            pw[lv, i] = nxt * (ud + 1) / ((i + 1) * of)
            nxt = tmp - pw[lv, i] * zf * (ud - i) / (ud + 1)
        else:
            pw[lv, i] = pw[lv, i] * (ud + 1) / (zf * (ud - i))
    for i in range(pi, ud):
        pf[lv, i] = pf[lv, i + 1]
        pz[lv, i] = pz[lv, i + 1]
        po[lv, i] = po[lv, i + 1]


@njit(cache=True)
def _unwound_sum(pz, po, pw, lv, ud, pi):
    of = po[lv, pi]
    zf = pz[lv, pi]
    nxt = pw[lv, ud]
    total = 0.0
    for i in range(ud - 1, -1, -1):
        if of != 0.0:
            tmp = nxt * (ud + 1) / ((i + 1) * of)
            total += tmp
            nxt = pw[lv, i] - tmp * zf * ((ud - i) / (ud + 1))
        else:
            total += (pw[lv, i] / zf) / ((ud - i) / (ud + 1))
    return total


@njit(cache=True)
def _shap_tree(o, feat, thr, left, right, value, cover, x, phi, scale, pf, pz, po, pw,
               s_node, s_lv, s_ud, s_zf, s_of, s_fi):
    # depth-first walk with an explicit stack; path state for level lv lives in row lv
    # and stays untouched while deeper levels are processed
    s_node[0] = 0
    s_lv[0] = 0
    s_ud[0] = 0
    s_zf[0] = 1.0
    s_of[0] = 1.0
    s_fi[0] = -1
    top = 1
    while top > 0:
        top -= 1
        node = s_node[top]
        lv = s_lv[top]
        ud = s_ud[top]
        zf = s_zf[top]
        of = s_of[top]
        fi = s_fi[top]
        if lv > 0:
            for k in range(ud):
                pf[lv, k] = pf[lv - 1, k]
                pz[lv, k] = pz[lv - 1, k]
                po[lv, k] = po[lv - 1, k]
                pw[lv, k] = pw[lv - 1, k]
        _extend(pf, pz, po, pw, lv, ud, zf, of, fi)

        split = feat[o + node]
        if split < 0:
            leaf = value[o + node]
            for i in range(1, ud + 1):
                w = _unwound_sum(pz, po, pw, lv, ud, i)
                phi[pf[lv, i]] += scale * w * (po[lv, i] - pz[lv, i]) * leaf
            continue

        if x[split] <= thr[o + node]:
            hot = left[o + node]
            cold = right[o + node]
        else:
            hot = right[o + node]
            cold = left[o + node]
        c = cover[o + node]
        hot_zf = cover[o + hot] / c
        cold_zf = cover[o + cold] / c
        in_zf = 1.0
        in_of = 1.0
        pi = 0
        while pi <= ud:
            if pf[lv, pi] == split:
                break
            pi += 1
        if pi != ud + 1:
            in_zf = pz[lv, pi]
            in_of = po[lv, pi]
            _unwind(pf, pz, po, pw, lv, ud, pi)
            ud -= 1
        # cold goes below hot so hot is expanded first
        s_node[top] = cold
        s_lv[top] = lv + 1
        s_ud[top] = ud + 1
        s_zf[top] = cold_zf * in_zf
        s_of[top] = 0.0
        s_fi[top] = split
        s_node[top + 1] = hot
        s_lv[top + 1] = lv + 1
        s_ud[top + 1] = ud + 1
        s_zf[top + 1] = hot_zf * in_zf
        s_of[top + 1] = in_of
        s_fi[top + 1] = split
        top += 2


@njit(cache=True)
def tree_shap_packed(X, feat, thr, left, right, value, cover, offsets, weights, max_depth):
    """Per-row attributions for a packed ensemble, summed with ``weights``."""
    n, m = X.shape
    phi = np.zeros((n, m))
    size = max_depth + 2
    pf = np.zeros((size, size + 1), dtype=np.int64)
    pz = np.zeros((size, size + 1))
    po = np.zeros((size, size + 1))
    pw = np.zeros((size, size + 1))
    cap = 2 * size + 2
    s_node = np.zeros(cap, dtype=np.int64)
    s_lv = np.zeros(cap, dtype=np.int64)
    s_ud = np.zeros(cap, dtype=np.int64)
    s_zf = np.zeros(cap)
    s_of = np.zeros(cap)
    s_fi = np.zeros(cap, dtype=np.int64)
    n_trees = offsets.shape[0] - 1
    for r in range(n):
        for t in range(n_trees):
            o = offsets[t]
            if feat[o] < 0:
                continue
            _shap_tree(o, feat, thr, left, right, value, cover, X[r], phi[r], weights[t],
                       pf, pz, po, pw, s_node, s_lv, s_ud, s_zf, s_of, s_fi)
    return phi


@njit(cache=True)
def expected_value_packed(feat, left, right, value, cover, offsets, weights):
    """Cover-weighted mean leaf value, summed over trees with ``weights``."""
    n_trees = offsets.shape[0] - 1
    total = 0.0
    for t in range(n_trees):
        o = offsets[t]
        n_nodes = offsets[t + 1] - o
        ev = np.zeros(n_nodes)
        for j in range(n_nodes - 1, -1, -1):
            if feat[o + j] < 0:
                ev[j] = value[o + j]
            else:
                li = left[o + j]
                ri = right[o + j]
                ev[j] = (cover[o + li] * ev[li] + cover[o + ri] * ev[ri]) / cover[o + j]
        total += weights[t] * ev[0]
    return total
