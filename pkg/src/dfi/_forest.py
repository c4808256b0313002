"""CART regression trees and bagged forests compiled with numba.

A fitted forest is a set of flat node arrays.  Node ``k`` of the
forest is a leaf when ``feature[k] < 0``; otherwise rows with
``x[feature[k]] <= threshold[k]`` go to ``left[k]``.  Child indices
are absolute positions in the concatenated arrays.
"""

import numpy as np
from numba import config as _numba_config
from numba import njit, prange

# skip the TBB probe; the bundled TBB is too old and only emits a warning
_numba_config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(cache=True, nogil=True)
def _grow_tree(x, y, sample_idx, mtry, min_leaf, seed):
    np.random.seed(seed)
    n = sample_idx.shape[0]
    d = x.shape[1]
    max_nodes = 2 * (n // min_leaf) + 1

    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes)

    idx = sample_idx.copy()
    buf = np.empty(n, dtype=np.int64)
    vals = np.empty(n)
    ys = np.empty(n)
    perm = np.arange(d)
    chosen = np.empty(mtry, dtype=np.int64)

    st_node = np.empty(max_nodes, dtype=np.int64)
    st_lo = np.empty(max_nodes, dtype=np.int64)
    st_hi = np.empty(max_nodes, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        lo = st_lo[top]
        hi = st_hi[top]
        m = hi - lo

        s = 0.0
        ymin = np.inf
        ymax = -np.inf
        for i in range(lo, hi):
            yi = y[idx[i]]
            s += yi
            if yi < ymin:
                ymin = yi
            if yi > ymax:
                ymax = yi
        value[node] = s / m
        if m < 2 * min_leaf or ymin == ymax:
            continue

        # partial Fisher-Yates draw of mtry candidate features
        for k in range(mtry):
            r = k + np.random.randint(0, d - k)
            tmp = perm[k]
            perm[k] = perm[r]
            perm[r] = tmp
        for k in range(mtry):
            chosen[k] = perm[k]
        chosen.sort()

        parent = s * s / m
        best = parent
        best_f = -1
        best_thr = 0.0
        for c in range(mtry):
            f = chosen[c]
            for i in range(m):
                vals[i] = x[idx[lo + i], f]
            order = np.argsort(vals[:m], kind="mergesort")
            for i in range(m):
                ys[i] = y[idx[lo + order[i]]]
            sl = 0.0
            for i in range(min_leaf - 1):
                sl += ys[i]
            for i in range(min_leaf, m - min_leaf + 1):
                sl += ys[i - 1]
                v0 = vals[order[i - 1]]
                v1 = vals[order[i]]
                if v0 < v1:
                    sr = s - sl
                    crit = sl * sl / i + sr * sr / (m - i)
                    if crit > best:
                        best = crit
                        best_f = f
                        thr = 0.5 * (v0 + v1)
                        if thr >= v1:
                            thr = v0
                        best_thr = thr
        if best_f < 0:
            continue

        # stable partition of idx[lo:hi]
        nl = 0
        for i in range(lo, hi):
            if x[idx[i], best_f] <= best_thr:
                buf[nl] = idx[i]
                nl += 1
        nr = nl
        for i in range(lo, hi):
            if x[idx[i], best_f] > best_thr:
                buf[nr] = idx[i]
                nr += 1
        for i in range(m):
            idx[lo + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_thr
        lch = n_nodes
        rch = n_nodes + 1
        n_nodes += 2
        left[node] = lch
        right[node] = rch
        # push right first so the left subtree is expanded first
        st_node[top] = rch
        st_lo[top] = lo + nl
        st_hi[top] = hi
        top += 1
        st_node[top] = lch
        st_lo[top] = lo
        st_hi[top] = lo + nl
        top += 1

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True, parallel=True)
def _predict(feature, threshold, left, right, value, roots, x):
    n = x.shape[0]
    n_trees = roots.shape[0]
    block = 4096
    n_blocks = (n + block - 1) // block
    out = np.zeros(n)
    # tree-outer order keeps one tree's nodes hot in cache per row block
    for b in prange(n_blocks):
        lo = b * block
        hi = min(n, lo + block)
        for t in range(n_trees):
            r = roots[t]
            for i in range(lo, hi):
                k = r
                while feature[k] >= 0:
                    if x[i, feature[k]] <= threshold[k]:
                        k = left[k]
                    else:
                        k = right[k]
                out[i] += value[k]
    for i in range(n):
        out[i] /= n_trees
    return out


def grow_forest(x, y, n_trees, mtry, min_leaf, seed):
    """Grow ``n_trees`` trees on bootstrap resamples; tree ``t`` uses seed ``seed + t``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = x.shape[0]
    parts = []
    for t in range(n_trees):
        tree_seed = int(seed) + t
        boot = np.random.default_rng(tree_seed).integers(0, n, n)
        parts.append(_grow_tree(x, y, boot, mtry, min_leaf, tree_seed % (2**32)))
    sizes = np.array([p[0].shape[0] for p in parts])
    roots = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    feature = np.concatenate([p[0] for p in parts])
    threshold = np.concatenate([p[1] for p in parts])
    left = np.concatenate([np.where(p[2] >= 0, p[2] + r, -1) for p, r in zip(parts, roots)])
    right = np.concatenate([np.where(p[3] >= 0, p[3] + r, -1) for p, r in zip(parts, roots)])
    value = np.concatenate([p[4] for p in parts])
    return feature, threshold, left, right, value, roots


def predict_forest(arrays, x):
    feature, threshold, left, right, value, roots = arrays
    return _predict(feature, threshold, left, right, value, roots, np.ascontiguousarray(x, dtype=np.float64))


@njit(cache=True, parallel=True)
def _replaced_mean(feature, threshold, left, right, value, roots, x, j, vals):
    # vals[i] holds row i's replacement values for column j, sorted ascending.
    # Values reaching a node always form a contiguous run of vals[i], so the
    # forest is walked once per run instead of once per value.
    n, m = vals.shape
    n_trees = roots.shape[0]
    block = 1024
    n_blocks = (n + block - 1) // block
    out = np.zeros(n)
    for b in prange(n_blocks):
        st_k = np.empty(4 * m + 64, dtype=np.int64)
        st_lo = np.empty(4 * m + 64, dtype=np.int64)
        st_hi = np.empty(4 * m + 64, dtype=np.int64)
        lo_row = b * block
        hi_row = min(n, lo_row + block)
        for t in range(n_trees):
            r = roots[t]
            for i in range(lo_row, hi_row):
                top = 1
                st_k[0] = r
                st_lo[0] = 0
                st_hi[0] = m
                acc = 0.0
                while top > 0:
                    top -= 1
                    k = st_k[top]
                    a = st_lo[top]
                    c = st_hi[top]
                    while feature[k] >= 0 and feature[k] != j:
                        if x[i, feature[k]] <= threshold[k]:
                            k = left[k]
                        else:
                            k = right[k]
                    if feature[k] < 0:
                        acc += value[k] * (c - a)
                        continue
                    # split on the replaced column: first index with vals > threshold
                    thr = threshold[k]
                    p = a
                    q = c
                    while p < q:
                        mid = (p + q) // 2
                        if vals[i, mid] <= thr:
                            p = mid + 1
                        else:
                            q = mid
                    if p > a:
                        st_k[top] = left[k]
                        st_lo[top] = a
                        st_hi[top] = p
                        top += 1
                    if c > p:
                        st_k[top] = right[k]
                        st_lo[top] = p
                        st_hi[top] = c
                        top += 1
                out[i] += acc / m
    for i in range(n):
        out[i] /= n_trees
    return out


def replaced_mean_forest(arrays, x, j, values):
    """Mean over ``values[i, :]`` of the forest prediction at row ``i`` with column ``j`` replaced."""
    feature, threshold, left, right, value, roots = arrays
    vals = np.sort(np.asarray(values, dtype=np.float64), axis=1)
    return _replaced_mean(
        feature, threshold, left, right, value, roots, np.ascontiguousarray(x, dtype=np.float64), int(j), vals
    )
