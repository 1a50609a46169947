"""numba-compiled kernels. Signatures and semantics mirror ``vectorized``."""

from __future__ import annotations

import numpy as np
from numba import njit

DEGENERATE_STD = 1e-12


@njit(cache=True, nogil=True)
def rolling_moments(x, w):
    """Trailing-window mean, min, max, std, skew, kurt over up to ``w + 1`` samples.

    Returns a ``(len(x), 6)`` array. Population moments; skew and kurt are 0
    when the window's std is below ``DEGENERATE_STD``.
    """
    t = x.shape[0]
    out = np.empty((t, 6))
    for i in range(t):
        lo = i - w
        if lo < 0:
            lo = 0
        n = i - lo + 1
        s = 0.0
        mn = x[lo]
        mx = x[lo]
        for j in range(lo, i + 1):
            v = x[j]
            s += v
            if v < mn:
                mn = v
            if v > mx:
                mx = v
        mean = s / n
        m2 = 0.0
        m3 = 0.0
        m4 = 0.0
        for j in range(lo, i + 1):
            d = x[j] - mean
            d2 = d * d
            m2 += d2
            m3 += d2 * d
            m4 += d2 * d2
        m2 /= n
        m3 /= n
        m4 /= n
        std = np.sqrt(m2)
        out[i, 0] = mean
        out[i, 1] = mn
        out[i, 2] = mx
        out[i, 3] = std
        if std < DEGENERATE_STD:
            out[i, 4] = 0.0
            out[i, 5] = 0.0
        else:
            out[i, 4] = m3 / (std * std * std)
            out[i, 5] = m4 / (m2 * m2)
    return out


@njit(cache=True, nogil=True)
def _midpoint(lo, hi):
    thr = 0.5 * lo + 0.5 * hi
    if thr <= lo:
        thr = hi
    return thr


@njit(cache=True, nogil=True)
def _best_split(seg_order, seg_x, grad, hess, lo, hi, g_tot, h_tot, reg_lambda, gamma, min_child_weight):
    """Scan one node's sorted segment of every feature; return (feature, threshold, raw gain)."""
    n_feat = seg_order.shape[0]
    parent = g_tot * g_tot / (h_tot + reg_lambda)
    best = 0.0
    best_f = -1
    best_thr = 0.0
    best_raw = 0.0
    for f in range(n_feat):
        i = seg_order[f, lo]
        g_left = grad[i]
        h_left = hess[i]
        last = seg_x[f, lo]
        for r in range(lo + 1, hi):
            x = seg_x[f, r]
            if x > last and h_left >= min_child_weight:
                h_right = h_tot - h_left
                if h_right < min_child_weight:
                    break
                g_right = g_tot - g_left
                raw = 0.5 * (
                    g_left * g_left / (h_left + reg_lambda)
                    + g_right * g_right / (h_right + reg_lambda)
                    - parent
                )
                score = raw - gamma
                if score > best:
                    best = score
                    best_f = f
                    best_thr = _midpoint(last, x)
                    best_raw = raw
            i = seg_order[f, r]
            g_left += grad[i]
            h_left += hess[i]
            last = x
    return best_f, best_thr, best_raw


@njit(cache=True, nogil=True)
def grow_tree(X, order, sorted_x, grad, hess, max_depth, reg_lambda, gamma, min_child_weight,
              scratch_order, scratch_x):
    """Grow one regression tree level by level with exact greedy splits.

    ``order[f]`` lists row indices sorted by ``X[:, f]`` (stable) and
    ``sorted_x[f]`` the matching values. Each level keeps, per feature, the
    rows of every open node as one contiguous, still-sorted segment, so a
    node's candidate thresholds are scanned sequentially. ``scratch_*`` are
    ``(2, n_features, n_rows)`` buffers reused across trees. Rows go left when
    ``x < threshold``; equal-gain candidates resolve to the lowest feature
    index, then the lowest threshold.

    Returns ``(feature, threshold, left, right, value, gain, leaf_of_row)``;
    ``feature == -1`` marks a leaf, ``gain`` holds the split's loss reduction
    before the ``gamma`` penalty.
    """
    n, n_feat = X.shape
    cap = 2 ** (max_depth + 1) - 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    gain = np.zeros(cap)
    node_g = np.zeros(cap)
    node_h = np.zeros(cap)
    pos = np.zeros(n, np.int64)
    leaf_of_row = np.zeros(n, np.int64)
    go_left = np.zeros(n, np.bool_)
    seg_lo = np.zeros(cap, np.int64)
    seg_hi = np.zeros(cap, np.int64)
    seg_hi[0] = n

    for i in range(n):
        node_g[0] += grad[i]
        node_h[0] += hess[i]

    seg_order = order
    seg_x = sorted_x
    buf = 0
    n_nodes = 1
    level_start = 0
    level_end = 1
    for depth in range(max_depth):
        for node in range(level_start, level_end):
            lo = seg_lo[node]
            hi = seg_hi[node]
            if hi - lo < 2:
                continue
            best_f, best_thr, best_raw = _best_split(
                seg_order, seg_x, grad, hess, lo, hi, node_g[node], node_h[node],
                reg_lambda, gamma, min_child_weight,
            )
            if best_f >= 0:
                feature[node] = best_f
                threshold[node] = best_thr
                gain[node] = best_raw
                left[node] = n_nodes
                right[node] = n_nodes + 1
                n_nodes += 2

        for i in range(n):
            node = pos[i]
            if node < 0:
                continue
            f = feature[node]
            if f < 0:
                leaf_of_row[i] = node
                pos[i] = -1
            elif X[i, f] < threshold[node]:
                go_left[i] = True
                pos[i] = left[node]
            else:
                go_left[i] = False
                pos[i] = right[node]
        for i in range(n):
            node = pos[i]
            if node >= 0:
                node_g[node] += grad[i]
                node_h[node] += hess[i]

        if n_nodes == level_end or depth == max_depth - 1:
            break

        # stable partition of each split node's segment into its children;
        # rows of nodes that became leaves are dropped
        next_order = scratch_order[buf]
        next_x = scratch_x[buf]
        for node in range(level_start, level_end):
            if feature[node] < 0:
                continue
            lo = seg_lo[node]
            hi = seg_hi[node]
            n_left = 0
            for r in range(lo, hi):
                if go_left[seg_order[0, r]]:
                    n_left += 1
            seg_lo[left[node]] = lo
            seg_hi[left[node]] = lo + n_left
            seg_lo[right[node]] = lo + n_left
            seg_hi[right[node]] = hi
            for f in range(n_feat):
                wl = lo
                wr = lo + n_left
                for r in range(lo, hi):
                    # branch-free: the destination is picked arithmetically
                    i = seg_order[f, r]
                    gl = np.int64(go_left[i])
                    dest = wr + (wl - wr) * gl
                    next_order[f, dest] = i
                    next_x[f, dest] = seg_x[f, r]
                    wl += gl
                    wr += 1 - gl
        seg_order = next_order
        seg_x = next_x
        buf = 1 - buf
        level_start = level_end
        level_end = n_nodes

    for i in range(n):
        if pos[i] >= 0:
            leaf_of_row[i] = pos[i]
    for node in range(n_nodes):
        if feature[node] < 0:
            value[node] = -node_g[node] / (node_h[node] + reg_lambda)
    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
        gain[:n_nodes],
        leaf_of_row,
    )


@njit(cache=True, nogil=True)
def ensemble_sum(X, feature, threshold, left, right, value, offsets):
    """Sum of leaf values over all trees for each row.

    Trees are concatenated; tree ``t`` occupies ``offsets[t]:offsets[t + 1]``
    and its child indices are local to that slice.
    """
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            base = offsets[t]
            node = base
            while feature[node] >= 0:
                if X[i, feature[node]] < threshold[node]:
                    node = base + left[node]
                else:
                    node = base + right[node]
            acc += value[node]
        out[i] = acc
    return out
