"""Pure-numpy kernels, used when numba is disabled or unavailable.

Accumulations go through ``np.cumsum`` and ``np.bincount``, which add strictly
left to right, so sums match the compiled loops exactly.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DEGENERATE_STD = 1e-12


def rolling_moments(x: np.ndarray, w: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    t = x.shape[0]
    padded = np.concatenate([np.full(w, np.nan), x])
    win = sliding_window_view(padded, w + 1)
    present = ~np.isnan(win)
    n = present.sum(axis=1)
    mean = np.nansum(win, axis=1) / n
    dev = np.where(present, win - mean[:, None], 0.0)
    d2 = dev * dev
    m2 = d2.sum(axis=1) / n
    m3 = (d2 * dev).sum(axis=1) / n
    m4 = (d2 * d2).sum(axis=1) / n
    std = np.sqrt(m2)
    out = np.empty((t, 6))
    out[:, 0] = mean
    out[:, 1] = np.nanmin(win, axis=1)
    out[:, 2] = np.nanmax(win, axis=1)
    out[:, 3] = std
    flat = std < DEGENERATE_STD
    with np.errstate(divide="ignore", invalid="ignore"):
        out[:, 4] = np.where(flat, 0.0, m3 / (std * std * std))
        out[:, 5] = np.where(flat, 0.0, m4 / (m2 * m2))
    return out


def _midpoint(lo: float, hi: float) -> float:
    thr = 0.5 * lo + 0.5 * hi
    return hi if thr <= lo else thr


def grow_tree(X, order, sorted_x, grad, hess, max_depth, reg_lambda, gamma, min_child_weight,
              scratch_order=None, scratch_x=None):
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

    node_g[0] = np.bincount(pos, weights=grad, minlength=1)[0]
    node_h[0] = np.bincount(pos, weights=hess, minlength=1)[0]

    n_nodes = 1
    level_start, level_end = 0, 1
    for _depth in range(max_depth):
        pos_sorted = pos[order]
        for node in range(level_start, level_end):
            member = pos_sorted == node
            count = int(member[0].sum())
            if count < 2:
                continue
            rows = order[member].reshape(n_feat, count)
            xs = sorted_x[member].reshape(n_feat, count)
            g_left = np.cumsum(grad[rows], axis=1)[:, :-1]
            h_left = np.cumsum(hess[rows], axis=1)[:, :-1]
            g_tot = node_g[node]
            h_tot = node_h[node]
            g_right = g_tot - g_left
            h_right = h_tot - h_left
            valid = (
                (xs[:, 1:] > xs[:, :-1])
                & (h_left >= min_child_weight)
                & (h_right >= min_child_weight)
            )
            parent = g_tot * g_tot / (h_tot + reg_lambda)
            raw = 0.5 * (
                g_left * g_left / (h_left + reg_lambda)
                + g_right * g_right / (h_right + reg_lambda)
                - parent
            )
            score = np.where(valid, raw - gamma, -np.inf)
            flat = int(np.argmax(score))
            f, j = divmod(flat, count - 1)
            if not score[f, j] > 0.0:
                continue
            feature[node] = f
            threshold[node] = _midpoint(xs[f, j], xs[f, j + 1])
            gain[node] = raw[f, j]
            left[node] = n_nodes
            right[node] = n_nodes + 1
            n_nodes += 2

        active = np.flatnonzero(pos >= 0)
        node_of = pos[active]
        f_of = feature[node_of]
        is_leaf = f_of < 0
        leaf_of_row[active[is_leaf]] = node_of[is_leaf]
        split_rows = active[~is_leaf]
        split_nodes = node_of[~is_leaf]
        go_left = X[split_rows, feature[split_nodes]] < threshold[split_nodes]
        pos[active[is_leaf]] = -1
        pos[split_rows] = np.where(go_left, left[split_nodes], right[split_nodes])

        still = pos >= 0
        if still.any():
            node_g[:n_nodes] += np.bincount(pos[still], weights=grad[still], minlength=n_nodes)
            node_h[:n_nodes] += np.bincount(pos[still], weights=hess[still], minlength=n_nodes)

        level_start, level_end = level_end, n_nodes
        if level_start == level_end:
            break

    remaining = pos >= 0
    leaf_of_row[remaining] = pos[remaining]
    leaves = feature[:n_nodes] < 0
    value[:n_nodes][leaves] = -node_g[:n_nodes][leaves] / (node_h[:n_nodes][leaves] + reg_lambda)
    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
        gain[:n_nodes],
        leaf_of_row,
    )


def ensemble_sum(X, feature, threshold, left, right, value, offsets):
    n = X.shape[0]
    out = np.zeros(n)
    rows = np.arange(n)
    for t in range(offsets.shape[0] - 1):
        base = offsets[t]
        node = np.full(n, base, dtype=np.int64)
        while True:
            f = feature[node]
            internal = f >= 0
            if not internal.any():
                break
            idx = rows[internal]
            nd = node[internal]
            go_left = X[idx, f[internal]] < threshold[nd]
            node[internal] = base + np.where(go_left, left[nd], right[nd])
        out += value[node]
    return out
