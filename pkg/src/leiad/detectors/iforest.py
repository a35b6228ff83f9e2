"""Isolation forest over per-point feature rows (value, first difference).

Trees are grown level-wise across the whole ensemble at once: every
(tree, node) group of sampled points is split in the same vectorized pass,
which keeps the per-series cost dominated by a handful of numpy sorts
instead of Python recursion.  Scores follow the standard path-length
normalization: 2 ** (-E[h(x)] / c(sample_size)).
"""

from __future__ import annotations

import numpy as np

_EULER_GAMMA = 0.5772156649015329


def _avg_path_length(m) -> np.ndarray:
    """Expected unsuccessful-search path length c(m) for subtree size m."""
    m = np.asarray(m, dtype=np.float64)
    out = np.zeros_like(m)
    big = m > 2
    out[big] = 2.0 * (np.log(m[big] - 1.0) + _EULER_GAMMA) - 2.0 * (m[big] - 1.0) / m[big]
    out[m == 2] = 1.0
    return out


def _point_features(values: np.ndarray) -> np.ndarray:
    diff = np.diff(values, prepend=values[:1])
    return np.column_stack([values, diff])


class IsolationForest:
    """Fitted ensemble; immutable after construction."""

    def __init__(self, n_trees: int, subsample: int, node_dim, node_thr, is_leaf, leaf_adj, height):
        self.n_trees = n_trees
        self.subsample = subsample
        self._node_dim = node_dim
        self._node_thr = node_thr
        self._is_leaf = is_leaf
        self._leaf_adj = leaf_adj
        self._height = height

    def path_lengths(self, features: np.ndarray) -> np.ndarray:
        """Mean isolation depth per row, averaged over trees."""
        n = len(features)
        f0 = np.ascontiguousarray(features[:, 0])
        f1 = np.ascontiguousarray(features[:, 1])
        total = np.zeros(n)
        rows = np.arange(n)
        for t in range(self.n_trees):
            cur = np.zeros(n, dtype=np.int32)
            depth = np.zeros(n, dtype=np.float64)
            for _ in range(self._height + 1):
                active = ~self._is_leaf[t, cur]
                if not active.any():
                    break
                nodes = cur[active]
                dim = self._node_dim[t, nodes]
                thr = self._node_thr[t, nodes]
                x = np.where(dim == 0, f0[rows[active]], f1[rows[active]])
                cur[active] = 2 * nodes + 1 + (x >= thr)
                depth[active] += 1.0
            total += depth + self._leaf_adj[t, cur]
        return total / self.n_trees


def fit(values: np.ndarray, seed: int, number_of_estimators: int = 1000,
        subsample_size: int = 256) -> IsolationForest:
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n < 2:
        raise ValueError("isolation forest needs at least 2 points")
    if number_of_estimators < 1 or subsample_size < 2:
        raise ValueError("invalid forest size parameters")

    X = _point_features(values)
    psi = min(subsample_size, n)
    T = number_of_estimators
    height = max(1, int(np.ceil(np.log2(psi))))
    max_nodes = 2 ** (height + 1) - 1
    rng = np.random.default_rng(seed)

    if psi == n:
        samples = np.tile(np.arange(n, dtype=np.int32), T)
    else:
        samples = np.empty(T * psi, dtype=np.int32)
        for t in range(T):
            samples[t * psi:(t + 1) * psi] = rng.choice(n, size=psi, replace=False)

    node_dim = np.full((T, max_nodes), -1, dtype=np.int8)
    node_thr = np.zeros((T, max_nodes), dtype=np.float64)
    is_leaf = np.zeros((T, max_nodes), dtype=bool)
    leaf_adj = np.zeros((T, max_nodes), dtype=np.float64)

    slot_tree = np.repeat(np.arange(T, dtype=np.int64), psi)
    slot_node = np.zeros(T * psi, dtype=np.int64)
    slot_pt = samples.astype(np.int64)
    f0_all = X[:, 0]
    f1_all = X[:, 1]

    for depth in range(height + 1):
        if len(slot_pt) == 0:
            break
        key = slot_tree * max_nodes + slot_node
        order = np.argsort(key, kind="stable")
        kt = slot_tree[order]
        kn = slot_node[order]
        kp = slot_pt[order]
        ks = key[order]
        starts = np.nonzero(np.concatenate([[True], ks[1:] != ks[:-1]]))[0]
        sizes = np.diff(np.append(starts, len(ks)))
        g_tree = kt[starts]
        g_node = kn[starts]
        f0 = f0_all[kp]
        f1 = f1_all[kp]
        min0 = np.minimum.reduceat(f0, starts)
        max0 = np.maximum.reduceat(f0, starts)
        min1 = np.minimum.reduceat(f1, starts)
        max1 = np.maximum.reduceat(f1, starts)
        r0 = max0 - min0
        r1 = max1 - min1

        if depth == height:
            leafy = np.ones(len(starts), dtype=bool)
        else:
            leafy = (sizes == 1) | ((r0 <= 0) & (r1 <= 0))
        if leafy.any():
            lt = g_tree[leafy]
            ln = g_node[leafy]
            is_leaf[lt, ln] = True
            leaf_adj[lt, ln] = _avg_path_length(sizes[leafy])
        split = ~leafy
        if not split.any():
            break

        n_split = int(split.sum())
        u_dim = rng.random(n_split)
        u_thr = rng.random(n_split)
        sr0 = r0[split]
        sr1 = r1[split]
        both = (sr0 > 0) & (sr1 > 0)
        dim = np.where(both, (u_dim >= 0.5).astype(np.int8), np.where(sr0 > 0, 0, 1).astype(np.int8))
        lo = np.where(dim == 0, min0[split], min1[split])
        span = np.where(dim == 0, sr0, sr1)
        thr = lo + u_thr * span
        st = g_tree[split]
        sn = g_node[split]
        node_dim[st, sn] = dim
        node_thr[st, sn] = thr

        group_of_slot = np.repeat(np.arange(len(starts)), sizes)
        keep = split[group_of_slot]
        split_rank = np.cumsum(split) - 1    # group index -> position among split groups
        gidx = split_rank[group_of_slot[keep]]
        d_slot = dim[gidx]
        thr_slot = thr[gidx]
        x_slot = np.where(d_slot == 0, f0[keep], f1[keep])
        slot_tree = kt[keep]
        slot_node = 2 * kn[keep] + 1 + (x_slot >= thr_slot)
        slot_pt = kp[keep]

    return IsolationForest(T, psi, node_dim, node_thr, is_leaf, leaf_adj, height)


def score(values: np.ndarray, seed: int, number_of_estimators: int = 1000,
          subsample_size: int = 256) -> np.ndarray:
    forest = fit(values, seed, number_of_estimators, subsample_size)
    features = _point_features(np.asarray(values, dtype=np.float64))
    expected = forest.path_lengths(features)
    denom = float(_avg_path_length(np.array([forest.subsample]))[0])
    if denom <= 0:
        denom = 1.0
    return np.power(2.0, -expected / denom)
