"""Gradient-boosted regression trees for binary classification.

Each round fits a tree to the current loss gradients with exact greedy
variance-reduction splits.  Trees grow level-wise; split search runs as a
single compiled pass per level over the presorted feature columns, keeping
per-node running sums, so no re-sorting happens during growth.  Prediction
is the sigmoid of the prior log-odds plus the learning-rate weighted sum of
tree outputs.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

MODEL_MAGIC = "LEIAD-GBT-v1"

_MIN_GAIN = 1e-12


@njit(cache=True)
def _scan_splits(XT, orderT, gw, w, node_of, splittable, tot_g, tot_w, tot_c,
                 min_child, best_gain, best_feat, best_thr):
    """Best variance-reduction split per splittable node, over all features.

    ``orderT[f]`` holds the point ids in ascending value of feature f; the
    scan advances per-node prefix sums and evaluates every boundary between
    distinct values.  Thresholds are the left-side maximum, so the left
    predicate is x <= threshold exactly.  Arrays arrive feature-major for
    contiguous inner loops.
    """
    n_features, n = XT.shape
    n_nodes = len(tot_g)
    acc_g = np.zeros(n_nodes)
    acc_w = np.zeros(n_nodes)
    acc_c = np.zeros(n_nodes, dtype=np.int64)
    last_val = np.zeros(n_nodes)
    for f in range(n_features):
        for v in range(n_nodes):
            acc_g[v] = 0.0
            acc_w[v] = 0.0
            acc_c[v] = 0
        row = orderT[f]
        xrow = XT[f]
        for k in range(n):
            i = row[k]
            v = node_of[i]
            if not splittable[v]:
                continue
            x = xrow[i]
            c = acc_c[v]
            if c >= min_child and tot_c[v] - c >= min_child and x > last_val[v]:
                lg = acc_g[v]
                lw = acc_w[v]
                rg = tot_g[v] - lg
                rw = tot_w[v] - lw
                gain = lg * lg / lw + rg * rg / rw - tot_g[v] * tot_g[v] / tot_w[v]
                if gain > best_gain[v]:
                    best_gain[v] = gain
                    best_feat[v] = f
                    best_thr[v] = last_val[v]
            acc_g[v] += gw[i]
            acc_w[v] += w[i]
            acc_c[v] = c + 1
            last_val[v] = x


@njit(cache=True)
def _apply_tree(X, feature, threshold, left, right, value, out):
    n = X.shape[0]
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]


@njit(cache=True)
def _apply_ensemble(X, feature, threshold, left, right, value, offsets,
                    learning_rate, base_score, out):
    """Sum of all packed trees per row; node arrays are concatenated with
    per-tree offsets."""
    n = X.shape[0]
    n_trees = len(offsets) - 1
    for i in range(n):
        acc = base_score
        for t in range(n_trees):
            o = offsets[t]
            node = o
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = o + left[node]
                else:
                    node = o + right[node]
            acc += learning_rate * value[node]
        out[i] = acc


@dataclass
class Tree:
    """Flat array representation; node 0 is the root, feature -1 marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def leaf_count(self) -> int:
        return int(np.sum(self.feature < 0))

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.empty(len(X))
        _apply_tree(X, self.feature, self.threshold, self.left, self.right, self.value, out)
        return out


@dataclass
class EndModel:
    """Boosted ensemble plus the base prediction in log-odds."""

    trees: list[Tree]
    learning_rate: float
    num_leaves_limit: int
    base_score: float
    feature_count: int
    loss_trace: list[float] = field(default_factory=list)
    _packed: tuple | None = field(default=None, repr=False, compare=False)

    def _pack(self) -> tuple:
        if self._packed is None or self._packed[-1] != len(self.trees):
            if self.trees:
                feature = np.concatenate([t.feature for t in self.trees])
                threshold = np.concatenate([t.threshold for t in self.trees])
                left = np.concatenate([t.left for t in self.trees])
                right = np.concatenate([t.right for t in self.trees])
                value = np.concatenate([t.value for t in self.trees])
                sizes = [len(t.feature) for t in self.trees]
                offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
            else:
                feature = np.empty(0, dtype=np.int32)
                threshold = np.empty(0)
                left = np.empty(0, dtype=np.int32)
                right = np.empty(0, dtype=np.int32)
                value = np.empty(0)
                offsets = np.zeros(1, dtype=np.int64)
            self._packed = (feature, threshold, left, right, value, offsets, len(self.trees))
        return self._packed

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise ValueError(
                f"feature layout mismatch: expected {self.feature_count} columns, got {X.shape}"
            )
        if not self.trees:
            return np.full(len(X), self.base_score)
        feature, threshold, left, right, value, offsets, _ = self._pack()
        out = np.empty(len(X))
        _apply_ensemble(X, feature, threshold, left, right, value, offsets,
                        self.learning_rate, self.base_score, out)
        return out


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def _logloss(y, p, w):
    p = np.clip(p, 1e-12, 1 - 1e-12)
    ll = -(y * np.log(p) + (1 - y) * np.log(1 - p))
    return float(np.average(ll, weights=w))


def _grow_tree(XT, orderT, g, w, num_leaves, max_depth, min_child):
    """One regression tree on gradient targets g with sample weights w."""
    n = len(g)
    node_of = np.zeros(n, dtype=np.int16)
    gw = g * w
    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    frontier = [0]
    leaves = 1

    for _ in range(max_depth):
        if not frontier or leaves >= num_leaves:
            break
        n_nodes = len(feature)
        splittable = np.zeros(n_nodes, dtype=np.bool_)
        splittable[frontier] = True
        tot_c = np.bincount(node_of, minlength=n_nodes).astype(np.int64)
        tot_g = np.bincount(node_of, weights=gw, minlength=n_nodes)
        tot_w = np.bincount(node_of, weights=w, minlength=n_nodes)
        # Nodes too small to produce two children are finished leaves.
        splittable &= tot_c >= 2 * min_child
        if not splittable.any():
            break
        best_gain = np.full(n_nodes, -np.inf)
        best_feat = np.full(n_nodes, -1, dtype=np.int64)
        best_thr = np.zeros(n_nodes)
        _scan_splits(XT, orderT, gw, w, node_of, splittable, tot_g, tot_w, tot_c,
                     min_child, best_gain, best_feat, best_thr)

        nodes = np.nonzero(best_gain > _MIN_GAIN)[0]
        if len(nodes) == 0:
            break
        nodes = nodes[np.lexsort((nodes, -best_gain[nodes]))]
        budget = num_leaves - leaves
        nodes = nodes[:budget]

        split_feat = np.full(n_nodes, -1, dtype=np.int64)
        split_thr = np.zeros(n_nodes)
        split_left = np.zeros(n_nodes, dtype=np.int64)
        split_right = np.zeros(n_nodes, dtype=np.int64)
        new_frontier = []
        for v in nodes:
            left_id = len(feature)
            right_id = left_id + 1
            feature[v] = int(best_feat[v])
            threshold[v] = float(best_thr[v])
            left[v] = left_id
            right[v] = right_id
            feature.extend([-1, -1])
            threshold.extend([0.0, 0.0])
            left.extend([-1, -1])
            right.extend([-1, -1])
            split_feat[v] = best_feat[v]
            split_thr[v] = best_thr[v]
            split_left[v] = left_id
            split_right[v] = right_id
            new_frontier.extend([left_id, right_id])
            leaves += 1

        moving = split_feat[node_of] >= 0
        rows = np.nonzero(moving)[0]
        if len(rows):
            v = node_of[rows]
            go_left = XT[split_feat[v], rows] <= split_thr[v]
            node_of[rows] = np.where(go_left, split_left[v], split_right[v]).astype(np.int16)
        frontier = new_frontier

    value = np.zeros(len(feature))
    sums = np.bincount(node_of, weights=gw, minlength=len(feature))
    wsum = np.bincount(node_of, weights=w, minlength=len(feature))
    occupied = wsum > 0
    value[occupied] = sums[occupied] / wsum[occupied]
    return Tree(
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        value,
    )


def train_end_model(features: np.ndarray, labels: np.ndarray, *,
                    rounds: int = 100, learning_rate: float = 0.1,
                    num_leaves: int = 200, min_child_samples: int = 20,
                    max_depth: int = 8, sample_weight: np.ndarray | None = None,
                    class_prior: float = 0.5, seed: int = 0) -> EndModel:
    """Fit the boosted ensemble on a weak-label training set.

    A single-class (or empty) label set yields a constant model at the class
    prior with a warning; this happens routinely in the earliest iterations.
    The ``seed`` is accepted for interface symmetry; training itself is
    deterministic and invariant to row order.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a 2-d array")
    y = np.asarray(labels, dtype=np.float64)
    if len(y) != len(X):
        raise ValueError("features and labels length mismatch")
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("sample weights must be positive")

    classes = np.unique(y)
    if len(y) == 0 or len(classes) < 2:
        warnings.warn("single-class training set: returning a constant-prior model")
        base = float(np.log(class_prior / (1.0 - class_prior)))
        n_feat = X.shape[1] if X.ndim == 2 else 0
        return EndModel([], learning_rate, num_leaves, base, n_feat)

    mean = float(np.clip(np.average(y, weights=w), 1e-6, 1 - 1e-6))
    base = float(np.log(mean / (1.0 - mean)))
    model = EndModel([], learning_rate, num_leaves, base, X.shape[1])

    XT = np.ascontiguousarray(X.T)
    orderT = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T, dtype=np.int64)
    min_child = max(1, int(min_child_samples))
    raw = np.full(len(y), base)
    model.loss_trace.append(_logloss(y, _sigmoid(raw), w))
    for _ in range(rounds):
        p = _sigmoid(raw)
        g = y - p
        tree = _grow_tree(XT, orderT, g, w, num_leaves, max_depth, min_child)
        model.trees.append(tree)
        raw += learning_rate * tree.apply(X)
        model.loss_trace.append(_logloss(y, _sigmoid(raw), w))
    return model


def predict(model: EndModel, features: np.ndarray) -> np.ndarray:
    """Anomaly probability per row, strictly inside (0, 1)."""
    single = np.ndim(features) == 1
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    p = _sigmoid(model.decision_function(X))
    p = np.clip(p, 1e-15, 1 - 1e-15)
    return float(p[0]) if single else p


def save_model(model: EndModel, path) -> None:
    doc = {
        "format": MODEL_MAGIC,
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "num_leaves_limit": model.num_leaves_limit,
        "feature_count": model.feature_count,
        "loss_trace": model.loss_trace,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
            }
            for t in model.trees
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path) -> EndModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_MAGIC:
        raise ValueError(f"not a {MODEL_MAGIC} model file")
    trees = [
        Tree(
            np.asarray(t["feature"], dtype=np.int32),
            np.asarray(t["threshold"], dtype=np.float64),
            np.asarray(t["left"], dtype=np.int32),
            np.asarray(t["right"], dtype=np.int32),
            np.asarray(t["value"], dtype=np.float64),
        )
        for t in doc["trees"]
    ]
    return EndModel(
        trees,
        float(doc["learning_rate"]),
        int(doc["num_leaves_limit"]),
        float(doc["base_score"]),
        int(doc["feature_count"]),
        [float(x) for x in doc.get("loss_trace", [])],
    )
