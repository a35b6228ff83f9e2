"""Random cut forest scored by collusive displacement.

Each tree is a random cut tree over a subset of shingled points: the cut
dimension is drawn proportionally to the bounding-box side length and the
cut position uniformly inside it.  Identical points collapse into one leaf.
A point's displacement in a tree is max over its ancestors of
|sibling subtree| / |own subtree|, and its score is the average over the
trees containing it.
"""

from __future__ import annotations

import numpy as np


def _shingle(values: np.ndarray, size: int) -> np.ndarray:
    """Rows of trailing windows; the head is padded with the first value."""
    if size == 1:
        return values.reshape(-1, 1)
    padded = np.concatenate([np.full(size - 1, values[0]), values])
    return np.lib.stride_tricks.sliding_window_view(padded, size).copy()


def _build(X: np.ndarray, idx: np.ndarray, rng: np.random.Generator):
    """Recursive random cut tree; returns (count, payload) nodes.

    Internal nodes are (count, dim, cut, left, right); leaves are
    (count, indices).
    """
    pts = X[idx]
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = hi - lo
    total = float(span.sum())
    if len(idx) == 1 or total <= 0.0:
        return (len(idx), idx)
    r = rng.random() * total
    dim = int(np.searchsorted(np.cumsum(span), r, side="right"))
    dim = min(dim, len(span) - 1)
    cut = lo[dim] + rng.random() * span[dim]
    mask = pts[:, dim] <= cut
    if mask.all() or not mask.any():
        # Degenerate floating-point cut; isolate the extreme point instead.
        extreme = np.argmax(pts[:, dim]) if mask.all() else np.argmin(pts[:, dim])
        mask = np.ones(len(idx), dtype=bool)
        mask[extreme] = False
    left = _build(X, idx[mask], rng)
    right = _build(X, idx[~mask], rng)
    return (len(idx), left, right)


def _collect_codisp(node, best: float, sums: np.ndarray, counts: np.ndarray):
    """Accumulate the max displacement ratio along each root-to-leaf path."""
    if len(node) == 2:
        count, idx = node
        sums[idx] += best
        counts[idx] += 1
        return
    _, left, right = node
    lc, rc = left[0], right[0]
    _collect_codisp(left, max(best, rc / lc), sums, counts)
    _collect_codisp(right, max(best, lc / rc), sums, counts)


def _tree_samples(n: int, trees: int, sample: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Per-tree point subsets that jointly cover every point."""
    sample = min(n, max(sample, -(-n // trees)))
    if sample >= n:
        return [np.arange(n) for _ in range(trees)]
    chunks: list[np.ndarray] = []
    while len(chunks) < trees:
        perm = rng.permutation(n)
        for start in range(0, n, sample):
            if len(chunks) >= trees:
                break
            if start + sample <= n:
                chunks.append(perm[start:start + sample])
            else:
                chunks.append(perm[n - sample:])
    return chunks


def score(values: np.ndarray, seed: int, shingle_size: int = 1,
          number_of_trees: int = 100, tree_sample_size: int = 256) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n < 2:
        raise ValueError("random cut forest needs at least 2 points")
    if shingle_size < 1 or number_of_trees < 1 or tree_sample_size < 2:
        raise ValueError("invalid forest parameters")
    X = _shingle(values, shingle_size)
    rng = np.random.default_rng(seed)
    sums = np.zeros(n)
    counts = np.zeros(n)
    for idx in _tree_samples(n, number_of_trees, tree_sample_size, rng):
        tree = _build(X, idx, rng)
        _collect_codisp(tree, 0.0, sums, counts)
    counts = np.maximum(counts, 1)
    return sums / counts
