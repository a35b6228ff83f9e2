"""Labeling-function generation by similarity search.

Every training point gets a dense representation built from its windowed
statistics features, standardized per dimension (zero-variance dimensions
dropped).  L1 distance on the standardized vectors drives candidate search;
the unit-normalized rows serve the inner-product diversity term.  An
annotation expands into a new labeling function voting its label on the
candidate set: neighbors whose distance falls below mean - tau * std of the
neighbor distances.

Large datasets use a partition-and-rescore index: k-means centroids define
partitions, a query scans the closest partitions, pre-ranks candidates by
squared euclidean distance, and exactly rescores a shortlist with L1.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .detectors import ABSTAIN, VoteSeries
from .features import LAYOUT, series_features

_CHUNK = 4096


@dataclass
class RepresentationMatrix:
    """Standardized per-point vectors plus their unit-normalized twins."""

    vectors: np.ndarray          # [n, k] standardized, used for L1 search
    unit_vectors: np.ndarray     # [n, k] row-normalized, used for inner products
    dims: int
    normalized: bool = True
    schema_hash: str = ""

    def __len__(self):
        return len(self.vectors)


def build_representation(dataset: Dataset, mode: str = "statistics",
                         feature_matrix: np.ndarray | None = None) -> RepresentationMatrix:
    """Statistics-based representations for every point of the dataset.

    ``feature_matrix`` may supply precomputed features (or an external
    embedding) with rows in dataset order; otherwise features are extracted
    here.
    """
    if mode != "statistics":
        raise ValueError(f"unknown representation mode {mode!r}")
    if feature_matrix is None:
        feature_matrix = np.vstack([series_features(s) for s in dataset.series])
    if len(feature_matrix) != dataset.point_count:
        raise ValueError("feature matrix rows must match dataset points")
    if len(feature_matrix) < 2:
        raise ValueError("need at least 2 points to standardize")

    mean = feature_matrix.mean(axis=0)
    std = feature_matrix.std(axis=0)
    keep = std > 1e-12
    if not keep.any():
        raise ValueError("all feature dimensions are constant; no representation possible")
    vectors = (feature_matrix[:, keep] - mean[keep]) / std[keep]
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    unit = vectors / np.maximum(norms, 1e-12)
    schema = hashlib.sha256(
        (",".join(LAYOUT.names) + "|" + np.array2string(keep)).encode()
    ).hexdigest()[:16]
    return RepresentationMatrix(vectors, unit, int(keep.sum()), True, schema)


def save_representation(rep: RepresentationMatrix, path) -> None:
    np.savez_compressed(
        path,
        vectors=rep.vectors,
        unit_vectors=rep.unit_vectors,
        dims=rep.dims,
        normalized=rep.normalized,
        schema_hash=rep.schema_hash,
    )


def load_representation(path) -> RepresentationMatrix:
    with np.load(path, allow_pickle=False) as doc:
        return RepresentationMatrix(
            doc["vectors"],
            doc["unit_vectors"],
            int(doc["dims"]),
            bool(doc["normalized"]),
            str(doc["schema_hash"]),
        )


def _l1_to_query(vectors: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = np.empty(len(vectors))
    for start in range(0, len(vectors), _CHUNK):
        stop = min(start + _CHUNK, len(vectors))
        out[start:stop] = np.abs(vectors[start:stop] - q).sum(axis=1)
    return out


def exact_l1_search(query_index: int, matrix: RepresentationMatrix, k: int):
    """The k nearest rows by L1 distance, ascending, ties by index.

    The query point itself is excluded; an exact duplicate of it is a valid
    first neighbor with distance zero.
    """
    n = len(matrix)
    if not 0 <= query_index < n:
        raise IndexError("query index out of range")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in [1, {n - 1}]")
    d = _l1_to_query(matrix.vectors, matrix.vectors[query_index])
    d[query_index] = np.inf
    order = np.lexsort((np.arange(n), d))[:k]
    return order, d[order]


def _kmeans(data: np.ndarray, k: int, seed: int, iters: int = 10):
    """Plain seeded Lloyd iterations with random-point init; empty clusters
    are reseeded from the points farthest from their centroid."""
    rng = np.random.default_rng(seed)
    n = len(data)
    centroids = data[rng.choice(n, size=k, replace=False)].copy()
    assign = np.zeros(n, dtype=np.int32)
    sq = (data * data).sum(axis=1)
    for _ in range(iters):
        dist, assign = _assign(data, sq, centroids)
        counts = np.bincount(assign, minlength=k)
        empty = np.nonzero(counts == 0)[0]
        if len(empty):
            far = np.argsort(-dist)[: len(empty)]
            for c, p in zip(empty, far):
                centroids[c] = data[p]
            dist, assign = _assign(data, sq, centroids)
            counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, data)
        nonzero = counts > 0
        centroids[nonzero] = sums[nonzero] / counts[nonzero, None]
    _, assign = _assign(data, sq, centroids)
    return centroids, assign


def _assign(data: np.ndarray, sq: np.ndarray, centroids: np.ndarray):
    """Nearest centroid per row by squared euclidean distance, chunked."""
    n = len(data)
    csq = (centroids * centroids).sum(axis=1)
    best = np.empty(n, dtype=np.int32)
    bestd = np.empty(n)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        d = sq[start:stop, None] - 2.0 * (data[start:stop] @ centroids.T) + csq[None, :]
        best[start:stop] = np.argmin(d, axis=1)
        bestd[start:stop] = d[np.arange(stop - start), best[start:stop]]
    return bestd, best


@dataclass
class AnnIndex:
    """Partitioned index over a representation matrix."""

    centroids: np.ndarray              # [leaves, k]
    ordered_rows: np.ndarray           # point ids grouped by partition
    partition_offsets: np.ndarray      # [leaves + 1] slice bounds into ordered_rows
    leaves: int
    leaves_to_search: int
    reorder_k: int

    def partition_of(self, row_position: int) -> int:
        return int(np.searchsorted(self.partition_offsets, row_position, side="right") - 1)


def build_ann_index(matrix: RepresentationMatrix, leaves: int = 2000,
                    training_sample: int = 250000, seed: int = 0,
                    leaves_to_search: int = 100, reorder_k: int = 5000) -> AnnIndex:
    """Cluster the rows into ``leaves`` partitions with seeded k-means."""
    n = len(matrix)
    if leaves < 1:
        raise ValueError("leaves must be at least 1")
    if leaves > n:
        raise ValueError("leaves cannot exceed the number of points")
    data = matrix.vectors
    if leaves == 1:
        centroids = data.mean(axis=0, keepdims=True)
        assign = np.zeros(n, dtype=np.int32)
    else:
        rng = np.random.default_rng(seed)
        sample_size = min(training_sample, n)
        sample = data[rng.choice(n, size=sample_size, replace=False)] if sample_size < n else data
        centroids, _ = _kmeans(sample, leaves, seed)
        sq = (data * data).sum(axis=1)
        _, assign = _assign(data, sq, centroids)
    order = np.argsort(assign, kind="stable").astype(np.int64)
    counts = np.bincount(assign, minlength=leaves)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return AnnIndex(centroids, order, offsets, leaves,
                    min(leaves_to_search, leaves), reorder_k)


def ann_search(index: AnnIndex, matrix: RepresentationMatrix, query_index: int, k: int):
    """Approximate k nearest by L1: scan the closest partitions, pre-rank by
    squared euclidean distance, then exactly rescore the shortlist."""
    n = len(matrix)
    if len(index.ordered_rows) != n:
        raise ValueError("index does not match the representation matrix")
    if not 0 <= query_index < n:
        raise IndexError("query index out of range")
    if k > index.reorder_k:
        raise ValueError("k cannot exceed reorder_k")
    q = matrix.vectors[query_index]
    cd = ((index.centroids - q) ** 2).sum(axis=1)
    probes = np.argsort(cd, kind="stable")[: index.leaves_to_search]
    parts = [
        index.ordered_rows[index.partition_offsets[p]:index.partition_offsets[p + 1]]
        for p in probes
    ]
    cand = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    cand = cand[cand != query_index]
    if len(cand) == 0:
        raise ValueError("no candidates found; empty index")
    rows = matrix.vectors[cand]
    approx = ((rows - q) ** 2).sum(axis=1)
    if len(cand) > index.reorder_k:
        short = np.argpartition(approx, index.reorder_k - 1)[: index.reorder_k]
        cand = cand[short]
        rows = rows[short]
    exact = np.abs(rows - q).sum(axis=1)
    kk = min(k, len(cand))
    order = np.lexsort((cand, exact))[:kk]
    return cand[order], exact[order]


@dataclass
class GeneratedLF:
    """One annotation expanded to its candidate set."""

    lf_id: str
    label: int
    member_indices: np.ndarray
    created_at_iteration: int = 0

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        self.member_indices = np.unique(np.asarray(self.member_indices, dtype=np.int64))

    def votes(self, n_points: int) -> VoteSeries:
        """Vote ``label`` on members, abstain everywhere else."""
        v = np.full(n_points, ABSTAIN, dtype=np.int8)
        v[self.member_indices] = self.label
        return VoteSeries(self.lf_id, v)


def generate_lf(annotation: tuple[int, int], neighbor_indices: np.ndarray,
                neighbor_distances: np.ndarray, tau: float,
                lf_id: str | None = None, iteration: int = 0) -> GeneratedLF:
    """Expand an annotated point into a labeling function.

    Members are the neighbors whose distance is strictly below
    mean - tau * std of the neighbor distances, plus the annotated point
    itself; when the threshold cuts below every distance the LF still exists
    and votes only on its own annotation.
    """
    point, label = annotation
    d = np.asarray(neighbor_distances, dtype=np.float64)
    idx = np.asarray(neighbor_indices, dtype=np.int64)
    if len(d) == 0:
        raise ValueError("need at least one neighbor")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    cutoff = d.mean() - tau * d.std()
    members = idx[d < cutoff]
    members = np.concatenate([members, [point]])
    return GeneratedLF(
        lf_id or f"generated_{iteration}_{point}",
        int(label),
        members,
        iteration,
    )


def append_lf_registry(path, lf: GeneratedLF) -> None:
    """Append one generated LF record to a JSON-lines registry file."""
    record = {
        "lf_id": lf.lf_id,
        "label": int(lf.label),
        "created_at_iteration": int(lf.created_at_iteration),
        "member_indices": lf.member_indices.tolist(),
    }
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record) + "\n")
