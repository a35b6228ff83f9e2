"""Interaction-loop orchestration.

Warm-up seeds the loop from the unsupervised detectors: their votes form
the initial labeling-function set, the label model turns votes into weak
labels, and the end model trains on those.  Every iteration then queries one
segment, folds the annotations into the labeled set, expands the center
annotation into a new labeling function, refits the label model, reselects
weak labels (double the labeled count, corrected against known labels),
retrains the end model, and evaluates.

Detector scores and feature matrices are content-addressed in a process
cache: they depend only on (series values, detector config, detector seed),
so repeated simulations reuse them.
"""

from __future__ import annotations

import csv
import json
import warnings
import zlib
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import active, gbt, lfgen
from .config import make_config
from .data import Dataset, Segment, extract_segment, split_train_test
from .detectors import (DetectorConfig, ScoreSeries, VoteSeries, concat_votes,
                        fit_score, normalize_scores, scores_to_lf_votes)
from .features import series_features
from .labelmodel import (LabelModelParams, VoteMatrix, WeakLabelSet,
                         assemble_vote_matrix, fit_generative,
                         initial_weak_budget, iteration_weak_budget, posterior,
                         select_weak_labels)
from .metrics import ap_curve_area, average_precision, roc_auc

SOURCE_ANNOTATED = "annotated"
SOURCE_INFERRED = "inferred"

STRATEGIES = ("hybrid", "random", "no_warmup", "no_lfgen")

_SCORE_CACHE: dict = {}
_FEATURE_CACHE: dict = {}


@contextmanager
def _expected_degenerate_fits():
    """Single-class weak sets are routine early on; keep their warning quiet."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        yield


def _series_fingerprint(series) -> tuple:
    return (series.id, len(series), zlib.crc32(series.values.tobytes()))


def _detector_series_seed(base_seed: int, series_id: str) -> int:
    return (int(base_seed) * 100003 + zlib.crc32(series_id.encode())) % (2 ** 31)


def cached_fit_score(config: DetectorConfig, series, seed: int) -> ScoreSeries:
    key = (config.kind, tuple(sorted(config.resolved().items())),
           _series_fingerprint(series), seed)
    if key not in _SCORE_CACHE:
        _SCORE_CACHE[key] = fit_score(config, series, seed)
    return _SCORE_CACHE[key]


def cached_series_features(series) -> np.ndarray:
    key = _series_fingerprint(series)
    if key not in _FEATURE_CACHE:
        _FEATURE_CACHE[key] = series_features(series)
    return _FEATURE_CACHE[key]


def dataset_features(dataset: Dataset) -> np.ndarray:
    return np.vstack([cached_series_features(s) for s in dataset.series])


def detector_configs(cfg: dict) -> list[DetectorConfig]:
    return [DetectorConfig(kind, dict(params)) for kind, params in cfg["detectors"].items()]


@dataclass
class Metrics:
    average_precision: float
    roc_auc: float
    ap_auc_running: float

    def __post_init__(self):
        for name in ("average_precision", "roc_auc"):
            v = getattr(self, name)
            if not (np.isfinite(v) and 0.0 <= v <= 1.0):
                raise ValueError(f"{name} outside [0, 1]: {v}")


@dataclass
class LFRecord:
    lf_id: str
    kind: str                      # "detector" or "generated"
    label: int | None = None
    member_indices: np.ndarray | None = None
    created_at_iteration: int = 0


@dataclass
class Oracle:
    """Simulated annotator answering queries from stored ground truth."""

    kind: str = "simulated"
    truth: np.ndarray | None = None

    def annotate(self, segment_globals: np.ndarray, predicted: np.ndarray):
        if self.truth is None:
            raise ValueError("simulated oracle needs ground truth")
        labels = self.truth[segment_globals].astype(np.int8)
        sources = [SOURCE_ANNOTATED] * len(segment_globals)
        return labels, sources


@dataclass
class IterationState:
    """Everything carried between interaction rounds."""

    train: Dataset
    test: Dataset | None
    config: dict
    seed: int
    iteration: int = 0
    lf_registry: list[LFRecord] = field(default_factory=list)
    vote_matrix: VoteMatrix | None = None
    labeled_set: dict[int, tuple[int, str]] = field(default_factory=dict)
    label_model: LabelModelParams | None = None
    end_model: gbt.EndModel | None = None
    weak_labels: WeakLabelSet | None = None
    metrics_history: list[Metrics] = field(default_factory=list)
    features_train: np.ndarray | None = None
    features_test: np.ndarray | None = None
    representation: lfgen.RepresentationMatrix | None = None
    ann_index: lfgen.AnnIndex | None = None
    normalized_scores: np.ndarray | None = None   # [n_train, n_detectors]
    train_probs: np.ndarray | None = None
    generate_lfs: bool = True

    @property
    def class_prior(self) -> float:
        return self.train.anomaly_percentage / 100.0

    def labeled_truth(self) -> dict[int, int]:
        return {g: lab for g, (lab, _src) in self.labeled_set.items()}

    def labeled_sources(self) -> dict[int, str]:
        return {g: src for g, (_lab, src) in self.labeled_set.items()}


def _label_model_seed(seed: int, iteration: int) -> int:
    return (seed * 7919 + iteration * 104729 + 17) % (2 ** 31)


def _fit_label_model(state: IterationState) -> None:
    cfg = state.config["label_model"]
    state.label_model = fit_generative(
        state.vote_matrix,
        learning_rate=cfg["learning_rate"],
        epochs=cfg["training_epoch"],
        seed=_label_model_seed(state.seed, state.iteration),
        class_prior=state.class_prior,
        gibbs_samples_per_step=cfg["gibbs_samples_per_step"],
        batch_size=cfg["batch_size"],
    )


def _select_weak(state: IterationState, budget: int) -> None:
    n = state.train.point_count
    budget = max(1, min(budget, n))
    post = posterior(state.label_model, state.vote_matrix)
    state.weak_labels = select_weak_labels(
        post, budget, state.train.anomaly_percentage, state.labeled_truth()
    )


def _train_end_model(state: IterationState) -> None:
    cfg = state.config["end_model"]
    weak = state.weak_labels
    if weak is None or len(weak) == 0:
        X = np.zeros((0, state.features_train.shape[1]))
        y = np.zeros(0)
        weights = None
    else:
        X = state.features_train[weak.global_indices]
        y = weak.labels
        weights = np.where(
            np.asarray(weak.sources) == "weak", cfg["weak_label_weight"], 1.0
        )
    with _expected_degenerate_fits():
        state.end_model = gbt.train_end_model(
            X, y,
            rounds=cfg["rounds"],
            learning_rate=cfg["learning_rate"],
            num_leaves=cfg["number_of_leaves"],
            min_child_samples=cfg["min_child_samples"],
            sample_weight=weights,
            class_prior=state.class_prior,
            seed=state.seed,
        )
    state.train_probs = gbt.predict(state.end_model, state.features_train)


def evaluate(end_model: gbt.EndModel, test: Dataset,
             features: np.ndarray | None = None) -> Metrics:
    """AP and ROC AUC of the end model on a ground-truth test set."""
    if not test.has_truth():
        raise ValueError("test set must carry ground truth")
    if features is None:
        features = dataset_features(test)
    truth = test.all_truth()
    scores = gbt.predict(end_model, features)
    return Metrics(
        average_precision(scores, truth),
        roc_auc(scores, truth),
        0.0,
    )


def _append_metrics(state: IterationState) -> None:
    if state.test is None:
        return
    m = evaluate(state.end_model, state.test, state.features_test)
    history_ap = [h.average_precision for h in state.metrics_history] + [m.average_precision]
    m.ap_auc_running = ap_curve_area(history_ap)
    state.metrics_history.append(m)


def _init_state(train: Dataset, test: Dataset | None, config: dict, seed: int) -> IterationState:
    state = IterationState(train=train, test=test, config=config, seed=seed)
    state.features_train = dataset_features(train)
    if test is not None:
        state.features_test = dataset_features(test)
    state.representation = lfgen.build_representation(
        train, feature_matrix=state.features_train
    )
    lf_cfg = config["lf_generator"]
    use_ann = lf_cfg["search"] == "ann" or (
        lf_cfg["search"] == "auto" and train.point_count > 200_000
    )
    if use_ann:
        state.ann_index = lfgen.build_ann_index(
            state.representation,
            leaves=min(lf_cfg["number_of_leaves"], train.point_count),
            training_sample=lf_cfg["training_sample_size"],
            seed=seed,
            leaves_to_search=lf_cfg["number_of_leaves_to_search"],
            reorder_k=lf_cfg["reorder"],
        )
    return state


def warm_up(train: Dataset, config: dict | None = None, seed: int = 0,
            test: Dataset | None = None) -> IterationState:
    """Run the detectors, fit label and end models, record iteration 0."""
    if train.point_count == 0 or not train.series:
        raise ValueError("empty training dataset")
    config = config or make_config()
    state = _init_state(train, test, config, seed)

    vote_cfg = config["votes"]
    det_seed = config["pipeline"]["detector_seed"]
    columns: list[VoteSeries] = []
    norm_cols = []
    for det in detector_configs(config):
        per_series_votes = []
        per_series_norm = []
        for series in train.series:
            sc = cached_fit_score(det, series, _detector_series_seed(det_seed, series.id))
            per_series_votes.append(
                scores_to_lf_votes(sc, vote_cfg["contamination"], vote_cfg["abstain_quantile"])
            )
            per_series_norm.append(normalize_scores(sc).scores)
        columns.append(concat_votes(f"uad_{det.kind}", per_series_votes))
        norm_cols.append(np.concatenate(per_series_norm))
        state.lf_registry.append(LFRecord(f"uad_{det.kind}", "detector"))
    state.normalized_scores = np.column_stack(norm_cols)
    state.vote_matrix = assemble_vote_matrix(columns, train)

    _fit_label_model(state)
    _select_weak(state, initial_weak_budget(train.point_count,
                                            train.weak_supervision_ratio))
    _train_end_model(state)
    _append_metrics(state)
    return state


def cold_start(train: Dataset, config: dict | None = None, seed: int = 0,
               test: Dataset | None = None) -> IterationState:
    """No-warm-up variant: empty LF set and weak set, constant-prior model."""
    config = config or make_config()
    state = _init_state(train, test, config, seed)
    state.normalized_scores = None
    state.vote_matrix = None
    state.weak_labels = None
    with _expected_degenerate_fits():
        state.end_model = gbt.train_end_model(
            np.zeros((0, state.features_train.shape[1])), np.zeros(0),
            class_prior=state.class_prior, seed=seed,
        )
    state.train_probs = gbt.predict(state.end_model, state.features_train)
    _append_metrics(state)
    return state


def query_components(state: IterationState) -> active.QueryComponents:
    """The five per-point score arrays over the training set."""
    n = state.train.point_count
    if state.vote_matrix is not None:
        agreement = active.matrix_agreement(state.vote_matrix.matrix)
        abstention = active.matrix_abstention(state.vote_matrix.matrix)
    else:
        agreement = np.zeros(n)
        abstention = np.zeros(n)
    uncertainty = active.binary_entropy(state.train_probs)
    labeled = sorted(state.labeled_set)
    if labeled:
        mean_rep = state.representation.unit_vectors[labeled].mean(axis=0)
        diversity = 1.0 - state.representation.unit_vectors @ mean_rep
    else:
        diversity = np.ones(n)
    if state.normalized_scores is not None:
        anomaly_prob = state.normalized_scores.mean(axis=1)
    else:
        anomaly_prob = np.zeros(n)
    return active.QueryComponents(agreement, abstention, uncertainty,
                                  diversity, anomaly_prob)


def _query_weights(config: dict) -> active.QueryWeights:
    a = config["active"]
    return active.QueryWeights(a["alpha"], a["beta"], a["gamma"], a["delta"])


def select_query_point(state: IterationState, strategy: str = "hybrid",
                       rng: np.random.Generator | None = None) -> int:
    """Global index of the next annotation center."""
    labeled = state.labeled_set.keys()
    if strategy == "random":
        unlabeled = np.setdiff1d(
            np.arange(state.train.point_count), np.fromiter(labeled, dtype=np.int64, count=len(labeled))
        )
        if len(unlabeled) == 0:
            raise ValueError("all points are labeled")
        assert rng is not None
        return int(rng.choice(unlabeled))
    return active.select_next(query_components(state), _query_weights(state.config), labeled)


def segment_for_point(state: IterationState, global_index: int) -> Segment:
    series, local = state.train.locate(global_index)
    return extract_segment(series, local, state.train.segment_length)


def segment_global_indices(state: IterationState, segment: Segment) -> np.ndarray:
    base = state.train.global_index(segment.series_id, segment.start_index)
    return np.arange(base, base + len(segment), dtype=np.int64)


def _search_neighbors(state: IterationState, center: int):
    k = min(state.train.neighbor_count, state.train.point_count - 1)
    if state.ann_index is not None:
        return lfgen.ann_search(state.ann_index, state.representation, center, k)
    return lfgen.exact_l1_search(center, state.representation, k)


def apply_annotations(state: IterationState, segment: Segment,
                      labels: np.ndarray, sources: list[str]) -> IterationState:
    """Steps after an annotation arrives: extend the labeled set, generate a
    labeling function from the center annotation, refit the label model,
    reselect weak labels, retrain the end model, and record metrics."""
    seg_globals = segment_global_indices(state, segment)
    if len(labels) != len(seg_globals):
        raise ValueError("annotation length does not match the segment")
    for g, lab, src in zip(seg_globals, labels, sources):
        state.labeled_set[int(g)] = (int(lab), src)

    center_global = state.train.global_index(segment.series_id, segment.center_index)
    center_label = state.labeled_set[center_global][0]

    if state.generate_lfs:
        idx, dist = _search_neighbors(state, center_global)
        lf = lfgen.generate_lf(
            (center_global, center_label), idx, dist,
            tau=state.config["lf_generator"]["threshold_tau"],
            iteration=state.iteration + 1,
        )
        votes = lf.votes(state.train.point_count)
        state.lf_registry.append(
            LFRecord(lf.lf_id, "generated", lf.label, lf.member_indices,
                     state.iteration + 1)
        )
        if state.vote_matrix is None:
            state.vote_matrix = assemble_vote_matrix([votes], state.train)
        else:
            state.vote_matrix = state.vote_matrix.with_column(votes)

    state.iteration += 1
    if state.vote_matrix is not None:
        _fit_label_model(state)
        _select_weak(state, iteration_weak_budget(len(state.labeled_set)))
    else:
        state.weak_labels = None
    _train_end_model(state)
    _append_metrics(state)
    return state


def run_iteration(state: IterationState, oracle: Oracle,
                  strategy: str = "hybrid",
                  rng: np.random.Generator | None = None) -> IterationState:
    """One full interaction round with the given oracle.

    If the oracle raises, the state is left unchanged.
    """
    center = select_query_point(state, strategy, rng)
    segment = segment_for_point(state, center)
    seg_globals = segment_global_indices(state, segment)
    predicted = (state.train_probs[seg_globals] > 0.5).astype(np.int8)
    labels, sources = oracle.annotate(seg_globals, predicted)
    return apply_annotations(state, segment, labels, sources)


def simulate(dataset: Dataset, iterations: int, seed: int,
             strategy: str = "hybrid", config: dict | None = None) -> IterationState:
    """Seeded end-to-end run with the simulated oracle; returns the final
    state whose metrics history is the curve for iterations 0..N."""
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if not dataset.has_truth():
        raise ValueError("simulation needs ground truth")
    config = config or make_config()

    train, test = split_train_test(dataset, config["pipeline"]["test_fraction"], seed)
    if strategy == "no_warmup":
        state = cold_start(train, config, seed, test)
    else:
        state = warm_up(train, config, seed, test)
    state.generate_lfs = strategy != "no_lfgen"

    oracle = Oracle("simulated", train.all_truth())
    rng = np.random.default_rng([seed, 9001]) if strategy == "random" else None
    for _ in range(iterations):
        unlabeled = state.train.point_count - len(state.labeled_set)
        if unlabeled <= 0:
            break
        run_iteration(state, oracle, strategy if strategy == "random" else "hybrid", rng)
    return state


def write_metrics_csv(state: IterationState, path) -> None:
    """Metrics curve as CSV: iteration, ap, roc_auc, ap_auc."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "ap", "roc_auc", "ap_auc"])
        for i, m in enumerate(state.metrics_history):
            writer.writerow([i, repr(m.average_precision), repr(m.roc_auc),
                             repr(m.ap_auc_running)])


def write_labeled_set_csv(state: IterationState, path) -> None:
    """Labeled-set export: series_id, timestamp, label, source."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series_id", "timestamp", "label", "source"])
        for g in sorted(state.labeled_set):
            label, source = state.labeled_set[g]
            series, local = state.train.locate(g)
            writer.writerow([series.id, int(series.timestamps[local]), label, source])


def write_lf_registry(state: IterationState, path) -> None:
    """Registry of all labeling functions as JSON lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in state.lf_registry:
            doc = {"lf_id": rec.lf_id, "kind": rec.kind,
                   "created_at_iteration": rec.created_at_iteration}
            if rec.kind == "generated":
                doc["label"] = int(rec.label)
                doc["member_indices"] = rec.member_indices.tolist()
            fh.write(json.dumps(doc) + "\n")
