"""Dataset model, CSV ingestion, train/test splitting, and segment extraction.

The on-disk format is delimiter-separated text with a header row and columns
``series_id,timestamp,value[,label]``.  In memory a dataset is a list of
array-backed series plus the per-dataset parameters that the rest of the
system reads (anomaly percentage, weak supervision ratio, segment length,
neighbor count).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_SCHEMA = {
    "series_id": "series_id",
    "timestamp": "timestamp",
    "value": "value",
    "label": "label",
}

# How many offending rows to list before truncating an error report.
_MAX_REPORTED_ROWS = 20


class DatasetFormatError(ValueError):
    """An input file violates the dataset format (bad rows are listed by number)."""


@dataclass(frozen=True)
class Point:
    """One observation; ``truth`` is None when no ground truth is known."""

    timestamp: int
    value: float
    truth: int | None = None


class Series:
    """A univariate series with strictly increasing integer timestamps.

    Values are float64 and always finite; ``truth`` is an int8 array in
    {0,1} aligned with ``values``, or None when the series is unlabeled.
    """

    def __init__(self, id: str, timestamps, values, truth=None):
        self.id = str(id)
        self.timestamps = np.asarray(timestamps, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        if truth is not None:
            truth = np.asarray(truth, dtype=np.int8)
        self.truth = truth
        self._validate()

    def _validate(self):
        if self.values.ndim != 1 or self.timestamps.ndim != 1:
            raise ValueError("series arrays must be one-dimensional")
        if len(self.values) != len(self.timestamps):
            raise ValueError("timestamps and values length mismatch")
        if len(self.values) < 1:
            raise ValueError("series must contain at least one point")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"series {self.id!r} contains non-finite values")
        if np.any(np.diff(self.timestamps) <= 0):
            raise ValueError(f"series {self.id!r} timestamps are not strictly increasing")
        if self.truth is not None:
            if len(self.truth) != len(self.values):
                raise ValueError("truth length mismatch")
            if not np.all((self.truth == 0) | (self.truth == 1)):
                raise ValueError(f"series {self.id!r} labels outside {{0,1}}")

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        labeled = "labeled" if self.truth is not None else "unlabeled"
        return f"Series(id={self.id!r}, n={len(self)}, {labeled})"

    def point(self, i: int) -> Point:
        truth = int(self.truth[i]) if self.truth is not None else None
        return Point(int(self.timestamps[i]), float(self.values[i]), truth)


@dataclass
class Dataset:
    """A collection of series plus the per-dataset tuning parameters."""

    series: list[Series]
    anomaly_percentage: float = 1.0
    weak_supervision_ratio: float = 0.1
    segment_length: int = 400
    neighbor_count: int = 200
    _offsets: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.anomaly_percentage < 100:
            raise ValueError("anomaly_percentage must lie in (0, 100)")
        if not 0 < self.weak_supervision_ratio <= 1:
            raise ValueError("weak_supervision_ratio must lie in (0, 1]")
        if self.segment_length < 1 or self.neighbor_count < 1:
            raise ValueError("segment_length and neighbor_count must be positive")
        ids = [s.id for s in self.series]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate series ids")

    # Global point indexing: series in list order, points in series order.

    @property
    def offsets(self) -> np.ndarray:
        if self._offsets is None or len(self._offsets) != len(self.series) + 1:
            self._offsets = np.concatenate(
                [[0], np.cumsum([len(s) for s in self.series])]
            ).astype(np.int64)
        return self._offsets

    @property
    def point_count(self) -> int:
        return int(self.offsets[-1])

    def series_by_id(self, series_id: str) -> Series:
        for s in self.series:
            if s.id == series_id:
                return s
        raise KeyError(f"unknown series id {series_id!r}")

    def locate(self, global_index: int) -> tuple[Series, int]:
        """Map a global point index to (series, local index)."""
        if not 0 <= global_index < self.point_count:
            raise IndexError(f"global index {global_index} out of range")
        si = int(np.searchsorted(self.offsets, global_index, side="right") - 1)
        return self.series[si], int(global_index - self.offsets[si])

    def global_index(self, series_id: str, local_index: int) -> int:
        for si, s in enumerate(self.series):
            if s.id == series_id:
                if not 0 <= local_index < len(s):
                    raise IndexError("local index out of range")
                return int(self.offsets[si] + local_index)
        raise KeyError(f"unknown series id {series_id!r}")

    def all_values(self) -> np.ndarray:
        return np.concatenate([s.values for s in self.series])

    def has_truth(self) -> bool:
        return all(s.truth is not None for s in self.series)

    def all_truth(self) -> np.ndarray:
        if not self.has_truth():
            raise ValueError("dataset has series without ground truth")
        return np.concatenate([s.truth for s in self.series])

    def params_dict(self) -> dict:
        return {
            "anomaly_percentage": self.anomaly_percentage,
            "weak_supervision_ratio": self.weak_supervision_ratio,
            "segment_length": self.segment_length,
            "neighbor_count": self.neighbor_count,
        }


@dataclass(frozen=True)
class Segment:
    """An inclusive index window around a center point of one series."""

    series_id: str
    start_index: int
    end_index: int
    center_index: int

    def __post_init__(self):
        if not self.start_index <= self.center_index <= self.end_index:
            raise ValueError("segment center outside its bounds")

    def __len__(self):
        return self.end_index - self.start_index + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start_index, self.end_index + 1)


def load_dataset(path, schema: dict | None = None, **params) -> Dataset:
    """Load a dataset from delimiter-separated text.

    ``schema`` maps the logical column names (series_id, timestamp, value,
    label) to the file's column names; by default they are used verbatim.
    Extra keyword arguments become dataset parameters (anomaly_percentage,
    weak_supervision_ratio, segment_length, neighbor_count).

    Raises DatasetFormatError listing the offending row numbers when rows
    cannot be parsed, timestamps collide, values are non-finite, or labels
    fall outside {0,1}.
    """
    colmap = dict(DEFAULT_SCHEMA)
    if schema:
        colmap.update(schema)

    rows_by_series: dict[str, list[tuple[int, float, int]]] = {}
    errors: list[str] = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise DatasetFormatError(f"dataset file not found: {path}")
    with fh:
        sample = fh.read(8192)
        if not sample.strip():
            raise DatasetFormatError(f"dataset file is empty: {path}")
        try:
            dialect = csv.Sniffer().sniff(sample, delimiters=",;\t")
        except csv.Error:
            dialect = csv.excel
        fh.seek(0)
        reader = csv.DictReader(fh, dialect=dialect)
        if reader.fieldnames is None:
            raise DatasetFormatError("missing header row")
        for col in ("series_id", "timestamp", "value"):
            if colmap[col] not in reader.fieldnames:
                raise DatasetFormatError(f"missing required column {colmap[col]!r}")
        has_label = colmap["label"] in reader.fieldnames

        for rownum, row in enumerate(reader, start=2):
            sid = row.get(colmap["series_id"])
            if sid is None or sid == "":
                errors.append(f"row {rownum}: empty series_id")
                continue
            try:
                ts = int(row[colmap["timestamp"]])
            except (TypeError, ValueError):
                errors.append(f"row {rownum}: unparseable timestamp {row.get(colmap['timestamp'])!r}")
                continue
            try:
                value = float(row[colmap["value"]])
            except (TypeError, ValueError):
                errors.append(f"row {rownum}: unparseable value {row.get(colmap['value'])!r}")
                continue
            if not np.isfinite(value):
                errors.append(f"row {rownum}: non-finite value {value!r}")
                continue
            label = -1
            if has_label:
                raw = row.get(colmap["label"], "")
                if raw not in ("", None):
                    try:
                        label = int(float(raw))
                    except (TypeError, ValueError):
                        errors.append(f"row {rownum}: unparseable label {raw!r}")
                        continue
                    if label not in (0, 1):
                        errors.append(f"row {rownum}: label {label} outside {{0,1}}")
                        continue
            rows_by_series.setdefault(sid, []).append((ts, value, label, rownum))

    # Duplicate timestamps within a series are format errors, not data.
    series = []
    for sid, rows in rows_by_series.items():
        rows.sort(key=lambda r: (r[0], r[3]))
        seen = {}
        for ts, _, _, rownum in rows:
            if ts in seen:
                errors.append(
                    f"row {rownum}: duplicate timestamp {ts} in series {sid!r}"
                    f" (first at row {seen[ts]})"
                )
            else:
                seen[ts] = rownum
        if errors:
            continue
        ts_arr = np.array([r[0] for r in rows], dtype=np.int64)
        val_arr = np.array([r[1] for r in rows], dtype=np.float64)
        labels = [r[2] for r in rows]
        truth = None
        if any(l >= 0 for l in labels):
            if any(l < 0 for l in labels):
                bad = rows[labels.index(-1)][3]
                errors.append(f"row {bad}: series {sid!r} mixes labeled and unlabeled points")
            else:
                truth = np.array(labels, dtype=np.int8)
        series.append(Series(sid, ts_arr, val_arr, truth))

    if errors:
        shown = errors[:_MAX_REPORTED_ROWS]
        more = len(errors) - len(shown)
        suffix = f"\n... and {more} more" if more > 0 else ""
        raise DatasetFormatError("bad rows in dataset file:\n" + "\n".join(shown) + suffix)
    if not series:
        raise DatasetFormatError("dataset file contains no data rows")
    return Dataset(series=series, **params)


def export_dataset(dataset: Dataset, path) -> None:
    """Write a dataset back to CSV; the label column is included only when
    every series carries ground truth."""
    with_labels = dataset.has_truth()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["series_id", "timestamp", "value"]
        if with_labels:
            header.append("label")
        writer.writerow(header)
        for s in dataset.series:
            for i in range(len(s)):
                row = [s.id, int(s.timestamps[i]), repr(float(s.values[i]))]
                if with_labels:
                    row.append(int(s.truth[i]))
                writer.writerow(row)


def split_train_test(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Partition the dataset at whole-series granularity with a seeded shuffle.

    The same seed always produces the same partition; each split keeps the
    original series order.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    n = len(dataset.series)
    if n < 2:
        raise ValueError("need at least 2 series to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)
    test_idx = set(order[:n_test].tolist())
    train_series = [s for i, s in enumerate(dataset.series) if i not in test_idx]
    test_series = [s for i, s in enumerate(dataset.series) if i in test_idx]
    params = dataset.params_dict()
    return (
        Dataset(series=train_series, **params),
        Dataset(series=test_series, **params),
    )


def extract_segment(series: Series, center_index: int, length: int) -> Segment:
    """Window of at most ``length`` points centered on ``center_index``.

    When the window is not clamped by a series boundary the center sits at
    offset ``length // 2`` inside it; clamping shifts the window but the
    center always stays inside.
    """
    n = len(series)
    if not 0 <= center_index < n:
        raise IndexError(f"center index {center_index} out of range for series of length {n}")
    if length < 1:
        raise ValueError("segment length must be positive")
    start = center_index - length // 2
    end = start + length - 1
    if start < 0:
        start = 0
        end = min(length - 1, n - 1)
    elif end > n - 1:
        end = n - 1
        start = max(0, end - length + 1)
    return Segment(series.id, start, end, center_index)
