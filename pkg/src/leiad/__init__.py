"""Label-efficient interactive time-series anomaly detection.

Unsupervised detectors seed labeling functions, a generative label model
turns their votes into weak training labels, a boosted-tree end model learns
from those, and a hybrid active-learning strategy asks a human (or simulated
oracle) to annotate one segment per iteration; each annotation expands into
a new labeling function by similarity search.
"""

from .config import load_config, make_config
from .data import (Dataset, DatasetFormatError, Point, Segment, Series,
                   extract_segment, load_dataset, split_train_test)
from .pipeline import IterationState, Metrics, Oracle, simulate, warm_up
from .synthetic import synthetic_benchmark

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DatasetFormatError", "Point", "Segment", "Series",
    "extract_segment", "load_dataset", "split_train_test",
    "IterationState", "Metrics", "Oracle", "simulate", "warm_up",
    "load_config", "make_config", "synthetic_benchmark", "__version__",
]
