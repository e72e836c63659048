"""Streaming anomaly detection with an incrementally updated Isolation Distributional Kernel."""

from .exceptions import IDKSError, IngestionError, MetricError, ParameterError, StateError
from .kernel import (
    PartitionEnsemble,
    Partitioning,
    assign,
    assign_many,
    build_partitioning,
    compute_radii,
    replace_samples,
)
from .model import (
    ModelState,
    idk_similarity,
    init_model,
    load_snapshot,
    recount,
    save_snapshot,
    score,
    score_many,
    window_scores,
)
from .streaming import (
    ScoreRecord,
    StreamConfig,
    StreamResult,
    UpdateStats,
    offline_detect,
    run_stream,
    update_incremental,
    update_retrain,
)

from .data import LabeledDataset, TwoClusterSpec, gen_two_cluster, load_csv, shuffle_dataset
from .evaluation import psi_sweep, roc_auc, sliding_auc, uniformity_test

__version__ = "0.1.0"
