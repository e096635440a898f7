"""Graph-regularized low-rank plus temporally smooth sparse tensor decomposition.

Decomposes spatiotemporal count tensors (hour x day x week x zone) into a
low-rank normal-activity part and a sparse anomaly part, scores the sparse
part fiber-by-fiber, and evaluates detection quality against ground truth.
"""

__version__ = "0.1.0"

from .evaluation import (
    Event,
    EventDetectionTable,
    PipelineSpec,
    RocResult,
    SweepResult,
    TrialStats,
    event_detection,
    roc_auc,
    run_trials,
    sweep,
)
from .graphs import ModeGraph, build_all_mode_graphs, build_mode_graph, laplacian_energy
from .ingest import DatasetStats, IngestResult, ZoneIndex, dataset_stats, ingest
from .prox import (
    CachedInverse,
    DiffOperator,
    build_diff_operator,
    precompute_graph_inverse,
    precompute_tv_inverse,
    soft_threshold,
    svt,
)
from .scoring import ScoreTensor, ee_fiber_scores, lof_fiber_scores, score_tensor, top_k_labels
from .solver import (
    DecompositionResult,
    IterationRecord,
    NonFiniteIterateError,
    SolverConfig,
    SolverState,
    default_hyperparameters,
    objective,
    solve,
)
from .storage import load_tensor, save_tensor
from .synth import SyntheticInstance, SyntheticSpec, builtin_base_profile, generate
from .tensors import (
    cat_n,
    fold,
    frobenius_norm,
    full_support,
    l1_norm,
    mode_n_product,
    project,
    project_complement,
    unfold,
)

__all__ = [
    "__version__",
    "Event",
    "EventDetectionTable",
    "PipelineSpec",
    "RocResult",
    "SweepResult",
    "TrialStats",
    "event_detection",
    "roc_auc",
    "run_trials",
    "sweep",
    "ModeGraph",
    "build_all_mode_graphs",
    "build_mode_graph",
    "laplacian_energy",
    "DatasetStats",
    "IngestResult",
    "ZoneIndex",
    "dataset_stats",
    "ingest",
    "CachedInverse",
    "DiffOperator",
    "build_diff_operator",
    "precompute_graph_inverse",
    "precompute_tv_inverse",
    "soft_threshold",
    "svt",
    "ScoreTensor",
    "ee_fiber_scores",
    "lof_fiber_scores",
    "score_tensor",
    "top_k_labels",
    "DecompositionResult",
    "IterationRecord",
    "NonFiniteIterateError",
    "SolverConfig",
    "SolverState",
    "default_hyperparameters",
    "objective",
    "solve",
    "load_tensor",
    "save_tensor",
    "SyntheticInstance",
    "SyntheticSpec",
    "builtin_base_profile",
    "generate",
    "cat_n",
    "fold",
    "frobenius_norm",
    "full_support",
    "l1_norm",
    "mode_n_product",
    "project",
    "project_complement",
    "unfold",
]
