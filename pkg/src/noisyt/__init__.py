"""Label-noise transition matrix estimation and loss-corrected training.

The package estimates the row-stochastic matrix of label-flip
probabilities from noisily labeled data, either directly from model
posteriors at anchor points or through a factored route that composes the
anchor read-off with a counted label-transition matrix.  The estimate can
then drive forward loss correction or importance reweighting during
classifier training.
"""

from .core import (
    BadEps,
    BadShape,
    Dataset,
    DimensionMismatch,
    EmptyDataset,
    EstimationReport,
    MissingCleanLabels,
    MissingNoisyLabels,
    NegativeEntry,
    NonFiniteLoss,
    NonStochasticRow,
    OracleUnavailable,
    SingularMatrix,
    TooFewSamples,
    TransitionMatrix,
    apply_transition,
    l1_matrix_distance,
    load_dataset_csv,
    save_dataset_csv,
    validate_transition_matrix,
)
from .corrections import forward_loss, reweight_loss, train_corrected
from .deltas import (
    DeltaReport,
    audit_error_bounds,
    measure_delta1,
    measure_delta2,
    measure_delta3,
)
from .estimators import (
    AnchorSet,
    TransitionEstimator,
    count_transitions,
    dual_t_estimate,
    find_anchors,
    intermediate_labels,
    t_estimate,
)
from .harness import SweepConfig, SweepResult, emit_csv, emit_plot, mix_seed, run_sweep
from .models import (
    FeedForwardClassifier,
    predict_label,
    predict_posterior,
    split_train_val,
    train_classifier,
)
from .noise import corrupt, noise_matrix, pair_matrix, symmetric_matrix
from .synth import (
    GaussianSpec,
    OraclePosteriorModel,
    generate,
    oracle_clean_posterior,
    oracle_noisy_posterior,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorSet",
    "BadEps",
    "BadShape",
    "Dataset",
    "DeltaReport",
    "DimensionMismatch",
    "EmptyDataset",
    "EstimationReport",
    "FeedForwardClassifier",
    "GaussianSpec",
    "MissingCleanLabels",
    "MissingNoisyLabels",
    "NegativeEntry",
    "NonFiniteLoss",
    "NonStochasticRow",
    "OraclePosteriorModel",
    "OracleUnavailable",
    "SingularMatrix",
    "SweepConfig",
    "SweepResult",
    "TooFewSamples",
    "TransitionEstimator",
    "TransitionMatrix",
    "apply_transition",
    "audit_error_bounds",
    "corrupt",
    "count_transitions",
    "dual_t_estimate",
    "emit_csv",
    "emit_plot",
    "find_anchors",
    "forward_loss",
    "generate",
    "intermediate_labels",
    "l1_matrix_distance",
    "load_dataset_csv",
    "measure_delta1",
    "measure_delta2",
    "measure_delta3",
    "mix_seed",
    "noise_matrix",
    "oracle_clean_posterior",
    "oracle_noisy_posterior",
    "pair_matrix",
    "predict_label",
    "predict_posterior",
    "reweight_loss",
    "run_sweep",
    "save_dataset_csv",
    "split_train_val",
    "symmetric_matrix",
    "t_estimate",
    "train_classifier",
    "train_corrected",
    "validate_transition_matrix",
]
