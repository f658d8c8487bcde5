"""Label-noise detection toolkit: confident learning, training-dynamics
cartography, and a synthetic-noise experiment harness."""

from .data import (
    AlignmentError,
    ClassMap,
    DataError,
    Example,
    LabeledDataset,
    ProbMatrix,
    SplitSpec,
    load_dataset,
    save_dataset,
    stratified_split,
    validate_prob_matrix,
)
from .model import (
    DynamicsLog,
    ModelParams,
    NumericError,
    TrainConfig,
    featurize,
    oof_predict,
    predict_proba,
    record_dynamics,
    train,
)
from .confident import class_thresholds, confident_joint, find_label_issues
from .cartography import categorize, compute_metrics, corpus_stats, knee_threshold
from .evaluation import apply_filter, delta_report, f1_macro, random_control
from .noise import NoiseSpec, detection_metrics, inject_noise, make_synthetic
from .experiment import ExperimentConfig, run_experiment

__version__ = "0.1.0"
