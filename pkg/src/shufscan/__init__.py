"""shufscan: order-free anomaly scoring for frame sequences.

A frame is scored anomalous when a simple classifier can tell it apart
from the rest of the sequence.  The engine repeatedly shuffles the frame
order, slides a labeling window over each shuffle, trains a small
l2-regularized logistic regression per window placement, and averages
each frame's predicted probability into an odds score.  Companion tools
pick the shuffle count from a Chernoff bound, gauge window size with an
empirical Rademacher statistic, generate synthetic benchmark sequences,
and evaluate scores with ROC/AUC.
"""

__version__ = "1.0.0"

from .classifier import (
    LinearModel,
    SingleClassError,
    TrainResult,
    TrainSpec,
    gradient,
    loss,
    predict_proba,
    train,
)
from .detector import (
    DetectorConfig,
    ScoreTable,
    SequenceTooShortError,
    Split,
    SplitDiagnostic,
    detect,
    enumerate_splits,
    export_scores,
    generate_permutations,
    load_scores,
    score_shuffle,
)
from .evaluation import (
    GroundTruth,
    RocCurve,
    auc,
    load_ground_truth,
    moving_average,
    roc_curve,
    save_ground_truth,
    write_roc_csv,
)
from .ingest import (
    FeatureFormatError,
    FeatureSequence,
    JacobiConvergenceError,
    PcaModel,
    RankDeficientError,
    StandardizerParams,
    apply_standardizer,
    fit_pca,
    fit_standardizer,
    load_features,
    project,
    save_features,
)
from .rng import SplitMix64, derive_seed
from .synth import ToySpec, default_toy_plan, make_toy_sequence
from .theory import (
    RademacherEstimate,
    ShuffleBoundQuery,
    bernoulli_kl,
    chernoff_failure_prob,
    empirical_rademacher,
    required_shuffles,
)

__all__ = [
    "__version__",
    "DetectorConfig",
    "FeatureFormatError",
    "FeatureSequence",
    "GroundTruth",
    "JacobiConvergenceError",
    "LinearModel",
    "PcaModel",
    "RademacherEstimate",
    "RankDeficientError",
    "RocCurve",
    "ScoreTable",
    "SequenceTooShortError",
    "ShuffleBoundQuery",
    "SingleClassError",
    "Split",
    "SplitDiagnostic",
    "SplitMix64",
    "StandardizerParams",
    "ToySpec",
    "TrainResult",
    "TrainSpec",
    "apply_standardizer",
    "auc",
    "bernoulli_kl",
    "chernoff_failure_prob",
    "default_toy_plan",
    "derive_seed",
    "detect",
    "empirical_rademacher",
    "enumerate_splits",
    "export_scores",
    "fit_pca",
    "fit_standardizer",
    "generate_permutations",
    "gradient",
    "load_features",
    "load_ground_truth",
    "load_scores",
    "loss",
    "make_toy_sequence",
    "moving_average",
    "predict_proba",
    "project",
    "required_shuffles",
    "roc_curve",
    "save_features",
    "save_ground_truth",
    "score_shuffle",
    "train",
    "write_roc_csv",
]
