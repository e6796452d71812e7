"""fidilab: a desk-scale metric-learning laboratory.

Implements the fine-grained difference-aware (FIDI) pairwise loss and
its triplet/contrastive competitors with analytic gradients, a minimal
trainable embedding network, identity-balanced PK batch sampling,
synthetic confusable-identity datasets, and a retrieval evaluation suite
(CMC, mAP, fidelity error statistics).
"""

from .data import (
    Batch,
    SampleSet,
    SynthConfig,
    generate_synthetic,
    load_sampleset,
    make_sampleset,
    pk_sample,
    save_sampleset,
    split_identities,
)
from .errors import (
    ConfigError,
    DataFormatError,
    EvalError,
    FidilabError,
    NumericError,
    SamplingError,
    ShapeError,
)
from .evaluation import (
    DistanceSummary,
    EvalProtocol,
    EvalReport,
    cmc_and_map,
    distance_summary,
    error_stats,
    evaluate_embeddings,
    rank_gallery,
    save_report,
)
from .geometry import DistanceKind, ProbMap, pairwise_distances, prob_of_distance
from .losses import (
    FidiConfig,
    LossOutput,
    TripletConfig,
    batch_hard_triplet_loss,
    contrastive_loss,
    cross_entropy_loss,
    fidi_bound,
    fidi_loss,
    fidi_pair_loss,
    metric_loss,
    triplet_loss,
)
from .model import MlpModel, backward, forward, init_model, load_model, save_model
from .numerics import Rng, finite_diff_grad, matmul, rel_error, shuffle
from .train import (
    Adam,
    SgdMomentum,
    TrainConfig,
    TrainHistory,
    TrainingDiverged,
    load_history,
    save_history,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Adam", "Batch", "ConfigError", "DataFormatError", "DistanceKind",
    "DistanceSummary", "EvalError", "EvalProtocol", "EvalReport",
    "FidiConfig", "FidilabError", "LossOutput", "MlpModel", "NumericError",
    "ProbMap", "Rng", "SampleSet", "SamplingError", "SgdMomentum",
    "ShapeError", "SynthConfig", "TrainConfig", "TrainHistory",
    "TrainingDiverged", "TripletConfig", "backward",
    "batch_hard_triplet_loss", "cmc_and_map", "contrastive_loss",
    "cross_entropy_loss", "distance_summary", "error_stats",
    "evaluate_embeddings", "fidi_bound", "fidi_loss", "fidi_pair_loss",
    "finite_diff_grad", "forward", "generate_synthetic", "init_model",
    "load_history", "load_model", "load_sampleset", "make_sampleset",
    "matmul", "metric_loss", "pairwise_distances", "pk_sample",
    "prob_of_distance", "rank_gallery", "rel_error", "save_history",
    "save_model", "save_report", "save_sampleset", "shuffle",
    "split_identities", "train", "triplet_loss",
]
