"""partforge: unsupervised mid-level part learning for image collections.

Groups images by global-descriptor similarity into balanced clusters,
learns discriminative whitened part models per group via constrained
region-to-part assignment (annealed soft-assignment or per-image
Hungarian), encodes images by their part responses, and evaluates
classification and retrieval end tasks.
"""

from . import errors
from .assignment import (
    AnnealSchedule,
    brute_force_assign,
    hungarian_per_image,
    isa,
    sinkhorn,
    soft_assign,
    threshold,
)
from .encoding import (
    PrincipalComponents,
    encode_bop,
    encode_pcop,
    encode_sbop,
    encode_wpcop,
    fit_pca,
    part_scores,
)
from .evaluation import (
    LinearSVM,
    Ranking,
    accuracy,
    average_precision,
    classification_map,
    classify,
    mean_ap,
    rank_database,
    train_classifier,
    write_ranking,
)
from .grouping import (
    BalancedKMeans,
    BalanceState,
    Centroids,
    Partition,
    greedy_balance,
    iterative_balance,
    kmeans,
    penalized_distance,
    update_penalty,
)
from .matrixio import (
    DatasetManifest,
    RegionGeometry,
    load_geometry,
    load_manifest,
    load_matrix,
    save_geometry,
    save_matrix,
)
from .oracles import (
    OracleReport,
    PlantedTruth,
    oracle_ap,
    oracle_lda,
    recovery_score,
)
from .parts import (
    LdaStats,
    compute_lda_stats,
    init_parts,
    matching_matrix,
    objective,
    part_models,
    part_models_normalized,
)
from .pipeline import (
    EncodedSet,
    PartBankSet,
    PartFeaturizer,
    RunConfig,
    encode_dataset,
    learn_parts,
    load_banks,
    run_classification,
    run_retrieval,
    save_banks,
    visualize_parts,
)
from .synth import SynthParams, synth_generate

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule",
    "BalanceState",
    "BalancedKMeans",
    "Centroids",
    "DatasetManifest",
    "EncodedSet",
    "LdaStats",
    "LinearSVM",
    "OracleReport",
    "PartBankSet",
    "PartFeaturizer",
    "Partition",
    "PlantedTruth",
    "PrincipalComponents",
    "Ranking",
    "RegionGeometry",
    "RunConfig",
    "SynthParams",
    "accuracy",
    "average_precision",
    "brute_force_assign",
    "classification_map",
    "classify",
    "compute_lda_stats",
    "encode_bop",
    "encode_dataset",
    "encode_pcop",
    "encode_sbop",
    "encode_wpcop",
    "errors",
    "fit_pca",
    "greedy_balance",
    "hungarian_per_image",
    "init_parts",
    "isa",
    "iterative_balance",
    "kmeans",
    "learn_parts",
    "load_banks",
    "load_geometry",
    "load_manifest",
    "load_matrix",
    "matching_matrix",
    "mean_ap",
    "objective",
    "oracle_ap",
    "oracle_lda",
    "part_models",
    "part_models_normalized",
    "part_scores",
    "penalized_distance",
    "rank_database",
    "recovery_score",
    "run_classification",
    "run_retrieval",
    "save_banks",
    "save_geometry",
    "save_matrix",
    "sinkhorn",
    "soft_assign",
    "synth_generate",
    "threshold",
    "train_classifier",
    "update_penalty",
    "visualize_parts",
    "write_ranking",
]
