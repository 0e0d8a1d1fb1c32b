"""Relation discovery for typed knowledge graphs.

Trains translational embeddings over a standards knowledge graph, clusters
the standards by cosine similarity, and predicts unseen relations by the
homophily principle, with a cross-validation harness for evaluation.
"""

__version__ = "0.1.0"

from .communities import (
    DensityCommunities,
    KMeansCommunities,
    MultilevelCommunities,
    Partition,
    default_k,
    partition_kmeans,
    partition_multilevel,
    partition_semep_style,
)
from .embed import TrainConfig, TransEmbedder, gradient_check, init_model, score_triple, train
from .kg import (
    EntityKind,
    KnowledgeGraph,
    ParseError,
    materialize_closure,
    parse_ntriples,
    parse_ntriples_file,
    serialize_ntriples,
)
from .pipeline import RelationDiscoverer
from .predict import (
    EvaluationReport,
    PipelineSettings,
    evaluate_fold,
    homophily_predict,
    kfold_split,
    run_experiment,
    run_pipeline,
)
from .quality import QualityReport, quality_report
from .sim import SimilarityMatrix, apply_threshold, build_matrix, cosine_similarity, kde

__all__ = [
    "__version__",
    "KnowledgeGraph",
    "EntityKind",
    "ParseError",
    "parse_ntriples",
    "parse_ntriples_file",
    "materialize_closure",
    "serialize_ntriples",
    "TrainConfig",
    "TransEmbedder",
    "init_model",
    "train",
    "score_triple",
    "gradient_check",
    "SimilarityMatrix",
    "cosine_similarity",
    "build_matrix",
    "kde",
    "apply_threshold",
    "Partition",
    "partition_kmeans",
    "partition_multilevel",
    "partition_semep_style",
    "default_k",
    "KMeansCommunities",
    "MultilevelCommunities",
    "DensityCommunities",
    "QualityReport",
    "quality_report",
    "PipelineSettings",
    "homophily_predict",
    "kfold_split",
    "evaluate_fold",
    "run_experiment",
    "run_pipeline",
    "EvaluationReport",
    "RelationDiscoverer",
]
