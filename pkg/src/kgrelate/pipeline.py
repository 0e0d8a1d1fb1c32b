"""End-to-end estimator: fit a knowledge graph, predict unknown relations."""

from __future__ import annotations

from sklearn.base import BaseEstimator

from .kg import KnowledgeGraph
from .predict import PipelineSettings, PredictedEdge, run_pipeline

__all__ = ["RelationDiscoverer"]


class RelationDiscoverer(BaseEstimator):
    """Discover unknown relatedness links between standard entities.

    ``fit`` runs closure, embedding training, similarity construction,
    thresholding, and community detection; ``predict`` returns the
    homophily-expanded candidate pairs.  All stages are deterministic for a
    fixed seed.
    """

    def __init__(
        self,
        model: str = "TransE",
        partitioner: str = "semep",
        threshold_level: float | None = None,
        k: int | None = None,
        dim: int = 50,
        rel_dim: int = 20,
        epochs: int = 500,
        batch_size: int = 64,
        learning_rate: float = 0.01,
        margin: float | None = None,
        score_norm: str | None = None,
        balance_tol: float = 0.1,
        use_closure: bool = True,
        seed: int = 0,
    ):
        self.model = model
        self.partitioner = partitioner
        self.threshold_level = threshold_level
        self.k = k
        self.dim = dim
        self.rel_dim = rel_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.margin = margin
        self.score_norm = score_norm
        self.balance_tol = balance_tol
        self.use_closure = use_closure
        self.seed = seed

    def settings(self) -> PipelineSettings:
        return PipelineSettings(
            model=self.model,
            partitioner=self.partitioner,
            threshold_level=self.threshold_level,
            k=self.k,
            dim=self.dim,
            rel_dim=self.rel_dim,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            margin=self.margin,
            score_norm=self.score_norm,
            balance_tol=self.balance_tol,
            use_closure=self.use_closure,
            seed=self.seed,
        )

    def fit(self, g: KnowledgeGraph, y=None) -> "RelationDiscoverer":
        result = run_pipeline(g, self.settings())
        self.graph_ = g
        self.result_ = result
        self.embedding_model_ = result.model
        self.similarity_ = result.matrix
        self.thresholded_ = result.thresholded
        self.partition_ = result.partition
        self.quality_ = result.quality
        self.predictions_ = result.predictions
        return self

    def predict(self, g: KnowledgeGraph | None = None) -> list[PredictedEdge]:
        if not hasattr(self, "result_"):
            raise RuntimeError("RelationDiscoverer is not fitted")
        if g is not None and g is not self.graph_:
            self.fit(g)
        return self.predictions_

    def fit_predict(self, g: KnowledgeGraph, y=None) -> list[PredictedEdge]:
        return self.fit(g).predict()
