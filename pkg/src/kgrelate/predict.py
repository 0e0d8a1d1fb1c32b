"""Homophily-based relation discovery and the k-fold cross-validation harness.

Every unordered pair of distinct standards sharing a community, minus the
pairs already known, becomes a predicted relation.  The CV harness holds out
20% of the base related-pairs per fold, recomputes the closure on the
training split (removing any closed edge that re-derives a held-out pair),
and scores recall/precision of the predictions against the held-out pairs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .communities import (
    Partition,
    default_k,
    partition_kmeans,
    partition_multilevel,
    partition_semep_style,
)
from .embed import EmbeddingModel, TrainConfig, graph_triples, init_model, train
from .kg import RELATED_TO, Edge, KnowledgeGraph, materialize_closure
from .quality import QualityReport, quality_report
from .sim import SimilarityMatrix, apply_threshold, build_matrix

__all__ = [
    "DEFAULT_THRESHOLDS",
    "PARTITIONERS",
    "PipelineSettings",
    "PredictedEdge",
    "FoldSplit",
    "PipelineResult",
    "FoldReport",
    "ComboReport",
    "EvaluationReport",
    "homophily_predict",
    "kfold_split",
    "run_pipeline",
    "evaluate_fold",
    "run_experiment",
]

DEFAULT_THRESHOLDS = {"TransE": 0.85, "TransD": 0.85, "TransH": 0.50, "TransR": 0.75}
PARTITIONERS = ("semep", "metis", "kmeans")


@dataclass(frozen=True)
class PipelineSettings:
    model: str = "TransE"
    dim: int = 50
    rel_dim: int = 20
    epochs: int = 500
    batch_size: int = 64
    learning_rate: float = 0.01
    margin: float | None = None
    score_norm: str | None = None
    seed: int = 0
    use_closure: bool = True
    threshold_level: float | None = None  # default depends on the model
    absolute_cutoff: float | None = None
    partitioner: str = "semep"
    k: int | None = None  # default: components of the thresholded graph
    balance_tol: float = 0.1
    folds: int = 5
    split_closed: bool = False  # fold over closed instances instead of base pairs

    def resolved_threshold(self) -> float:
        if self.threshold_level is not None:
            return self.threshold_level
        return DEFAULT_THRESHOLDS[self.model]

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            dim=self.dim,
            rel_dim=self.rel_dim,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            margin=self.margin,
            score_norm=self.score_norm,
            seed=self.seed,
        )


@dataclass(frozen=True)
class PredictedEdge:
    a: int
    b: int
    community: int
    hit: bool | None = None

    def __post_init__(self):
        if self.a >= self.b:
            raise ValueError("predicted edges are canonical (a.index < b.index) pairs")


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_edges: frozenset[tuple[int, int]]
    test_edges: frozenset[tuple[int, int]]
    seed: int


def homophily_predict(p: Partition, known: set[tuple[int, int]]) -> list[PredictedEdge]:
    """All intra-community pairs not already known, in deterministic order."""
    out: list[PredictedEdge] = []
    for ci, members in enumerate(p.communities):
        ordered = sorted(members)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1 :]:
                if (a, b) not in known:
                    out.append(PredictedEdge(a, b, ci))
    out.sort(key=lambda e: (e.a, e.b))
    return out


def mark_hits(
    predictions: list[PredictedEdge], truth: set[tuple[int, int]]
) -> list[PredictedEdge]:
    """Set each prediction's hit flag by membership in the truth pair set."""
    return [replace(e, hit=(e.a, e.b) in truth) for e in predictions]


def kfold_split(pairs, k: int = 5, seed: int = 0) -> list[FoldSplit]:
    """Shuffle the pair set, slice into k consecutive test blocks."""
    pairs = sorted(pairs)
    if len(pairs) < k:
        raise ValueError(f"need at least {k} pairs for {k}-fold CV, got {len(pairs)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    blocks = np.array_split(order, k)
    folds = []
    for i, block in enumerate(blocks):
        test = frozenset(pairs[j] for j in block)
        train = frozenset(p for p in pairs if p not in test)
        folds.append(FoldSplit(fold_index=i, train_edges=train, test_edges=test, seed=seed))
    return folds


@dataclass
class PipelineResult:
    model: EmbeddingModel
    matrix: SimilarityMatrix
    thresholded: SimilarityMatrix
    partition: Partition
    predictions: list[PredictedEdge]
    quality: QualityReport
    k_used: int | None


def _partition(settings: PipelineSettings, thresholded, vectors, standards, seed) -> tuple[Partition, int | None]:
    name = settings.partitioner
    if name == "semep":
        return partition_semep_style(thresholded), None
    k = settings.k if settings.k is not None else default_k(thresholded)
    if name == "metis":
        return partition_multilevel(thresholded, k, settings.balance_tol, seed), k
    if name == "kmeans":
        return partition_kmeans(vectors[standards], standards, k, seed), k
    raise ValueError(f"unknown partitioner {name!r}")


def run_pipeline(
    g: KnowledgeGraph,
    settings: PipelineSettings,
    known: set[tuple[int, int]] | None = None,
) -> PipelineResult:
    """Closure -> embeddings -> similarity -> threshold -> partition -> prediction.

    ``known`` defaults to the related pairs of the (closed) input graph; the
    CV harness passes the leak-scrubbed training pair set instead.
    """
    closed = g if g.closure_applied else materialize_closure(g)
    train_graph = closed if settings.use_closure else g
    _, labels = graph_triples(train_graph)
    model = init_model(
        settings.model, g.n_entities, len(labels), settings.train_config(), labels
    )
    model = train(model, train_graph, use_closure=settings.use_closure)

    standards = g.standards()
    matrix = build_matrix(model.entities[standards], standards)
    thresholded = apply_threshold(
        matrix, settings.resolved_threshold(), absolute_cutoff=settings.absolute_cutoff
    )
    partition, k_used = _partition(settings, thresholded, model.entities, standards, settings.seed)
    if known is None:
        known = closed.related_pairs()
    predictions = homophily_predict(partition, known)
    return PipelineResult(
        model=model,
        matrix=matrix,
        thresholded=thresholded,
        partition=partition,
        predictions=predictions,
        quality=quality_report(partition, thresholded),
        k_used=k_used,
    )


@dataclass
class FoldReport:
    fold_index: int
    recall: float
    precision: float
    n_predictions: int
    n_test: int
    zero_predictions: bool
    leaked_removed: int
    quality: QualityReport


@dataclass
class ComboReport:
    model: str
    partitioner: str
    threshold_level: float
    folds: list[FoldReport] = field(default_factory=list)
    error: str | None = None

    @property
    def mean_recall(self) -> float:
        return float(np.mean([f.recall for f in self.folds])) if self.folds else 0.0

    @property
    def mean_precision(self) -> float:
        return float(np.mean([f.precision for f in self.folds])) if self.folds else 0.0

    def aggregate(self) -> dict:
        out = {
            "model": self.model,
            "partitioner": self.partitioner,
            "threshold_level": self.threshold_level,
            "error": self.error,
        }
        if not self.folds:
            return out
        fields_ = ["recall", "precision"]
        qfields = [
            "inv_conductance",
            "performance",
            "inv_total_cut",
            "modularity_scaled",
            "coverage",
        ]
        for name in fields_:
            vals = [getattr(f, name) for f in self.folds]
            out[f"mean_{name}"] = float(np.mean(vals))
            out[f"std_{name}"] = float(np.std(vals))
        for name in qfields:
            vals = [getattr(f.quality, name) for f in self.folds]
            out[f"mean_{name}"] = float(np.mean(vals))
            out[f"std_{name}"] = float(np.std(vals))
        return out


@dataclass
class EvaluationReport:
    combos: list[ComboReport]

    def to_json(self) -> str:
        doc = []
        for c in self.combos:
            entry = c.aggregate()
            entry["folds"] = [asdict(f) for f in c.folds]
            doc.append(entry)
        return json.dumps(doc, indent=2, sort_keys=True)

    def tsv(self) -> str:
        lines = [
            "combination\tfold\trecall\tprecision\tinv_conductance\tperformance"
            "\tinv_total_cut\tmodularity_scaled\tcoverage"
        ]
        for c in self.combos:
            combo = f"{c.model}+{c.partitioner}"
            for f in c.folds:
                q = f.quality
                lines.append(
                    f"{combo}\t{f.fold_index}\t{f.recall!r}\t{f.precision!r}"
                    f"\t{q.inv_conductance!r}\t{q.performance!r}\t{q.inv_total_cut!r}"
                    f"\t{q.modularity_scaled!r}\t{q.coverage!r}"
                )
            if c.error is not None:
                lines.append(f"{combo}\tERROR\t{c.error}\t\t\t\t\t\t")
        return "\n".join(lines) + "\n"


def _training_graph_for_fold(
    g: KnowledgeGraph, fold: FoldSplit
) -> tuple[KnowledgeGraph, int]:
    """Base graph minus test pairs, closed, with closure-leaked test pairs removed."""
    trimmed = g.copy()
    trimmed.closure_applied = False
    test = set(fold.test_edges)
    trimmed.edges = {
        e
        for e in trimmed.edges
        if not (e.label == RELATED_TO and (min(e.subject, e.object), max(e.subject, e.object)) in test)
    }
    closed = materialize_closure(trimmed)
    leaked = 0
    kept = set()
    for e in closed.edges:
        if e.label == RELATED_TO:
            pair = (min(e.subject, e.object), max(e.subject, e.object))
            if pair in test:
                leaked += 1
                continue
        kept.add(e)
    closed.edges = kept
    return closed, leaked // 2  # directed edges counted twice per pair


def evaluate_fold(
    g: KnowledgeGraph,
    fold: FoldSplit,
    settings: PipelineSettings,
    ideal_pairs: set[tuple[int, int]] | None = None,
) -> FoldReport:
    try:
        train_graph, leaked = _training_graph_for_fold(g, fold)
        known = train_graph.related_pairs()
        result = run_pipeline(train_graph, settings, known=known)
    except Exception as exc:
        raise RuntimeError(f"fold {fold.fold_index}: {exc}") from exc

    predicted = {(e.a, e.b) for e in result.predictions}
    test = set(fold.test_edges)
    recall = len(predicted & test) / len(test) if test else 0.0
    if not predicted:
        precision, zero = 0.0, True
    else:
        truth = test | ideal_pairs if ideal_pairs is not None else test
        precision, zero = len(predicted & truth) / len(predicted), False
    return FoldReport(
        fold_index=fold.fold_index,
        recall=recall,
        precision=precision,
        n_predictions=len(predicted),
        n_test=len(test),
        zero_predictions=zero,
        leaked_removed=leaked,
        quality=result.quality,
    )


def run_experiment(
    g: KnowledgeGraph,
    settings: PipelineSettings,
    models: list[str] | None = None,
    partitioners: list[str] | None = None,
    ideal_pairs: set[tuple[int, int]] | None = None,
) -> EvaluationReport:
    """5-fold CV for every requested (model x partitioner) combination."""
    models = models if models is not None else [settings.model]
    partitioners = partitioners if partitioners is not None else [settings.partitioner]
    if settings.split_closed:
        pairs = materialize_closure(g).related_pairs()
    else:
        pairs = g.related_pairs()
    folds = kfold_split(pairs, k=settings.folds, seed=settings.seed)

    combos = []
    for model in models:
        for part in partitioners:
            s = replace(settings, model=model, partitioner=part)
            combo = ComboReport(
                model=model, partitioner=part, threshold_level=s.resolved_threshold()
            )
            try:
                for fold in folds:
                    combo.folds.append(evaluate_fold(g, fold, s, ideal_pairs))
            except Exception as exc:  # one bad combination must not sink the sweep
                combo.error = str(exc)
            combos.append(combo)
    return EvaluationReport(combos=combos)


def predictions_tsv(predictions: list[PredictedEdge], iris: list[str]) -> str:
    lines = ["entity_a\tentity_b\tcommunity_id\thit"]
    for e in predictions:
        hit = "unknown" if e.hit is None else str(int(e.hit))
        lines.append(f"{iris[e.a]}\t{iris[e.b]}\t{e.community}\t{hit}")
    return "\n".join(lines) + "\n"


def extended_graph(g: KnowledgeGraph, predictions: list[PredictedEdge]) -> KnowledgeGraph:
    """Input graph plus the predicted relatedTo edges (both directions)."""
    out = g.copy()
    for e in predictions:
        out.edges.add(Edge(e.a, RELATED_TO, e.b))
        out.edges.add(Edge(e.b, RELATED_TO, e.a))
    return out
