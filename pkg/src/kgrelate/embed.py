"""Translational knowledge-graph embeddings: TransE, TransH, TransR, TransD.

Models are trained with margin-ranking hinge loss, one corrupted triple per
positive, plain SGD at a constant learning rate.  Norm constraints (entity
rows <= 1, TransH unit normals, TransH translation orthogonal to its normal)
are re-projected after every batch.  Training is single-threaded and bitwise
deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np
from sklearn.base import BaseEstimator

from .kg import KnowledgeGraph, materialize_closure

__all__ = [
    "MODEL_KINDS",
    "TrainConfig",
    "EmbeddingModel",
    "ConfigError",
    "init_model",
    "score_triples",
    "negative_sample",
    "train",
    "gradient_check",
    "TransEmbedder",
]

MODEL_KINDS = ("TransE", "TransH", "TransR", "TransD")

_MAX_CORRUPT_RETRIES = 100


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 50
    rel_dim: int = 20  # relation-space dimension for TransR/TransD
    epochs: int = 500
    batch_size: int = 64
    learning_rate: float = 0.01
    margin: float | None = None  # default: 1.0 for TransE, 0.05 otherwise
    score_norm: str | None = None  # "L1" or "L2"; default: L1 for TransE, L2 otherwise
    seed: int = 0

    def resolve(self, kind: str) -> "TrainConfig":
        """Fill model-dependent defaults for margin and score norm."""
        margin = self.margin if self.margin is not None else (1.0 if kind == "TransE" else 0.05)
        norm = self.score_norm if self.score_norm is not None else ("L1" if kind == "TransE" else "L2")
        return replace(self, margin=margin, score_norm=norm)

    def validate(self) -> None:
        if self.dim <= 0 or self.rel_dim <= 0:
            raise ConfigError("embedding dimensions must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if self.batch_size <= 0:
            raise ConfigError("batch_size must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.margin is not None and self.margin <= 0:
            raise ConfigError("margin must be positive")
        if self.score_norm not in (None, "L1", "L2"):
            raise ConfigError(f"unknown score norm {self.score_norm!r}")


@dataclass
class EmbeddingModel:
    """Entity/relation parameters for one Trans* variant.

    ``entities`` is n x d.  ``relations`` is m x d (TransE/TransH) or m x k.
    ``normals`` holds TransH unit hyperplane normals; ``proj_matrices`` the
    TransR m x k x d projections; ``entity_proj``/``relation_proj`` the TransD
    per-entity and per-relation projection vectors.
    """

    kind: str
    cfg: TrainConfig
    relation_labels: list[str]
    entities: np.ndarray
    relations: np.ndarray
    normals: np.ndarray | None = None
    proj_matrices: np.ndarray | None = None
    entity_proj: np.ndarray | None = None
    relation_proj: np.ndarray | None = None
    loss_trace: list[float] = field(default_factory=list)

    @property
    def n_entities(self) -> int:
        return self.entities.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relations.shape[0]

    def param_arrays(self) -> dict[str, np.ndarray]:
        out = {"entities": self.entities, "relations": self.relations}
        if self.normals is not None:
            out["normals"] = self.normals
        if self.proj_matrices is not None:
            out["proj_matrices"] = self.proj_matrices
        if self.entity_proj is not None:
            out["entity_proj"] = self.entity_proj
        if self.relation_proj is not None:
            out["relation_proj"] = self.relation_proj
        return out

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(
            kind=self.kind,
            cfg=self.cfg,
            relation_labels=list(self.relation_labels),
            entities=self.entities.copy(),
            relations=self.relations.copy(),
            normals=None if self.normals is None else self.normals.copy(),
            proj_matrices=None if self.proj_matrices is None else self.proj_matrices.copy(),
            entity_proj=None if self.entity_proj is None else self.entity_proj.copy(),
            relation_proj=None if self.relation_proj is None else self.relation_proj.copy(),
            loss_trace=list(self.loss_trace),
        )


def _uniform(rng: np.random.Generator, shape: tuple[int, ...], d: int) -> np.ndarray:
    bound = 6.0 / np.sqrt(d)
    return rng.uniform(-bound, bound, size=shape)


def init_model(
    kind: str,
    n_entities: int,
    n_relations: int,
    cfg: TrainConfig,
    relation_labels: list[str] | None = None,
) -> EmbeddingModel:
    """Initialize parameters uniformly in [-6/sqrt(d), 6/sqrt(d)], then project constraints."""
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    if n_entities == 0 or n_relations == 0:
        raise ConfigError("graph must contain at least one entity and one relation")
    cfg = cfg.resolve(kind)
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    d, k = cfg.dim, cfg.rel_dim
    labels = relation_labels if relation_labels is not None else [f"r{i}" for i in range(n_relations)]

    entities = _uniform(rng, (n_entities, d), d)
    if kind in ("TransE", "TransH"):
        relations = _uniform(rng, (n_relations, d), d)
    else:
        relations = _uniform(rng, (n_relations, k), k)

    model = EmbeddingModel(kind=kind, cfg=cfg, relation_labels=labels, entities=entities, relations=relations)
    if kind == "TransH":
        model.normals = _uniform(rng, (n_relations, d), d)
    elif kind == "TransR":
        model.proj_matrices = _uniform(rng, (n_relations, k, d), d)
    elif kind == "TransD":
        model.entity_proj = _uniform(rng, (n_entities, d), d)
        model.relation_proj = _uniform(rng, (n_relations, k), k)
    _project_constraints(model)
    return model


def _project_constraints(model: EmbeddingModel) -> None:
    # entity rows clipped to the unit ball (all kinds; required for TransE/TransH)
    norms = np.linalg.norm(model.entities, axis=1, keepdims=True)
    np.divide(model.entities, norms, out=model.entities, where=norms > 1.0)
    if model.kind == "TransH":
        wn = np.linalg.norm(model.normals, axis=1, keepdims=True)
        model.normals /= np.where(wn == 0.0, 1.0, wn)
        # keep translations in their hyperplanes: d <- d - (w.d) w
        dots = np.sum(model.normals * model.relations, axis=1, keepdims=True)
        model.relations -= dots * model.normals
    if model.kind == "TransD":
        # projection vectors clipped to the unit ball; unbounded w_e/w_r let
        # the dynamic mapping matrices, and with them the loss, diverge
        for arr in (model.entity_proj, model.relation_proj):
            norms = np.linalg.norm(arr, axis=1, keepdims=True)
            np.divide(arr, norms, out=arr, where=norms > 1.0)


def _pad_matrix(k: int, d: int) -> np.ndarray:
    """k x d matrix embedding R^d into R^k by truncation/zero-padding."""
    p = np.zeros((k, d))
    m = min(k, d)
    p[:m, :m] = np.eye(m)
    return p


def score_triples(model: EmbeddingModel, h, r, t) -> np.ndarray:
    """Vectorized plausibility scores (lower is better, always >= 0)."""
    h = np.atleast_1d(np.asarray(h, dtype=np.intp))
    r = np.atleast_1d(np.asarray(r, dtype=np.intp))
    t = np.atleast_1d(np.asarray(t, dtype=np.intp))
    E = model.entities
    if model.kind == "TransE":
        diff = E[h] + model.relations[r] - E[t]
        if model.cfg.score_norm == "L1":
            return np.sum(np.abs(diff), axis=1)
        return np.linalg.norm(diff, axis=1)
    if model.kind == "TransH":
        w = model.normals[r]
        hp = E[h] - np.sum(w * E[h], axis=1, keepdims=True) * w
        tp = E[t] - np.sum(w * E[t], axis=1, keepdims=True) * w
        diff = hp + model.relations[r] - tp
        return np.sum(diff * diff, axis=1)
    if model.kind == "TransR":
        M = model.proj_matrices[r]
        diff = np.einsum("bkd,bd->bk", M, E[h] - E[t]) + model.relations[r]
        return np.sum(diff * diff, axis=1)
    # TransD
    P = _pad_matrix(model.cfg.rel_dim, model.cfg.dim)
    wr = model.relation_proj[r]
    hp = wr * np.sum(model.entity_proj[h] * E[h], axis=1, keepdims=True) + E[h] @ P.T
    tp = wr * np.sum(model.entity_proj[t] * E[t], axis=1, keepdims=True) + E[t] @ P.T
    diff = hp + model.relations[r] - tp
    return np.sum(diff * diff, axis=1)


def score_triple(model: EmbeddingModel, h: int, r: int, t: int) -> float:
    return float(score_triples(model, [h], [r], [t])[0])


def _accumulate_score_grads(model, h, r, t, weight, grads) -> None:
    """Add weight[b] * d score(h,r,t)/d theta to the gradient buffers."""
    E = model.entities
    w8 = weight[:, None]
    if model.kind == "TransE":
        diff = E[h] + model.relations[r] - E[t]
        if model.cfg.score_norm == "L1":
            g = np.sign(diff)
        else:
            nrm = np.linalg.norm(diff, axis=1, keepdims=True)
            g = diff / np.where(nrm < 1e-12, 1.0, nrm)
        g = g * w8
        np.add.at(grads["entities"], h, g)
        np.add.at(grads["relations"], r, g)
        np.add.at(grads["entities"], t, -g)
        return
    if model.kind == "TransH":
        w = model.normals[r]
        v = E[h] - E[t]
        e = v - np.sum(w * v, axis=1, keepdims=True) * w + model.relations[r]
        we = np.sum(w * e, axis=1, keepdims=True)
        wv = np.sum(w * v, axis=1, keepdims=True)
        ge = 2.0 * (e - we * w) * w8  # d/dh; d/dt is its negation
        np.add.at(grads["entities"], h, ge)
        np.add.at(grads["entities"], t, -ge)
        np.add.at(grads["relations"], r, 2.0 * e * w8)
        np.add.at(grads["normals"], r, -2.0 * (we * v + wv * e) * w8)
        return
    if model.kind == "TransR":
        M = model.proj_matrices[r]
        v = E[h] - E[t]
        e = np.einsum("bkd,bd->bk", M, v) + model.relations[r]
        gM = 2.0 * np.einsum("bk,bd->bkd", e, v) * w8[:, :, None]
        gv = 2.0 * np.einsum("bkd,bk->bd", M, e) * w8
        np.add.at(grads["entities"], h, gv)
        np.add.at(grads["entities"], t, -gv)
        np.add.at(grads["relations"], r, 2.0 * e * w8)
        np.add.at(grads["proj_matrices"], r, gM)
        return
    # TransD
    P = _pad_matrix(model.cfg.rel_dim, model.cfg.dim)
    wr = model.relation_proj[r]
    weh, wet = model.entity_proj[h], model.entity_proj[t]
    dh = np.sum(weh * E[h], axis=1, keepdims=True)
    dt = np.sum(wet * E[t], axis=1, keepdims=True)
    e = wr * (dh - dt) + (E[h] - E[t]) @ P.T + model.relations[r]
    wre = np.sum(wr * e, axis=1, keepdims=True)
    np.add.at(grads["entities"], h, 2.0 * (wre * weh + e @ P) * w8)
    np.add.at(grads["entities"], t, -2.0 * (wre * wet + e @ P) * w8)
    np.add.at(grads["entity_proj"], h, 2.0 * wre * E[h] * w8)
    np.add.at(grads["entity_proj"], t, -2.0 * wre * E[t] * w8)
    np.add.at(grads["relation_proj"], r, 2.0 * (dh - dt) * e * w8)
    np.add.at(grads["relations"], r, 2.0 * e * w8)


def hinge_loss_and_grads(
    model: EmbeddingModel,
    pos: np.ndarray,
    neg: np.ndarray,
    compute_grads: bool = True,
) -> tuple[float, dict[str, np.ndarray] | None]:
    """Sum of max(0, margin + f(pos) - f(neg)) over the batch, with exact gradients."""
    margin = model.cfg.margin
    f_pos = score_triples(model, pos[:, 0], pos[:, 1], pos[:, 2])
    f_neg = score_triples(model, neg[:, 0], neg[:, 1], neg[:, 2])
    slack = margin + f_pos - f_neg
    active = slack > 0.0
    loss = float(np.sum(slack[active]))
    if not compute_grads:
        return loss, None
    grads = {name: np.zeros_like(arr) for name, arr in model.param_arrays().items()}
    if np.any(active):
        p, n = pos[active], neg[active]
        ones = np.ones(p.shape[0])
        _accumulate_score_grads(model, p[:, 0], p[:, 1], p[:, 2], ones, grads)
        _accumulate_score_grads(model, n[:, 0], n[:, 1], n[:, 2], -ones, grads)
    return loss, grads


def graph_triples(g: KnowledgeGraph) -> tuple[np.ndarray, list[str]]:
    """All edges as an (n, 3) index array of (head, relation, tail), sorted."""
    labels = sorted({e.label for e in g.edges})
    lab_idx = {lab: i for i, lab in enumerate(labels)}
    triples = sorted((e.subject, lab_idx[e.label], e.object) for e in g.edges)
    return np.asarray(triples, dtype=np.intp).reshape(-1, 3), labels


def negative_sample(
    triple: tuple[int, int, int],
    n_entities: int,
    known: set[tuple[int, int, int]],
    rng: np.random.Generator,
) -> tuple[int, int, int]:
    """Corrupt head or tail (each with prob 1/2), avoiding known triples."""
    h, r, t = triple
    for _ in range(_MAX_CORRUPT_RETRIES):
        corrupt_head = rng.random() < 0.5
        cand = int(rng.integers(n_entities))
        corrupted = (cand, r, t) if corrupt_head else (h, r, cand)
        if corrupted not in known and corrupted != (h, r, t):
            return corrupted
    return corrupted


def train(
    model: EmbeddingModel,
    g: KnowledgeGraph,
    use_closure: bool = True,
) -> EmbeddingModel:
    """SGD margin-ranking training over all labeled edges of the graph.

    By default the symmetric-transitive closure feeds training; pass
    ``use_closure=False`` to train on the base edges only.  Returns a new
    model with a per-epoch mean-loss trace.
    """
    cfg = model.cfg
    graph = g if (g.closure_applied or not use_closure) else materialize_closure(g)
    triples, labels = graph_triples(graph)
    if triples.shape[0] == 0:
        raise ConfigError("graph has no edges to train on")
    if graph.n_entities < 2:
        raise ConfigError("negative sampling needs at least 2 entities")
    if len(labels) != model.n_relations or labels != model.relation_labels:
        raise ConfigError("model relation vocabulary does not match the graph")

    model = model.copy()
    model.loss_trace = []
    known = set(map(tuple, triples.tolist()))
    rng = np.random.default_rng([cfg.seed, 1])
    n = triples.shape[0]

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            pos = triples[order[start : start + cfg.batch_size]]
            neg = np.array(
                [negative_sample(tuple(p), graph.n_entities, known, rng) for p in pos.tolist()],
                dtype=np.intp,
            )
            loss, grads = hinge_loss_and_grads(model, pos, neg)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            epoch_loss += loss
            params = model.param_arrays()
            for name, grad in grads.items():
                params[name] -= cfg.learning_rate * grad
            _project_constraints(model)
        model.loss_trace.append(epoch_loss / n)
    return model


def gradient_check(
    kind: str,
    seed: int = 0,
    n_triples: int = 120,
    step: float = 1e-5,
) -> float:
    """Worst relative error of analytic vs. central-finite-difference gradients.

    Triples near hinge kinks (slack or an L1/L2 norm argument within 1e-2 of
    zero) are excluded; those are measure-zero non-differentiable points.
    """
    rng = np.random.default_rng(seed)
    n_ent, n_rel = 12, 4
    cfg = TrainConfig(dim=6, rel_dim=4, seed=seed).resolve(kind)
    model = init_model(kind, n_ent, n_rel, cfg)
    # move off the constraint surface so projections do not mask anything
    for arr in model.param_arrays().values():
        arr += 0.01 * rng.standard_normal(arr.shape)

    pos, neg = _sample_smooth_triples(model, rng, n_triples)
    _, analytic = hinge_loss_and_grads(model, pos, neg)

    worst = 0.0
    for name, arr in model.param_arrays().items():
        flat = arr.ravel()
        num = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp, _ = hinge_loss_and_grads(model, pos, neg, compute_grads=False)
            flat[i] = orig - step
            lm, _ = hinge_loss_and_grads(model, pos, neg, compute_grads=False)
            flat[i] = orig
            num[i] = (lp - lm) / (2.0 * step)
        a = analytic[name].ravel()
        denom = np.maximum(np.abs(a) + np.abs(num), 1e-4)
        worst = max(worst, float(np.max(np.abs(a - num) / denom)))
    return worst


def _sample_smooth_triples(model, rng, n_triples, kink_tol=1e-2):
    """Random (positive, negative) triple pairs away from non-smooth points."""
    pos_list, neg_list = [], []
    margin = model.cfg.margin
    while len(pos_list) < n_triples:
        batch = rng.integers(
            [0, 0, 0],
            [model.n_entities, model.n_relations, model.n_entities],
            size=(4 * n_triples, 3),
        )
        pairs = batch.reshape(-1, 2, 3)
        p, n = pairs[:, 0, :], pairs[:, 1, :]
        n = n.copy()
        n[:, 1] = p[:, 1]  # negatives share the relation
        fp = score_triples(model, p[:, 0], p[:, 1], p[:, 2])
        fn = score_triples(model, n[:, 0], n[:, 1], n[:, 2])
        ok = np.abs(margin + fp - fn) > kink_tol
        if model.kind == "TransE":
            ok &= _transe_smooth(model, p, kink_tol) & _transe_smooth(model, n, kink_tol)
        for i in np.flatnonzero(ok):
            pos_list.append(p[i])
            neg_list.append(n[i])
            if len(pos_list) == n_triples:
                break
    return np.asarray(pos_list, dtype=np.intp), np.asarray(neg_list, dtype=np.intp)


def _transe_smooth(model, triples, tol):
    diff = (
        model.entities[triples[:, 0]]
        + model.relations[triples[:, 1]]
        - model.entities[triples[:, 2]]
    )
    if model.cfg.score_norm == "L1":
        return np.min(np.abs(diff), axis=1) > tol
    return np.linalg.norm(diff, axis=1) > tol


class TransEmbedder(BaseEstimator):
    """sklearn-style wrapper: fit a Trans* model on a KnowledgeGraph.

    After ``fit``, ``entity_vectors_`` holds one row per graph entity and
    ``transform`` maps entity indices (or IRIs) to their vectors.
    """

    def __init__(
        self,
        kind: str = "TransE",
        dim: int = 50,
        rel_dim: int = 20,
        epochs: int = 500,
        batch_size: int = 64,
        learning_rate: float = 0.01,
        margin: float | None = None,
        score_norm: str | None = None,
        seed: int = 0,
        use_closure: bool = True,
    ):
        self.kind = kind
        self.dim = dim
        self.rel_dim = rel_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.margin = margin
        self.score_norm = score_norm
        self.seed = seed
        self.use_closure = use_closure

    def _config(self) -> TrainConfig:
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

    def fit(self, g: KnowledgeGraph, y=None) -> "TransEmbedder":
        graph = g if (g.closure_applied or not self.use_closure) else materialize_closure(g)
        _, labels = graph_triples(graph)
        model = init_model(self.kind, graph.n_entities, max(len(labels), 1), self._config(), labels)
        self.model_ = train(model, graph, use_closure=self.use_closure)
        self.graph_ = g
        self.entity_vectors_ = self.model_.entities
        self.loss_trace_ = list(self.model_.loss_trace)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise RuntimeError("TransEmbedder is not fitted")
        idx = [self.graph_.index_of(x) if isinstance(x, str) else int(x) for x in X]
        return self.entity_vectors_[np.asarray(idx, dtype=np.intp)]

    def fit_transform(self, g: KnowledgeGraph, y=None) -> np.ndarray:
        self.fit(g)
        return self.entity_vectors_
