import numpy as np
import pytest

from kgrelate import TrainConfig, TransEmbedder, gradient_check, init_model, materialize_closure, train
from kgrelate.embed import (
    ConfigError,
    MODEL_KINDS,
    graph_triples,
    negative_sample,
    score_triple,
    score_triples,
)
from kgrelate.sim import cosine_similarity

SMALL = TrainConfig(dim=8, rel_dim=5, epochs=5, batch_size=16)


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_init_deterministic(kind):
    a = init_model(kind, 10, 3, SMALL)
    b = init_model(kind, 10, 3, SMALL)
    for (name, x), (_, y) in zip(a.param_arrays().items(), b.param_arrays().items()):
        assert np.array_equal(x, y), name


def test_init_shapes_default_dim():
    m = init_model("TransE", 249, 4, TrainConfig())
    assert m.entities.shape == (249, 50)
    assert m.relations.shape == (4, 50)


def test_transh_normals_unit():
    m = init_model("TransH", 20, 5, SMALL)
    norms = np.linalg.norm(m.normals, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)


def test_init_rejects_empty():
    with pytest.raises(ConfigError):
        init_model("TransE", 0, 1, SMALL)
    with pytest.raises(ConfigError):
        init_model("TransE", 5, 0, SMALL)


def _hand_model(kind, entities, relations, **extra):
    cfg = TrainConfig(dim=entities.shape[1], rel_dim=relations.shape[1]).resolve(kind)
    m = init_model(kind, entities.shape[0], relations.shape[0], cfg)
    m.entities[:] = entities
    m.relations[:] = relations
    for name, val in extra.items():
        getattr(m, name)[:] = val
    return m


def test_transe_l1_exact_translation_zero():
    m = _hand_model("TransE", np.array([[1.0, 0.0], [1.0, 1.0]]), np.array([[0.0, 1.0]]))
    assert score_triple(m, 0, 0, 1) == 0.0


def test_transe_l1_unit_offset():
    m = _hand_model("TransE", np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[0.0, 0.0]]))
    assert score_triple(m, 0, 0, 1) == 1.0


def test_transh_hand_projection():
    entities = np.array([[3.0, 2.0], [5.0, 2.0]])
    relations = np.array([[0.0, 0.0]])
    normals = np.array([[1.0, 0.0]])
    m = _hand_model("TransH", entities, relations, normals=normals)
    assert score_triple(m, 0, 0, 1) == pytest.approx(0.0, abs=1e-15)
    # independent straight-line recomputation of the projection
    w = normals[0]
    hp = entities[0] - np.dot(w, entities[0]) * w
    tp = entities[1] - np.dot(w, entities[1]) * w
    assert score_triple(m, 0, 0, 1) == pytest.approx(float(np.sum((hp - tp) ** 2)))


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_scores_non_negative(kind):
    m = init_model(kind, 15, 4, SMALL)
    rng = np.random.default_rng(5)
    h = rng.integers(0, 15, 200)
    r = rng.integers(0, 4, 200)
    t = rng.integers(0, 15, 200)
    assert np.all(score_triples(m, h, r, t) >= 0.0)


def test_translation_identity_transe():
    m = init_model("TransE", 6, 2, SMALL)
    m.entities[3] = m.entities[1] + m.relations[0]
    assert score_triple(m, 1, 0, 3) == 0.0


def test_negative_sample_reproducible():
    known = {(0, 0, 1)}
    seqs = []
    for _ in range(2):
        rng = np.random.default_rng(9)
        seqs.append([negative_sample((0, 0, 1), 10, known, rng) for _ in range(50)])
    assert seqs[0] == seqs[1]


def test_negative_sample_head_tail_balance():
    rng = np.random.default_rng(0)
    known = {(0, 0, 1)}
    heads = 0
    n = 100_000
    for _ in range(n):
        c = negative_sample((0, 0, 1), 10, known, rng)
        if c[0] != 0:
            heads += 1
    assert abs(heads / n - 0.5) < 0.02


def test_train_single_entity_graph_rejected():
    from kgrelate import parse_ntriples

    g = parse_ntriples(["<urn:a> <urn:p> <urn:a> ."])
    m = init_model("TransE", 1, 1, SMALL, ["urn:p"])
    with pytest.raises(ConfigError):
        train(m, g)


def test_zero_epochs_is_identity(planted_kg):
    closed = materialize_closure(planted_kg)
    _, labels = graph_triples(closed)
    cfg = TrainConfig(dim=8, epochs=0)
    m0 = init_model("TransE", closed.n_entities, len(labels), cfg, labels)
    m1 = train(m0, closed)
    assert np.array_equal(m0.entities, m1.entities)
    assert np.array_equal(m0.relations, m1.relations)
    assert m1.loss_trace == []


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_loss_decreases(planted_kg, kind):
    emb = TransEmbedder(kind=kind, dim=16, rel_dim=8, epochs=200).fit(planted_kg)
    assert emb.loss_trace_[-1] < emb.loss_trace_[0]


def test_two_clique_intra_similarity_exceeds_cross(planted_kg, planted_truth):
    emb = TransEmbedder(kind="TransE", dim=16, epochs=200).fit(planted_kg)
    std = planted_kg.standards()
    vecs = emb.entity_vectors_[std]
    intra, cross = [], []
    for i in range(len(std)):
        for j in range(i + 1, len(std)):
            sim = cosine_similarity(vecs[i], vecs[j])
            (intra if planted_truth[i] == planted_truth[j] else cross).append(sim)
    assert np.mean(intra) > np.mean(cross)


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_training_deterministic(planted_kg, kind):
    runs = [
        TransEmbedder(kind=kind, dim=8, rel_dim=5, epochs=3).fit(planted_kg).model_
        for _ in range(2)
    ]
    for (name, x), (_, y) in zip(runs[0].param_arrays().items(), runs[1].param_arrays().items()):
        assert np.array_equal(x, y), name


@pytest.mark.parametrize("kind", ["TransE", "TransH"])
def test_norm_constraints_after_training(planted_kg, kind):
    model = TransEmbedder(kind=kind, dim=8, epochs=10).fit(planted_kg).model_
    assert np.all(np.linalg.norm(model.entities, axis=1) <= 1.0 + 1e-9)
    if kind == "TransH":
        assert np.allclose(np.linalg.norm(model.normals, axis=1), 1.0, atol=1e-9)


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_no_nonfinite_parameters(planted_kg, kind):
    model = TransEmbedder(kind=kind, dim=8, rel_dim=5, epochs=20).fit(planted_kg).model_
    for name, arr in model.param_arrays().items():
        assert np.all(np.isfinite(arr)), name


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_gradient_fidelity(kind):
    assert gradient_check(kind, seed=1) < 1e-4


def test_hinge_zero_when_all_slack_negative():
    from kgrelate.embed import hinge_loss_and_grads

    m = init_model("TransE", 4, 1, TrainConfig(dim=3, margin=1e-9))
    m.entities[:] = 0.0
    m.relations[:] = 0.0
    # pos and neg score identically (0), slack = margin > 0 is tiny but positive;
    # use equal triples so f(pos) - f(neg) = 0 and gradients cancel exactly
    pos = np.array([[0, 0, 1]])
    neg = np.array([[0, 0, 2]])
    loss, grads = hinge_loss_and_grads(m, pos, neg)
    assert loss == pytest.approx(1e-9)
    for arr in grads.values():
        assert np.allclose(arr, 0.0)


def test_embedder_transform_by_iri(planted_kg):
    emb = TransEmbedder(dim=8, epochs=1).fit(planted_kg)
    iri = planted_kg.iris[planted_kg.standards()[0]]
    vec = emb.transform([iri])
    assert np.array_equal(vec[0], emb.entity_vectors_[planted_kg.index_of(iri)])


def test_estimator_get_params_round_trip():
    emb = TransEmbedder(kind="TransH", epochs=7)
    params = emb.get_params()
    assert params["kind"] == "TransH" and params["epochs"] == 7
    emb2 = TransEmbedder(**params)
    assert emb2.get_params() == params
