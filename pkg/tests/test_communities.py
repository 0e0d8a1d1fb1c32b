import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from kgrelate import (
    DensityCommunities,
    KMeansCommunities,
    MultilevelCommunities,
    Partition,
    default_k,
    partition_kmeans,
    partition_multilevel,
    partition_semep_style,
)
from kgrelate.communities import weighted_cut
from kgrelate.sim import SimilarityMatrix, apply_threshold


def block_matrix(sizes, intra, inter, cutoff=0.5, jitter=0.0, seed=0):
    """Thresholded block similarity matrix with planted communities."""
    n = sum(sizes)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    rng = np.random.default_rng(seed)
    values = np.where(labels[:, None] == labels[None, :], intra, inter).astype(float)
    if jitter:
        noise = rng.uniform(-jitter, jitter, (n, n))
        noise = (noise + noise.T) / 2.0
        values += noise
    np.fill_diagonal(values, 1.0)
    thresholded = values.copy()
    mask = thresholded < cutoff
    np.fill_diagonal(mask, False)
    thresholded[mask] = 0.0
    return (
        SimilarityMatrix(
            ids=tuple(range(n)), values=thresholded, threshold_level=0.5, cutoff_value=cutoff
        ),
        labels,
    )


def check_cover(p: Partition, ids):
    assert p.members() == set(ids)
    assert all(len(c) > 0 for c in p.communities)
    assert sum(len(c) for c in p.communities) == len(ids)


# -- k-means ---------------------------------------------------------------


def test_kmeans_k1_single_community():
    vecs = np.random.default_rng(0).standard_normal((8, 3))
    p = partition_kmeans(vecs, range(8), 1)
    assert p.k == 1
    check_cover(p, range(8))


def test_kmeans_k_equals_n_singletons():
    vecs = np.random.default_rng(0).standard_normal((6, 3))
    p = partition_kmeans(vecs, range(6), 6)
    assert p.k == 6
    assert all(len(c) == 1 for c in p.communities)


def test_kmeans_separated_blobs():
    rng = np.random.default_rng(1)
    a = rng.normal(0.0, 0.05, (15, 4))
    b = rng.normal(10.0, 0.05, (15, 4))
    vecs = np.vstack([a, b])
    truth = [0] * 15 + [1] * 15
    p = partition_kmeans(vecs, range(30), 2)
    assert adjusted_rand_score(truth, p.labels_for(range(30))) == 1.0


def test_kmeans_rejects_bad_k():
    vecs = np.zeros((4, 2))
    with pytest.raises(ValueError):
        partition_kmeans(vecs, range(4), 0)
    with pytest.raises(ValueError):
        partition_kmeans(vecs, range(4), 5)


def test_kmeans_deterministic():
    vecs = np.random.default_rng(2).standard_normal((20, 5))
    p1 = partition_kmeans(vecs, range(20), 4, seed=3)
    p2 = partition_kmeans(vecs, range(20), 4, seed=3)
    assert p1.communities == p2.communities


def test_kmeans_objective_non_increasing():
    from kgrelate.communities import _kmeanspp_seeds

    vecs = np.random.default_rng(4).standard_normal((30, 3))
    rng = np.random.default_rng(0)
    centers = _kmeanspp_seeds(vecs, 3, rng)
    objectives = []
    labels = None
    for _ in range(20):
        d2 = np.sum((vecs[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        objectives.append(float(np.sum(np.min(d2, axis=1))))
        for j in range(3):
            if np.any(labels == j):
                centers[j] = vecs[labels == j].mean(axis=0)
    assert all(b <= a + 1e-9 for a, b in zip(objectives, objectives[1:]))


# -- multilevel ------------------------------------------------------------


def two_cliques_weak_bridge(size=10, weak=0.05):
    n = 2 * size
    values = np.zeros((n, n))
    for lo, hi in ((0, size), (size, n)):
        values[lo:hi, lo:hi] = 0.9
    values[0, size] = values[size, 0] = weak
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(
        ids=tuple(range(n)), values=values, threshold_level=0.0, cutoff_value=0.0
    )


def test_multilevel_two_cliques_cut_equals_bridge():
    m = two_cliques_weak_bridge()
    p = partition_multilevel(m, 2)
    assert weighted_cut(m, p) == pytest.approx(0.05)
    truth = [0] * 10 + [1] * 10
    assert adjusted_rand_score(truth, p.labels_for(m.ids)) == 1.0


def test_multilevel_k1():
    m = two_cliques_weak_bridge()
    p = partition_multilevel(m, 1)
    assert p.k == 1
    assert weighted_cut(m, p) == 0.0


def test_multilevel_edgeless_balanced():
    n = 12
    values = np.zeros((n, n))
    np.fill_diagonal(values, 1.0)
    m = SimilarityMatrix(ids=tuple(range(n)), values=values, threshold_level=0.5, cutoff_value=0.5)
    p = partition_multilevel(m, 2)
    assert p.k == 2
    assert weighted_cut(m, p) == 0.0
    sizes = sorted(len(c) for c in p.communities)
    assert sizes[1] <= (1.1 * n / 2) + 1e-9


def test_multilevel_coarsening_path():
    # large enough to trigger heavy-edge matching before initial partitioning
    m, truth = block_matrix([60, 60], 0.9, 0.02)
    p = partition_multilevel(m, 2)
    assert adjusted_rand_score(truth, p.labels_for(m.ids)) == 1.0


def test_multilevel_requires_threshold():
    values = np.eye(4)
    m = SimilarityMatrix(ids=(0, 1, 2, 3), values=values)
    with pytest.raises(ValueError, match="threshold"):
        partition_multilevel(m, 2)


def test_multilevel_deterministic():
    m, _ = block_matrix([20, 20, 20], 0.8, 0.1, jitter=0.05)
    p1 = partition_multilevel(m, 3, seed=1)
    p2 = partition_multilevel(m, 3, seed=1)
    assert p1.communities == p2.communities


# -- SemEP-style -----------------------------------------------------------


def test_semep_planted_blocks():
    m, truth = block_matrix([5, 5], 0.9, 0.05)
    p = partition_semep_style(m)
    assert adjusted_rand_score(truth, p.labels_for(m.ids)) == 1.0


def test_semep_all_zero_gives_singletons():
    n = 6
    values = np.zeros((n, n))
    np.fill_diagonal(values, 1.0)
    m = SimilarityMatrix(ids=tuple(range(n)), values=values, threshold_level=0.5, cutoff_value=0.0)
    p = partition_semep_style(m)
    assert p.k == n


def test_semep_all_ones_single_community():
    n = 6
    values = np.ones((n, n))
    m = SimilarityMatrix(ids=tuple(range(n)), values=values, threshold_level=0.5, cutoff_value=1.0)
    p = partition_semep_style(m)
    assert p.k == 1


def test_semep_deterministic():
    m, _ = block_matrix([4, 4, 4], 0.85, 0.1, jitter=0.04, seed=9)
    p1 = partition_semep_style(m)
    p2 = partition_semep_style(m)
    assert p1.communities == p2.communities


# -- default_k -------------------------------------------------------------


def test_default_k_two_blocks():
    m, _ = block_matrix([5, 5], 0.9, 0.0)
    assert default_k(m) == 2


def test_default_k_fully_connected():
    m, _ = block_matrix([6], 0.9, 0.9)
    assert default_k(m) == 1


def test_default_k_blocks_plus_isolated():
    # 3 blocks and 2 isolated vertices; verify against a union-find oracle
    m, _ = block_matrix([4, 4, 4], 0.9, 0.0)
    n = 12 + 2
    values = np.zeros((n, n))
    values[:12, :12] = m.values
    np.fill_diagonal(values, 1.0)
    full = SimilarityMatrix(
        ids=tuple(range(n)), values=values, threshold_level=0.5, cutoff_value=0.5
    )

    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if values[i, j] > 0.0:
                parent[find(i)] = find(j)
    oracle = len({find(i) for i in range(n)})
    assert oracle == 5
    assert default_k(full) == oracle


# -- cross-algorithm properties ---------------------------------------------


@pytest.mark.parametrize("algo", ["kmeans", "metis", "semep"])
def test_planted_partition_recovery_all_algorithms(algo):
    m, truth = block_matrix([6, 6, 6], 0.85, 0.15, jitter=0.04, seed=2)
    if algo == "semep":
        p = partition_semep_style(m)
    elif algo == "metis":
        p = partition_multilevel(m, 3)
    else:
        # embed each vertex as its similarity row: blocks are separated
        p = partition_kmeans(m.values, m.ids, 3)
    check_cover(p, m.ids)
    assert adjusted_rand_score(truth, p.labels_for(m.ids)) == 1.0


def test_refinement_never_increases_cut():
    from kgrelate.communities import _adjacency, _refine

    rng = np.random.default_rng(11)
    m, _ = block_matrix([8, 8], 0.8, 0.2, jitter=0.1, seed=11)
    w = _adjacency(m)
    labels = rng.integers(0, 2, 16)
    if not (np.any(labels == 0) and np.any(labels == 1)):
        labels[0], labels[1] = 0, 1

    def cut(lab):
        cross = lab[:, None] != lab[None, :]
        return float(np.sum(w[cross]) / 2.0)

    before = cut(labels)
    after = cut(_refine(w, np.ones(16), labels, 2, tol=0.5))
    assert after <= before + 1e-12


def test_partition_invariants_enforced():
    with pytest.raises(ValueError, match="disjoint"):
        Partition((frozenset({1, 2}), frozenset({2, 3})), "KMeansStyle", {})
    with pytest.raises(ValueError, match="empty"):
        Partition((frozenset(),), "KMeansStyle", {})


def test_estimator_facades():
    m, truth = block_matrix([5, 5], 0.9, 0.05)
    lab_semep = DensityCommunities().fit_predict(m)
    lab_metis = MultilevelCommunities(k=2).fit_predict(m)
    lab_kmeans = KMeansCommunities(k=2).fit_predict(m.values, m.ids)
    for lab in (lab_semep, lab_metis, lab_kmeans):
        assert adjusted_rand_score(truth, lab) == 1.0
