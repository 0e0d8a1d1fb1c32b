"""Hard partitioning of standards into communities.

Three interchangeable strategies: Lloyd k-means over embedding vectors,
a native multilevel (heavy-edge matching + move-based refinement) balanced
graph partitioner, and a greedy density-threshold agglomerative partitioner
over the thresholded similarity graph.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from sklearn.base import BaseEstimator

from .sim import SimilarityMatrix

__all__ = [
    "Partition",
    "partition_kmeans",
    "partition_multilevel",
    "partition_semep_style",
    "default_k",
    "KMeansCommunities",
    "MultilevelCommunities",
    "DensityCommunities",
]


@dataclass(frozen=True)
class Partition:
    """Disjoint non-empty communities covering all given entity ids."""

    communities: tuple[frozenset[int], ...]
    algorithm: str
    parameters: dict

    def __post_init__(self):
        seen: set[int] = set()
        for c in self.communities:
            if not c:
                raise ValueError("empty community")
            if seen & c:
                raise ValueError("communities are not disjoint")
            seen |= c

    @property
    def k(self) -> int:
        return len(self.communities)

    def members(self) -> set[int]:
        out: set[int] = set()
        for c in self.communities:
            out |= c
        return out

    def labels_for(self, ids) -> np.ndarray:
        """Community label per id, in the order of ``ids``."""
        lut = {}
        for ci, c in enumerate(self.communities):
            for e in c:
                lut[e] = ci
        return np.asarray([lut[i] for i in ids], dtype=np.intp)


def _labels_to_partition(ids, labels, algorithm: str, parameters: dict) -> Partition:
    groups: dict[int, set[int]] = {}
    for eid, lab in zip(ids, labels):
        groups.setdefault(int(lab), set()).add(int(eid))
    comms = tuple(frozenset(groups[lab]) for lab in sorted(groups))
    return Partition(communities=comms, algorithm=algorithm, parameters=parameters)


# ---------------------------------------------------------------------------
# k-means over embedding vectors


def _kmeanspp_seeds(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total == 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(vectors: np.ndarray, k: int, rng, max_iter: int) -> tuple[np.ndarray, float]:
    n = vectors.shape[0]
    centers = _kmeanspp_seeds(vectors, k, rng)
    labels = np.full(n, -1, dtype=np.intp)
    for _ in range(max_iter):
        d2 = np.sum((vectors[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        for j in range(k):
            if not np.any(new_labels == j):
                big = int(np.bincount(new_labels, minlength=k).argmax())
                in_big = np.flatnonzero(new_labels == big)
                far = in_big[int(np.argmax(d2[in_big, big]))]
                new_labels[far] = j
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            centers[j] = vectors[labels == j].mean(axis=0)
    inertia = float(np.sum((vectors - centers[labels]) ** 2))
    return labels, inertia


def partition_kmeans(
    vectors: np.ndarray,
    ids,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    n_init: int = 10,
) -> Partition:
    """Lloyd's iteration with k-means++ seeding, best of ``n_init`` restarts.

    Empty clusters are repaired by re-seeding them with the point farthest
    from the centroid of the largest cluster."""
    vectors = np.asarray(vectors, dtype=float)
    ids = [int(i) for i in ids]
    n = vectors.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(n_init):
        labels, inertia = _lloyd(vectors, k, rng, max_iter)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return _labels_to_partition(ids, best_labels, "KMeansStyle", {"k": k, "seed": seed})


# ---------------------------------------------------------------------------
# multilevel balanced graph partitioning


def _adjacency(m: SimilarityMatrix) -> np.ndarray:
    w = np.clip(m.values, 0.0, None).copy()
    np.fill_diagonal(w, 0.0)
    return w


def partition_multilevel(
    m: SimilarityMatrix,
    k: int,
    balance_tol: float = 0.1,
    seed: int = 0,
) -> Partition:
    """Multilevel weighted-cut minimization: heavy-edge-matching coarsening,
    greedy recursive bisection at the coarsest level, move-based refinement
    on the way back up.  Parts stay within (1 + balance_tol) of average size
    where the graph permits; otherwise balance is relaxed with a warning."""
    if not m.thresholded:
        raise ValueError("multilevel partitioner expects a thresholded matrix")
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = list(m.ids)
    n = len(ids)
    if k > n:
        raise ValueError(f"k must be <= {n}")
    w = _adjacency(m)
    rng = np.random.default_rng(seed)
    labels = _multilevel(w, np.ones(n), k, balance_tol, rng)
    labels = _ensure_k_parts(w, np.ones(n), labels, k)
    vw = np.bincount(labels, minlength=k).astype(float)
    if np.max(vw) > (1.0 + balance_tol) * n / k + 1e-9:
        warnings.warn("balance constraint relaxed to honor graph structure", stacklevel=2)
    return _labels_to_partition(
        ids, labels, "MetisStyle", {"k": k, "balance_tol": balance_tol, "seed": seed}
    )


def _multilevel(w, vwgt, k, tol, rng) -> np.ndarray:
    n = w.shape[0]
    if n <= max(10 * k, 16):
        labels = _recursive_bisection(w, vwgt, k, rng)
        return _refine(w, vwgt, labels, k, tol)
    match = _heavy_edge_matching(w, rng)
    coarse_of = _matching_to_map(match, n)
    nc = coarse_of.max() + 1
    if nc == n:  # nothing matched; stop coarsening
        labels = _recursive_bisection(w, vwgt, k, rng)
        return _refine(w, vwgt, labels, k, tol)
    cw = np.zeros((nc, nc))
    np.add.at(cw, (coarse_of[:, None].repeat(n, 1), coarse_of[None, :].repeat(n, 0)), w)
    np.fill_diagonal(cw, 0.0)
    cvw = np.zeros(nc)
    np.add.at(cvw, coarse_of, vwgt)
    coarse_labels = _multilevel(cw, cvw, k, tol, rng)
    labels = coarse_labels[coarse_of]
    return _refine(w, vwgt, labels, k, tol)


def _heavy_edge_matching(w: np.ndarray, rng) -> dict[int, int]:
    n = w.shape[0]
    matched = np.zeros(n, dtype=bool)
    match: dict[int, int] = {}
    for u in rng.permutation(n):
        if matched[u]:
            continue
        row = np.where(matched, -1.0, w[u])
        row[u] = -1.0
        v = int(np.argmax(row))
        if row[v] <= 0.0:
            continue
        match[int(u)] = v
        matched[u] = matched[v] = True
    return match


def _matching_to_map(match: dict[int, int], n: int) -> np.ndarray:
    coarse_of = np.full(n, -1, dtype=np.intp)
    nxt = 0
    for u in range(n):
        if coarse_of[u] >= 0:
            continue
        coarse_of[u] = nxt
        v = match.get(u)
        if v is not None:
            coarse_of[v] = nxt
        nxt += 1
    # partners discovered before their mates
    for u, v in match.items():
        coarse_of[v] = coarse_of[u]
    return coarse_of


def _recursive_bisection(w, vwgt, k, rng) -> np.ndarray:
    n = w.shape[0]
    if k == 1:
        return np.zeros(n, dtype=np.intp)
    k1 = k // 2
    target = vwgt.sum() * (k1 / k)
    region = _greedy_grow(w, vwgt, target, rng)
    labels = np.empty(n, dtype=np.intp)
    a = np.flatnonzero(region)
    b = np.flatnonzero(~region)
    if a.size == 0 or b.size == 0:  # degenerate; force a split
        a, b = np.arange(n)[: max(1, n // 2)], np.arange(n)[max(1, n // 2) :]
    la = _recursive_bisection(w[np.ix_(a, a)], vwgt[a], k1, rng)
    lb = _recursive_bisection(w[np.ix_(b, b)], vwgt[b], k - k1, rng)
    labels[a] = la
    labels[b] = lb + k1
    return labels


def _greedy_grow(w, vwgt, target, rng) -> np.ndarray:
    """Grow a region from a random seed, always absorbing the outside vertex
    with the strongest connection to the region (ties to the lowest index)."""
    n = w.shape[0]
    region = np.zeros(n, dtype=bool)
    start = int(rng.integers(n))
    region[start] = True
    weight = vwgt[start]
    gain = w[start].copy()
    while weight < target and not region.all():
        cand = np.where(region, -np.inf, gain)
        v = int(np.argmax(cand))
        if weight + vwgt[v] > target and abs(weight - target) <= abs(weight + vwgt[v] - target):
            break
        region[v] = True
        weight += vwgt[v]
        gain += w[v]
    return region


def _refine(w, vwgt, labels, k, tol) -> np.ndarray:
    """Greedy single-vertex moves with positive cut gain, balance permitting.
    The weighted cut never increases."""
    labels = labels.copy()
    n = w.shape[0]
    total = vwgt.sum()
    cap = (1.0 + tol) * total / k
    part_w = np.zeros(k)
    np.add.at(part_w, labels, vwgt)
    for _ in range(10):
        moved = False
        conn = np.zeros((n, k))
        for j in range(k):
            conn[:, j] = w @ (labels == j)
        for u in range(n):
            cur = labels[u]
            if part_w[cur] - vwgt[u] <= 0:  # never empty a part
                continue
            gains = conn[u] - conn[u, cur]
            gains[cur] = -np.inf
            gains[part_w + vwgt[u] > cap] = -np.inf
            best = int(np.argmax(gains))
            if gains[best] > 1e-12:
                part_w[cur] -= vwgt[u]
                part_w[best] += vwgt[u]
                conn[:, cur] -= w[u]
                conn[:, best] += w[u]
                labels[u] = best
                moved = True
        if not moved:
            break
    return labels


def _ensure_k_parts(w, vwgt, labels, k) -> np.ndarray:
    """Repair empty parts by peeling the weakest-connected vertex off the largest part."""
    labels = labels.copy()
    for j in range(k):
        while not np.any(labels == j):
            counts = np.bincount(labels, minlength=k)
            big = int(np.argmax(counts))
            members = np.flatnonzero(labels == big)
            inside = w[np.ix_(members, members)].sum(axis=1)
            labels[members[int(np.argmin(inside))]] = j
    return labels


def weighted_cut(m: SimilarityMatrix, p: Partition) -> float:
    """Total similarity weight crossing community boundaries (each pair once)."""
    w = _adjacency(m)
    labels = p.labels_for(m.ids)
    cross = labels[:, None] != labels[None, :]
    return float(np.sum(w[cross]) / 2.0)


# ---------------------------------------------------------------------------
# density-threshold agglomerative partitioning (SemEP-style)


def partition_semep_style(m: SimilarityMatrix) -> Partition:
    """Greedy agglomerative partitioning driven by the threshold cutoff.

    Standards are visited in order of decreasing total similarity.  Each joins
    the community with the highest mean similarity over its retained (nonzero)
    links to members, provided that mean clears the cutoff; otherwise it opens
    a new community.  One refinement pass re-assigns vertices while the mean
    intra-community similarity improves.  Ties break by entity index, so the
    result is deterministic.
    """
    if not m.thresholded:
        raise ValueError("density partitioner expects a thresholded matrix")
    ids = list(m.ids)
    n = len(ids)
    w = _adjacency(m)
    cutoff = m.cutoff_value if np.isfinite(m.cutoff_value) else 0.0

    totals = w.sum(axis=1)
    order = sorted(range(n), key=lambda i: (-totals[i], i))

    comms: list[list[int]] = []
    for v in order:
        best, best_avg = -1, 0.0
        for ci, members in enumerate(comms):
            links = w[v, members]
            pos = links[links > 0.0]
            if pos.size == 0:
                continue
            avg = float(pos.mean())
            if avg > best_avg + 1e-15:
                best, best_avg = ci, avg
        if best >= 0 and best_avg >= cutoff and best_avg > 0.0:
            comms[best].append(v)
        else:
            comms.append([v])

    labels = np.empty(n, dtype=np.intp)
    for ci, members in enumerate(comms):
        labels[members] = ci
    labels = _semep_refine(w, labels)
    return _labels_to_partition(
        [ids[i] for i in range(n)],
        labels,
        "SemEPStyle",
        {"cutoff": float(cutoff), "threshold_level": m.threshold_level},
    )


def _intra_mean(w: np.ndarray, labels: np.ndarray) -> float:
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    pairs = same.sum() / 2
    if pairs == 0:
        return 0.0
    return float(w[same].sum() / 2.0 / pairs)


def _semep_refine(w: np.ndarray, labels: np.ndarray) -> np.ndarray:
    labels = labels.copy()
    n = w.shape[0]
    current = _intra_mean(w, labels)
    improved = True
    while improved:
        improved = False
        for u in range(n):
            best_lab, best_obj = labels[u], current
            for lab in np.unique(labels):
                if lab == labels[u]:
                    continue
                trial = labels.copy()
                trial[u] = lab
                obj = _intra_mean(w, trial)
                if obj > best_obj + 1e-12:
                    best_lab, best_obj = lab, obj
            if best_lab != labels[u]:
                labels[u] = best_lab
                current = best_obj
                improved = True
    # renumber densely
    _, labels = np.unique(labels, return_inverse=True)
    return labels.astype(np.intp)


def default_k(m: SimilarityMatrix) -> int:
    """Connected components of the thresholded similarity graph."""
    if not m.thresholded:
        raise ValueError("default_k expects a thresholded matrix")
    w = _adjacency(m)
    n_comp, _ = connected_components(csr_matrix(w > 0.0), directed=False)
    return int(n_comp)


# ---------------------------------------------------------------------------
# estimator facades


class KMeansCommunities(BaseEstimator):
    def __init__(self, k: int | None = None, seed: int = 0, max_iter: int = 300):
        self.k = k
        self.seed = seed
        self.max_iter = max_iter

    def fit_predict(self, vectors, ids=None) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=float)
        ids = list(range(vectors.shape[0])) if ids is None else list(ids)
        k = self.k if self.k is not None else 1
        self.partition_ = partition_kmeans(vectors, ids, k, self.seed, self.max_iter)
        return self.partition_.labels_for(ids)


class MultilevelCommunities(BaseEstimator):
    def __init__(self, k: int | None = None, balance_tol: float = 0.1, seed: int = 0):
        self.k = k
        self.balance_tol = balance_tol
        self.seed = seed

    def fit_predict(self, m: SimilarityMatrix) -> np.ndarray:
        k = self.k if self.k is not None else default_k(m)
        self.partition_ = partition_multilevel(m, k, self.balance_tol, self.seed)
        return self.partition_.labels_for(m.ids)


class DensityCommunities(BaseEstimator):
    def fit_predict(self, m: SimilarityMatrix) -> np.ndarray:
        self.partition_ = partition_semep_style(m)
        return self.partition_.labels_for(m.ids)
