"""Pairwise cosine similarity over standard embeddings, KDE, quantile thresholding."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "SimilarityMatrix",
    "DensityEstimate",
    "cosine_similarity",
    "build_matrix",
    "kde",
    "apply_threshold",
    "scott_bandwidth",
]


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric matrix of cosine similarities between standards.

    Entries are cos(theta) in [-1, 1] (the complementary "1 - cos" distance
    form seen elsewhere is not stored).  After thresholding, off-diagonal
    entries below the recorded cutoff are zeroed.
    """

    ids: tuple[int, ...]  # entity indices, in graph index order
    values: np.ndarray
    threshold_level: float | None = None
    cutoff_value: float | None = None

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def thresholded(self) -> bool:
        return self.threshold_level is not None

    def offdiag_upper(self) -> np.ndarray:
        iu = np.triu_indices(self.n, k=1)
        return self.values[iu]


@dataclass(frozen=True)
class DensityEstimate:
    sample_points: np.ndarray
    densities: np.ndarray
    bandwidth: float


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.dot(u, v) / (nu * nv))


def build_matrix(vectors: np.ndarray, ids) -> SimilarityMatrix:
    """Full cosine-similarity matrix over the given embedding rows.

    Each unordered pair is computed once and mirrored, so symmetry is exact.
    The diagonal is set to 1.
    """
    vectors = np.asarray(vectors, dtype=float)
    ids = tuple(int(i) for i in ids)
    if vectors.shape[0] != len(ids):
        raise ValueError("one embedding row per id required")
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        bad = ids[int(np.argmin(norms))]
        raise ValueError(f"entity {bad} has a zero embedding vector")
    unit = vectors / norms[:, None]
    n = len(ids)
    values = np.ones((n, n))
    for i in range(n):
        row = unit[i + 1 :] @ unit[i]
        values[i, i + 1 :] = row
        values[i + 1 :, i] = row
    return SimilarityMatrix(ids=ids, values=values)


def scott_bandwidth(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    sigma = float(np.std(values))
    return sigma * values.size ** (-1.0 / 5.0)


def kde(
    values,
    bandwidth: float | None = None,
    grid: int = 512,
) -> DensityEstimate:
    """Gaussian-kernel density on a uniform grid spanning [min-3h, max+3h]."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        raise ValueError("kde needs at least 2 values")
    if bandwidth is None:
        bandwidth = scott_bandwidth(values)
        if bandwidth == 0.0:
            raise ValueError(
                "all values identical; pass an explicit bandwidth for a degenerate sample"
            )
    if bandwidth <= 0.0:
        raise ValueError("bandwidth must be positive")
    lo = values.min() - 3.0 * bandwidth
    hi = values.max() + 3.0 * bandwidth
    xs = np.linspace(lo, hi, grid)
    z = (xs[:, None] - values[None, :]) / bandwidth
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (values.size * bandwidth * np.sqrt(2.0 * np.pi))
    return DensityEstimate(sample_points=xs, densities=dens, bandwidth=float(bandwidth))


def apply_threshold(
    m: SimilarityMatrix,
    level: float,
    absolute_cutoff: float | None = None,
) -> SimilarityMatrix:
    """Zero out off-diagonal entries below the level-quantile cutoff.

    The cutoff is the linear-interpolation quantile of the off-diagonal
    upper-triangle values (self-similarities excluded).  Passing
    ``absolute_cutoff`` bypasses the quantile and uses the given value
    directly (sensitivity-study mode).
    """
    if m.thresholded:
        raise ValueError("matrix is already thresholded")
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"threshold level must be in [0, 1], got {level}")
    upper = m.offdiag_upper()
    if absolute_cutoff is not None:
        cutoff = float(absolute_cutoff)
    elif upper.size == 0:
        cutoff = -np.inf  # single standard: nothing to threshold
    else:
        cutoff = float(np.quantile(upper, level))
    values = m.values.copy()
    mask = values < cutoff
    np.fill_diagonal(mask, False)
    values[mask] = 0.0
    return replace(m, values=values, threshold_level=float(level), cutoff_value=cutoff)


def matrix_tsv(m: SimilarityMatrix, iris: list[str]) -> str:
    """TSV with a header row/column of IRIs."""
    names = [iris[i] for i in m.ids]
    lines = ["\t" + "\t".join(names)]
    for name, row in zip(names, m.values):
        lines.append(name + "\t" + "\t".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def density_tsv(est: DensityEstimate) -> str:
    lines = ["x\tdensity"]
    for x, d in zip(est.sample_points, est.densities):
        lines.append(f"{x!r}\t{d!r}")
    return "\n".join(lines) + "\n"
