"""Partition-quality metrics over a similarity matrix, normalized so higher is better.

All metrics read the off-diagonal similarity entries as edge weights, clipped
to [0, 1] (self-similarities are ignored; negative entries carry no weight).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .communities import Partition
from .sim import SimilarityMatrix

__all__ = [
    "QualityReport",
    "inv_conductance",
    "performance",
    "inv_total_cut",
    "modularity",
    "coverage",
    "quality_report",
]


@dataclass(frozen=True)
class QualityReport:
    inv_conductance: float
    performance: float
    inv_total_cut: float
    modularity_raw: float
    modularity_scaled: float
    coverage: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def tsv_row(self, label: str) -> str:
        return (
            f"{label}\t{self.inv_conductance!r}\t{self.performance!r}"
            f"\t{self.inv_total_cut!r}\t{self.modularity_scaled!r}\t{self.coverage!r}"
        )


def _weights_and_labels(p: Partition, m: SimilarityMatrix) -> tuple[np.ndarray, np.ndarray]:
    if p.members() != set(m.ids):
        raise ValueError("partition does not cover the matrix ids")
    w = np.clip(m.values, 0.0, 1.0).copy()
    np.fill_diagonal(w, 0.0)
    return w, p.labels_for(m.ids)


def inv_conductance(p: Partition, m: SimilarityMatrix, aggregate: str = "mean") -> float:
    """1 - Conductance(K), conductance per community being cut/min(vol, vol-complement),
    aggregated over communities by mean (or max)."""
    w, labels = _weights_and_labels(p, m)
    deg = w.sum(axis=1)
    total_vol = deg.sum()
    phis = []
    for ci in range(p.k):
        inside = labels == ci
        vol = deg[inside].sum()
        cut = w[np.ix_(inside, ~inside)].sum()
        denom = min(vol, total_vol - vol)
        phis.append(0.0 if denom == 0.0 else cut / denom)
    agg = max(phis) if aggregate == "max" else float(np.mean(phis))
    return min(1.0, max(0.0, 1.0 - agg))


def performance(p: Partition, m: SimilarityMatrix, weighted: bool = True) -> float:
    """Intra-pair similarity plus inter-pair dissimilarity, over all unordered pairs."""
    w, labels = _weights_and_labels(p, m)
    n = len(m.ids)
    if n < 2:
        return 1.0
    same = labels[:, None] == labels[None, :]
    iu = np.triu_indices(n, k=1)
    s = w[iu] if weighted else (w[iu] > 0.0).astype(float)
    intra = same[iu]
    val = float((s[intra].sum() + (1.0 - s[~intra]).sum()) / s.size)
    return min(1.0, max(0.0, val))


def inv_total_cut(p: Partition, m: SimilarityMatrix) -> float:
    """1 - (inter-community similarity mass / total similarity mass)."""
    w, labels = _weights_and_labels(p, m)
    same = labels[:, None] == labels[None, :]
    total = w.sum() / 2.0
    if total == 0.0:
        return 1.0
    inter = w[~same].sum() / 2.0
    return min(1.0, max(0.0, float(1.0 - inter / total)))


def modularity(p: Partition, m: SimilarityMatrix) -> tuple[float, float]:
    """Weighted Newman modularity (raw in [-0.5, 1]) and its [0, 1] rescaling."""
    w, labels = _weights_and_labels(p, m)
    total = w.sum() / 2.0
    if total == 0.0:
        raw = 0.0
    else:
        deg = w.sum(axis=1)
        raw = 0.0
        for ci in range(p.k):
            inside = labels == ci
            w_in = w[np.ix_(inside, inside)].sum() / 2.0
            vol = deg[inside].sum()
            raw += w_in / total - (vol / (2.0 * total)) ** 2
    raw = min(1.0, max(-0.5, float(raw)))
    return raw, (raw + 0.5) / 1.5


def coverage(p: Partition, m: SimilarityMatrix) -> float:
    """Intra-community similarity mass as a fraction of the total mass."""
    w, labels = _weights_and_labels(p, m)
    same = labels[:, None] == labels[None, :]
    total = w.sum() / 2.0
    if total == 0.0:
        return 1.0
    np.fill_diagonal(same, False)
    return min(1.0, max(0.0, float(w[same].sum() / 2.0 / total)))


def quality_report(p: Partition, m: SimilarityMatrix) -> QualityReport:
    raw, scaled = modularity(p, m)
    return QualityReport(
        inv_conductance=inv_conductance(p, m),
        performance=performance(p, m),
        inv_total_cut=inv_total_cut(p, m),
        modularity_raw=raw,
        modularity_scaled=scaled,
        coverage=coverage(p, m),
    )
