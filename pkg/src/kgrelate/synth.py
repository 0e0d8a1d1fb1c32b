"""Synthetic planted-partition knowledge graphs for tests and demos."""

from __future__ import annotations

import numpy as np

__all__ = ["SYNTH_NS", "synth_ntriples", "planted_block_of"]

SYNTH_NS = "https://w3id.org/i40/sto#"
_ENT_NS = "https://example.org/standard/"


def _std_iri(i: int) -> str:
    return f"{_ENT_NS}S{i:04d}"


def planted_block_of(block_size: int, n: int) -> list[int]:
    """Ground-truth block label per standard, matching synth_ntriples order."""
    return [i // block_size for i in range(n)]


def synth_ntriples(
    blocks: int,
    block_size: int,
    intra_p: float = 1.0,
    inter_p: float = 0.0,
    seed: int = 0,
) -> str:
    """Planted-partition relatedTo graph over standards.

    Standards are typed and split into ``blocks`` blocks; each intra-block
    pair is related with probability ``intra_p`` and each inter-block pair
    with ``inter_p``.  One framework with one layer per block is emitted, and
    every standard is classified into its block's layer.
    """
    if not 0.0 <= intra_p <= 1.0 or not 0.0 <= inter_p <= 1.0:
        raise ValueError("probabilities must be in [0, 1]")
    if blocks < 1 or block_size < 1:
        raise ValueError("blocks and block_size must be positive")
    rng = np.random.default_rng(seed)
    n = blocks * block_size
    rdf_type = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

    lines = []
    for i in range(n):
        lines.append(f"<{_std_iri(i)}> <{rdf_type}> <{SYNTH_NS}Standard> .")
    fw = f"{_ENT_NS}framework"
    lines.append(f"<{fw}> <{rdf_type}> <{SYNTH_NS}StandardizationFramework> .")
    for b in range(blocks):
        layer = f"{_ENT_NS}layer{b}"
        lines.append(f"<{layer}> <{rdf_type}> <{SYNTH_NS}FrameworkLayer> .")
        lines.append(f"<{layer}> <{SYNTH_NS}isLayerOf> <{fw}> .")
    for i in range(n):
        layer = f"{_ENT_NS}layer{i // block_size}"
        lines.append(f"<{_std_iri(i)}> <{SYNTH_NS}hasClassification> <{layer}> .")
    for i in range(n):
        for j in range(i + 1, n):
            p = intra_p if i // block_size == j // block_size else inter_p
            if rng.random() < p:
                lines.append(f"<{_std_iri(i)}> <{SYNTH_NS}relatedTo> <{_std_iri(j)}> .")
    return "\n".join(lines) + "\n"
