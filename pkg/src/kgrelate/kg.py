"""Typed knowledge graph: N-Triples ingestion, relatedness closure, serialization.

Entities carry one of four kinds (standard, framework, layer, other) derived
from their ``type`` edges.  The ``relatedTo`` relation between standards is
treated as symmetric and transitive; :func:`materialize_closure` turns every
connected component of the base relatedness graph into a bidirectional clique.
"""

from __future__ import annotations

import enum
import re
import warnings
from dataclasses import dataclass, field
from typing import IO, Iterable, NamedTuple

__all__ = [
    "EntityKind",
    "Edge",
    "KnowledgeGraph",
    "ParseError",
    "DEFAULT_LABEL_MAP",
    "RELATED_TO",
    "TYPE",
    "CLASSIFIED_AS",
    "IS_LAYER_OF",
    "parse_ntriples",
    "parse_ntriples_file",
    "materialize_closure",
    "serialize_ntriples",
]

# Canonical relation labels.  Anything else is kept as its raw IRI.
RELATED_TO = "relatedTo"
TYPE = "type"
CLASSIFIED_AS = "classifiedAs"
IS_LAYER_OF = "isLayerOf"

_NS = "https://w3id.org/i40/sto#"
_RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

# IRI -> canonical label.  Matched case-sensitively; callers may pass their
# own map to parse graphs using a different vocabulary.
DEFAULT_LABEL_MAP: dict[str, str] = {
    _NS + "relatedTo": RELATED_TO,
    _RDF_TYPE: TYPE,
    _NS + "hasClassification": CLASSIFIED_AS,
    _NS + "classifiedAs": CLASSIFIED_AS,
    _NS + "isLayerOf": IS_LAYER_OF,
    _NS + "hasLayer": IS_LAYER_OF,
}

# Type-edge objects that determine an entity's kind.
DEFAULT_KIND_MAP: dict[str, "EntityKind"] = {}


class EntityKind(enum.Enum):
    STANDARD = "Standard"
    FRAMEWORK = "StandardizationFramework"
    LAYER = "FrameworkLayer"
    OTHER = "Other"


DEFAULT_KIND_MAP = {
    _NS + "Standard": EntityKind.STANDARD,
    _NS + "StandardizationFramework": EntityKind.FRAMEWORK,
    _NS + "FrameworkLayer": EntityKind.LAYER,
}


class ParseError(ValueError):
    """Raised for a malformed N-Triples line; carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


# NamedTuple rather than a frozen dataclass: closure materialization creates
# edges in bulk and tuple hashing keeps that linear pass cheap
class Edge(NamedTuple):
    subject: int
    label: str
    object: int


_TRIPLE_RE = re.compile(r"^<([^<>\s]+)>\s+<([^<>\s]+)>\s+<([^<>\s]+)>\s*\.$")


@dataclass
class KnowledgeGraph:
    """Immutable-after-construction graph of typed entities and labeled edges."""

    iris: list[str] = field(default_factory=list)
    kinds: list[EntityKind] = field(default_factory=list)
    edges: set[Edge] = field(default_factory=set)
    label_iris: dict[str, str] = field(default_factory=dict)  # canonical label -> output IRI
    closure_applied: bool = False

    def __post_init__(self) -> None:
        self._index = {iri: i for i, iri in enumerate(self.iris)}

    @property
    def n_entities(self) -> int:
        return len(self.iris)

    def index_of(self, iri: str) -> int:
        return self._index[iri]

    def add_entity(self, iri: str, kind: EntityKind = EntityKind.OTHER) -> int:
        if iri in self._index:
            return self._index[iri]
        self.iris.append(iri)
        self.kinds.append(kind)
        self._index[iri] = len(self.iris) - 1
        return self._index[iri]

    def standards(self) -> list[int]:
        """Indices of all Standard entities, in index order."""
        return [i for i, k in enumerate(self.kinds) if k is EntityKind.STANDARD]

    def edges_with_label(self, label: str) -> list[Edge]:
        return sorted(
            (e for e in self.edges if e.label == label),
            key=lambda e: (e.subject, e.object),
        )

    def related_pairs(self, standards_only: bool = True) -> set[tuple[int, int]]:
        """Unordered (low, high) index pairs connected by relatedTo edges."""
        pairs = set()
        for e in self.edges:
            if e.label != RELATED_TO or e.subject == e.object:
                continue
            if standards_only and not (
                self.kinds[e.subject] is EntityKind.STANDARD
                and self.kinds[e.object] is EntityKind.STANDARD
            ):
                continue
            a, b = sorted((e.subject, e.object))
            pairs.add((a, b))
        return pairs

    def copy(self) -> "KnowledgeGraph":
        return KnowledgeGraph(
            iris=list(self.iris),
            kinds=list(self.kinds),
            edges=set(self.edges),
            label_iris=dict(self.label_iris),
            closure_applied=self.closure_applied,
        )


def parse_ntriples(
    lines: Iterable[str] | IO[str],
    label_map: dict[str, str] | None = None,
    kind_map: dict[str, EntityKind] | None = None,
) -> KnowledgeGraph:
    """Parse an N-Triples stream (IRIs only, one triple per line).

    Entity indices are assigned in first-seen order, so parsing is
    deterministic for a fixed input.  Entity kinds come from ``type`` edges;
    an unknown type object maps to :attr:`EntityKind.OTHER`.
    """
    label_map = DEFAULT_LABEL_MAP if label_map is None else label_map
    kind_map = DEFAULT_KIND_MAP if kind_map is None else kind_map

    g = KnowledgeGraph()
    g.label_iris = {canon: iri for iri, canon in reversed(list(label_map.items()))}
    typed: set[int] = set()

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _TRIPLE_RE.match(line)
        if m is None:
            if not line.endswith("."):
                raise ParseError(lineno, "missing terminal ' .'")
            raise ParseError(lineno, f"not a valid <s> <p> <o> . triple: {line!r}")
        s_iri, p_iri, o_iri = m.groups()
        label = label_map.get(p_iri, p_iri)

        if label == TYPE:
            kind = kind_map.get(o_iri, EntityKind.OTHER)
            si = g.add_entity(s_iri)
            if si in typed and g.kinds[si] is not kind:
                warnings.warn(
                    f"conflicting type for <{s_iri}>: keeping {g.kinds[si].value}",
                    stacklevel=2,
                )
            elif si not in typed:
                g.kinds[si] = kind
                typed.add(si)
            oi = g.add_entity(o_iri)
            g.edges.add(Edge(si, TYPE, oi))
            continue

        si = g.add_entity(s_iri)
        oi = g.add_entity(o_iri)
        if label == RELATED_TO and si == oi:
            continue  # no self-relatedness
        g.edges.add(Edge(si, label, oi))

    return g


def parse_ntriples_file(path: str, **kwargs) -> KnowledgeGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_ntriples(fh, **kwargs)


def materialize_closure(g: KnowledgeGraph) -> KnowledgeGraph:
    """Symmetric-transitive closure of relatedTo over Standard entities.

    Every connected component of the undirected base relatedness graph becomes
    a clique, stored as both directed edges.  Self-loops are discarded and
    edges with other labels pass through untouched.  Idempotent.
    """
    out = g.copy()
    standards = set(g.standards())

    # union-find over standards connected by relatedTo
    parent = {i: i for i in standards}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in g.related_pairs(standards_only=True):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    components: dict[int, list[int]] = {}
    for i in standards:
        components.setdefault(find(i), []).append(i)

    for members in components.values():
        for a in members:
            for b in members:
                if a != b:
                    out.edges.add(Edge(a, RELATED_TO, b))

    out.closure_applied = True
    return out


def serialize_ntriples(g: KnowledgeGraph) -> str:
    """Re-serialize a graph in the input N-Triples dialect, sorted for stable output."""
    lines = []
    # sort by IRI text, not index, so parse -> serialize round-trips bytewise
    for e in sorted(
        g.edges,
        key=lambda e: (g.iris[e.subject], g.label_iris.get(e.label, e.label), g.iris[e.object]),
    ):
        p_iri = g.label_iris.get(e.label, e.label)
        lines.append(f"<{g.iris[e.subject]}> <{p_iri}> <{g.iris[e.object]}> .")
    return "\n".join(lines) + ("\n" if lines else "")


def entity_index_tsv(g: KnowledgeGraph) -> str:
    """TSV of (iri, index, kind), one row per entity in index order."""
    rows = [f"{iri}\t{i}\t{g.kinds[i].value}" for i, iri in enumerate(g.iris)]
    return "\n".join(rows) + ("\n" if rows else "")
