import numpy as np
import pytest

from kgrelate import materialize_closure, parse_ntriples
from kgrelate.synth import planted_block_of, synth_ntriples


@pytest.fixture(scope="session")
def planted_kg():
    """Two disjoint 10-cliques of standards."""
    return parse_ntriples(synth_ntriples(2, 10, 1.0, 0.0).splitlines())


@pytest.fixture(scope="session")
def planted_truth():
    return planted_block_of(10, 20)


@pytest.fixture(scope="session")
def four_block_kg():
    return parse_ntriples(synth_ntriples(4, 10, 1.0, 0.0).splitlines())


@pytest.fixture(scope="session")
def four_block_truth():
    return planted_block_of(10, 40)


def random_related_graph(n, density, rng):
    """Random standards-only KG text with the given relatedTo edge density."""
    ns = "https://w3id.org/i40/sto#"
    rdf_type = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
    lines = [f"<urn:s{i}> <{rdf_type}> <{ns}Standard> ." for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                lines.append(f"<urn:s{i}> <{ns}relatedTo> <urn:s{j}> .")
    return parse_ntriples(lines)


def closure_pairs_floyd_warshall(g):
    """Independent oracle: boolean Floyd-Warshall reachability over the
    undirected base relatedTo graph restricted to standards."""
    std = g.standards()
    pos = {s: i for i, s in enumerate(std)}
    n = len(std)
    reach = np.zeros((n, n), dtype=bool)
    for a, b in g.related_pairs():
        reach[pos[a], pos[b]] = reach[pos[b], pos[a]] = True
    for k in range(n):
        reach |= reach[:, k : k + 1] & reach[k : k + 1, :]
    pairs = set()
    for i in range(n):
        for j in range(i + 1, n):
            if reach[i, j]:
                pairs.add((std[i], std[j]))
    return pairs


@pytest.fixture
def fw_oracle():
    return closure_pairs_floyd_warshall


@pytest.fixture
def random_graph_factory():
    return random_related_graph
