import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from overlaysim.graphs import (
    Graph,
    InvalidGraph,
    InvalidParams,
    RootedTree,
    TooLarge,
    check_satisfactory,
    check_wft,
    conductance_exact,
    generate,
    is_star,
    load_edgelist,
    save_edgelist,
)

FAMILIES = ["line", "cycle", "star", "complete", "binary_tree", "caterpillar", "barbell", "random_connected"]


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("n", [3, 17, 64])
def test_generators_connected(family, n):
    g = generate(family, n, {}, 3)
    assert g.n == n and g.is_connected()


def test_generator_edge_counts():
    assert generate("line", 10).m == 9
    assert generate("cycle", 10).m == 10
    assert generate("complete", 6).m == 15
    assert generate("star", 7).max_degree == 6
    g = generate("random_regular", 64, {"d": 6}, 1)
    assert set(g.degrees.tolist()) == {6} and g.is_connected()


def test_generator_is_seeded():
    assert generate("random_connected", 50, {}, 4) == generate("random_connected", 50, {}, 4)
    assert generate("random_connected", 50, {}, 4) != generate("random_connected", 50, {}, 5)


def test_bad_params():
    with pytest.raises(InvalidParams):
        generate("line", 0)
    with pytest.raises(InvalidParams):
        generate("nope", 5)


def test_graph_rejects_self_loops():
    with pytest.raises(InvalidGraph):
        Graph(3, [(1, 1)])


def test_edgelist_roundtrip(tmp_path):
    g = generate("random_connected", 40, {}, 2)
    p = tmp_path / "g.txt"
    save_edgelist(g, p)
    first = p.read_text().splitlines()[0]
    assert first == f"{g.n} {g.m}"
    assert load_edgelist(p) == g


def test_edgelist_disconnected_rejected(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("4 2\n0 1\n2 3\n")
    with pytest.raises(InvalidGraph):
        load_edgelist(p)
    assert load_edgelist(p, require_connected=False).m == 2


def _conductance_oracle(g: Graph) -> float:
    """Second route: enumerate subsets with networkx cut/volume helpers."""
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    G.add_edges_from(g.edges())
    best = math.inf
    nodes = list(range(g.n))
    for r in range(1, g.n):
        for S in itertools.combinations(nodes, r):
            vol = min(nx.volume(G, S), nx.volume(G, set(nodes) - set(S)))
            if vol == 0:
                return 0.0
            best = min(best, nx.cut_size(G, S) / vol)
    return best


@pytest.mark.parametrize("family,n", [("cycle", 8), ("complete", 6), ("line", 7), ("random_connected", 9), ("barbell", 8)])
def test_conductance_matches_networkx(family, n):
    g = generate(family, n, {}, 1)
    assert conductance_exact(g) == pytest.approx(_conductance_oracle(g))


def test_conductance_known_values():
    # cycle of 8: best cut is two arcs of 4, cut 2, volume 8
    assert conductance_exact(generate("cycle", 8)) == pytest.approx(0.25)
    assert conductance_exact(Graph(4, [(0, 1), (2, 3)])) == 0.0
    with pytest.raises(TooLarge):
        conductance_exact(generate("cycle", 21))


def test_tree_checkers():
    t = RootedTree(7, 0, [-1, 0, 0, 1, 1, 2, 2])
    r = check_wft(t, 7)
    assert r.passed and r.maxdeg == 3 and r.depth == 2
    assert str(r) == "PASS maxdeg=3 depth=2"
    star = RootedTree(9, 0, [-1] + [0] * 8)
    assert not check_wft(star, 9).passed
    assert check_satisfactory(star, 9, 3.0).passed
    assert not RootedTree(3, 0, [-1, 2, 1]).is_valid()


def test_is_star():
    assert is_star(4, [(0, 1), (0, 2), (3, 0)])
    assert not is_star(4, [(0, 1), (1, 2), (2, 3)])
    assert is_star(1, [])
    assert is_star(2, [(0, 1)])


@given(st.integers(2, 60), st.integers(0, 1000))
def test_random_connected_property(n, seed):
    g = generate("random_connected", n, {}, seed)
    assert g.is_connected()
    assert all(u != v for u, v in g.edges())
    assert len(set(g.edges())) == g.m


def test_satisfactory_examples():
    star = RootedTree(10, 0, [-1] + [0] * 9)
    assert check_satisfactory(star, 10, 3).passed
    line = RootedTree(64, 0, [-1] + list(range(63)))
    assert not check_satisfactory(line, 64, 2).passed
