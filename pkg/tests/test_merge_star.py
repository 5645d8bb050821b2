import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from overlaysim.core import GossipReply, ModelConfig
from overlaysim.graphs import Graph, generate
from overlaysim.harness import relabeled_edges
from overlaysim.merge_star import DegreeTooLarge, MergeStar, run_merge_star, star_to_topology


def test_single_node():
    r = run_merge_star(Graph(1, []))
    assert r.phases == 0 and r.rounds == 0 and r.is_star()


def test_two_nodes():
    r = run_merge_star(Graph(2, [(0, 1)]), seed=3)
    assert r.is_star() and r.success


@given(st.sampled_from(["line", "cycle", "star", "random_connected", "barbell"]),
       st.integers(2, 80), st.integers(0, 1000))
def test_star_output(family, n, seed):
    r = run_merge_star(generate(family, n, {}, seed), seed=seed)
    assert r.success and r.is_star()
    assert r.ledger.rounds == 7 * r.phases
    assert r.ledger.total_messages <= 14 * n * max(r.phases, 1)
    # cluster count never increases
    for rec in r.records:
        assert rec.clusters_after <= rec.clusters


def test_star_input_already_done():
    r = run_merge_star(generate("star", 30), seed=1)
    assert r.is_star()


def test_reduced_bandwidth_scales_rounds():
    g = generate("random_connected", 64, {}, 2)
    full = run_merge_star(g, ModelConfig(GossipReply()), seed=2)
    half = run_merge_star(g, ModelConfig(GossipReply(b_bits=3)), seed=2)
    assert half.rounds == full.ledger.rounds * 2


@pytest.mark.parametrize("target", ["cycle", "line", "binary_tree"])
def test_star_to_topology_isomorphic(target):
    n = 32
    H = generate(target, n)
    r = star_to_topology(0, n, H, seed=5)
    assert r.edges == relabeled_edges(H, r.mapping)
    G = nx.Graph(r.edges)
    assert nx.is_isomorphic(G, nx.Graph(H.edges()))
    assert r.rounds <= H.max_degree + 2


def test_star_to_topology_degree_limit():
    with pytest.raises(DegreeTooLarge):
        star_to_topology(0, 20, generate("star", 20))
