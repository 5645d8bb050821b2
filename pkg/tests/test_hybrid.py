import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from overlaysim.core import InvariantViolated
from overlaysim.graphs import Graph, InvalidGraph, generate
from overlaysim.hybrid_wft import BLUE, RED, HybridWFT, check_cluster_forest, effective_degree, roots_of, run_hybrid_wft
from overlaysim.sketch import SampleResult


def test_single_node():
    r = run_hybrid_wft(Graph(1, []))
    assert r.success and r.tree.n == 1 and r.phases == 0


def test_disconnected_rejected():
    with pytest.raises(InvalidGraph):
        HybridWFT(Graph(4, [(0, 1), (2, 3)]))


@settings(max_examples=15)
@given(st.sampled_from(["line", "cycle", "random_connected", "binary_tree", "caterpillar"]),
       st.integers(2, 96), st.integers(0, 1000))
def test_output_is_well_formed(family, n, seed):
    r = run_hybrid_wft(generate(family, n, {}, seed), seed=seed)
    assert r.success, r.failure
    assert r.tree.is_valid() and r.tree.max_degree <= 3
    assert not r.ledger.violations


def test_check_cluster_forest():
    assert check_cluster_forest([]) == 0
    assert check_cluster_forest([(1, 2, "a"), (2, 3, "m"), (3, 4, "a")]) == 3
    with pytest.raises(InvariantViolated):
        check_cluster_forest([(1, 2, "a"), (2, 3, "a"), (3, 1, "m")])
    with pytest.raises(InvariantViolated):
        check_cluster_forest([(1, 2, "a"), (2, 3, "a"), (3, 4, "a"), (4, 5, "a")])
    with pytest.raises(InvariantViolated):
        check_cluster_forest([(1, 2, "a"), (2, 1, "m")])


def _group_on_star(k, colors):
    """k leaves all sampling the centre 0; every node starts as its own cluster."""
    g = Graph(k + 1, [(0, v) for v in range(1, k + 1)])
    h = HybridWFT(g, seed=1)
    n = g.n
    edge = np.full(n, -1)
    inner = np.full(n, -1)
    outer = np.full(n, -1)
    edge[1:] = np.arange(1, n)
    inner[1:] = np.arange(1, n)
    outer[1:] = 0
    res = SampleResult(np.ones(n, dtype=bool), edge, inner, outer)
    return h.hybrid_group(res, np.asarray(colors))


@pytest.mark.parametrize("k,pairs", [(2, 1), (4, 2), (6, 3), (3, 1), (5, 2)])
def test_rejected_requesters_are_paired(k, pairs):
    # everyone blue: all requests rejected, matched in ascending root order
    rec = _group_on_star(k, [BLUE] * (k + 1))
    assert not rec.accepted.any()
    assert len(rec.pairs) == pairs
    assert rec.pairs[0] == (1, 2)
    assert rec.arrivals[0] == k


def test_red_target_accepts_blue():
    rec = _group_on_star(3, [RED, BLUE, RED, BLUE])
    assert rec.accepted.tolist() == [True, False, True]
    assert rec.pairs == []
    assert check_cluster_forest(rec.cluster_edges) <= 3


def test_roots_and_effective_degree():
    parent = np.array([-1, 0, 1, -1, 3])
    assert roots_of(parent).tolist() == [0, 0, 0, 3, 3]
    g = generate("line", 5)
    assert effective_degree(g, roots_of(parent)).tolist() == [0, 0, 1, 1, 0]


def test_phase_checks_run():
    r = run_hybrid_wft(generate("random_connected", 128, {}, 4), seed=4)
    assert r.success
    assert r.forest_checks == r.phases and r.max_forest_diameter <= 3
    assert r.contraction_checks > 0
    assert len(r.phase_rounds) == r.phases
