import numpy as np
import pytest
from hypothesis import given, strategies as st

from overlaysim.graphs import _random_tree_edges, RootedTree, check_wft
from overlaysim.treeops import (
    IterationBudgetExceeded,
    child_sibling,
    cycle_labels,
    cycle_positions,
    deterministic_wft,
    euler_tour,
    merge_virtual,
    pointer_jump_tree,
    rc2t,
)


def random_parent(n, seed):
    edges = _random_tree_edges(n, np.random.default_rng(seed))
    return RootedTree.from_edges(n, edges, 0).parent


def test_child_sibling_of_star_is_path():
    bt = child_sibling([-1, 0, 0, 0, 0])
    assert bt.parent.tolist() == [-1, 0, 1, 2, 3]
    assert bt.degree().max() <= 2


@given(st.integers(2, 200), st.integers(0, 10000))
def test_child_sibling_binary(n, seed):
    bt = child_sibling(random_parent(n, seed))
    assert bt.degree().max() <= 3
    assert RootedTree(n, 0, bt.parent).is_valid()


@given(st.integers(2, 200), st.integers(0, 10000))
def test_euler_tour_single_orbit(n, seed):
    cyc = euler_tour(child_sibling(random_parent(n, seed)))
    assert cyc.K == 2 * (n - 1)
    assert (cycle_labels(cyc.succ) == 0).all()
    assert np.bincount(cyc.owner).max() <= 3
    assert (cycle_positions(cyc.succ, 0) >= 0).all()
    # consecutive copies belong to tree neighbours
    assert (cyc.owner[cyc.succ] != cyc.owner).all()


@given(st.integers(2, 3000))
def test_pointer_jump_tree_depth(K):
    succ = np.roll(np.arange(K), -1)
    jr = pointer_jump_tree(succ, 0)
    t = RootedTree(K, 0, jr.parent)
    assert t.is_valid()
    assert np.bincount(jr.parent[jr.parent >= 0], minlength=K).max() <= 2
    assert jr.depth == t.depth <= max(1, (K - 1).bit_length())


def test_pointer_jump_rejects_two_cycles():
    with pytest.raises(ValueError):
        pointer_jump_tree([1, 0, 3, 2], 0)


def test_merge_virtual_drops_self_edges():
    assert merge_virtual([0, 0, 1], [-1, 0, 1], 2) == [(0, 1)]


@given(st.integers(1, 300), st.integers(0, 10000))
def test_deterministic_wft(n, seed):
    tree, info = deterministic_wft(random_parent(n, seed), 0)
    assert tree.is_valid() and tree.root == 0
    assert tree.max_degree <= 3
    if n > 1:
        assert tree.depth <= int(np.ceil(np.log2(info["K"]))) + 2


def test_deterministic_wft_literal_is_wider():
    parent = random_parent(500, 1)
    _, info = deterministic_wft(parent, 0, compact=False)
    _, cinfo = deterministic_wft(parent, 0)
    assert cinfo["merged_maxdeg"] <= 3 < info["merged_maxdeg"]


@given(st.integers(1, 500), st.integers(0, 10000))
def test_rc2t_builds_tree(K, seed):
    succ = np.roll(np.arange(K), -1)
    res = rc2t(succ, gen=np.random.default_rng(seed))
    t = RootedTree(K, int(np.flatnonzero(res.parent < 0)[0]), res.parent)
    assert t.is_valid()
    # a node gains at most two children per iteration, plus one from the final 2-cycle
    kids = np.bincount(res.parent[res.parent >= 0], minlength=K)
    assert kids.max() <= 2 * res.iterations + 1
    assert t.depth <= res.iterations + 1


def test_rc2t_many_cycles():
    succ = np.array([1, 2, 0, 4, 3, 5])
    res = rc2t(succ)
    assert np.count_nonzero(res.parent < 0) == 3


def test_rc2t_budget():
    succ = np.roll(np.arange(64), -1)
    with pytest.raises(IterationBudgetExceeded):
        rc2t(succ, budget=3, coins=lambda it, idx: np.ones(len(idx), dtype=bool))


def test_rc2t_on_1024_cycle_is_satisfactory():
    from overlaysim.calibration import C_SAT
    from overlaysim.graphs import check_satisfactory

    K = 1024
    res = rc2t(np.roll(np.arange(K), -1), gen=np.random.default_rng(1))
    t = RootedTree(K, int(np.flatnonzero(res.parent < 0)[0]), res.parent)
    assert check_satisfactory(t, K, C_SAT).passed
