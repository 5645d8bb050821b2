import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from overlaysim.core import PhaseBudgetExceeded
from overlaysim.graphs import Graph, conductance_exact, generate
from overlaysim.expander import expander_degree_reduction, load_bound, walk_step_load_check


def test_two_nodes():
    r = expander_degree_reduction(Graph(2, [(0, 1)]), c=1, seed=0)
    assert r.graph.n == 2 and r.graph.max_degree <= 11


@settings(max_examples=20)
@given(st.integers(8, 300), st.integers(1, 3), st.integers(0, 1000))
def test_degree_bound(n, c, seed):
    d = max(3, int(np.ceil(np.log2(n))))
    if (n * d) % 2:
        n += 1
    g = generate("random_regular", n, {"d": d}, seed)
    r = expander_degree_reduction(g, c=c, seed=seed)
    assert r.graph.max_degree <= 11 * c
    # each phase walks only the tokens still active
    assert r.active_per_phase[0] == n * c
    assert all(a > b for a, b in zip(r.active_per_phase, r.active_per_phase[1:]))


def test_small_output_has_positive_conductance():
    g = generate("random_regular", 16, {"d": 4}, 2)
    r = expander_degree_reduction(g, c=2, seed=2)
    assert conductance_exact(r.graph) > 0


def test_phase_budget():
    g = generate("random_regular", 64, {"d": 6}, 1)
    with pytest.raises(PhaseBudgetExceeded):
        expander_degree_reduction(g, c=2, seed=1, max_phases=0)


def test_load_check():
    b = load_bound(1024)
    assert walk_step_load_check([b, b + 1, 0], 1024) == 1


def test_deterministic():
    g = generate("random_regular", 128, {"d": 7}, 3)
    a = expander_degree_reduction(g, seed=9)
    b = expander_degree_reduction(g, seed=9)
    assert a.graph == b.graph and a.ledger.fingerprint() == b.ledger.fingerprint()
