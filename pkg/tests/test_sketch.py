import numpy as np
import pytest
from hypothesis import given, strategies as st

from overlaysim.core import RngStream
from overlaysim.graphs import generate
from overlaysim.sketch import (
    broadcast_and_echo,
    find_outgoing,
    hash_prime,
    hp_test_out,
    is_prime,
    next_prime,
)


def _trial_division(x):
    return x >= 2 and all(x % d for d in range(2, int(x ** 0.5) + 1))


@given(st.integers(0, 200000))
def test_is_prime_matches_trial_division(x):
    assert is_prime(x) == _trial_division(x)


def test_next_prime_and_modulus():
    assert next_prime(1) == 2 and next_prime(2) == 3 and next_prime(13) == 17
    for n in (2, 64, 1000, 4096):
        p = hash_prime(n)
        assert is_prime(p) and p > 2 * n * n


def _outgoing(graph, members):
    s = set(members)
    return {(u, v) for u, v in graph.edges() if (u in s) != (v in s)}


@given(st.integers(0, 10000), st.integers(8, 48), st.data())
def test_find_outgoing_is_sound(seed, n, data):
    g = generate("random_connected", n, {}, seed)
    size = data.draw(st.integers(1, n))
    members = data.draw(st.permutations(range(n)))[:size]
    out = _outgoing(g, members)
    r = find_outgoing(g, members, RngStream(seed), 0)
    if r is None:
        return
    u, v = r
    assert u in members and v not in members
    assert (min(u, v), max(u, v)) in out


@given(st.integers(0, 10000), st.integers(4, 40))
def test_hp_test_out_never_errs_on_closed_sets(seed, n):
    g = generate("random_connected", n, {}, seed)
    # the whole vertex set has no outgoing edge
    assert not hp_test_out(g, range(n), RngStream(seed), 0)
    assert find_outgoing(g, range(n), RngStream(seed), 0) is None


def test_find_outgoing_usually_succeeds():
    g = generate("random_connected", 40, {}, 3)
    hits = sum(find_outgoing(g, range(10), RngStream(1), t) is not None for t in range(200))
    assert hits >= 100


def test_broadcast_and_echo():
    parent = [-1, 0, 0, 1, 1, 2]
    agg, msgs, rounds = broadcast_and_echo(parent, [1, 2, 3, 4, 5, 6], "sum")
    assert agg == 21 and msgs == 10 and rounds == 4
    agg, _, _ = broadcast_and_echo(parent, [1, 2, 3, 4, 5, 6], "xor")
    assert agg == 1 ^ 2 ^ 3 ^ 4 ^ 5 ^ 6
    with pytest.raises(ValueError):
        broadcast_and_echo([-1, -1], [0, 0])
