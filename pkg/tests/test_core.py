import numpy as np
import pytest
from hypothesis import given, strategies as st

from overlaysim.core import (
    Batch,
    CapacityViolation,
    Channel,
    ContactFanoutViolation,
    Engine,
    GossipReply,
    Hybrid,
    IllegalLocalMessage,
    Message,
    ModelConfig,
    PayloadTooLarge,
    ReplyWithoutContact,
    RngStream,
    UnknownDestination,
    charge_bits,
    decode_edge,
    decode_edges,
    encode_edge,
    encode_edges,
    log2_ceil,
    simulate_reduced_bandwidth,
    word_bits,
)
from overlaysim.graphs import Graph, generate


def gossip_engine(n=8, edges=None):
    g = Graph(n, edges if edges is not None else [(i, i + 1) for i in range(n - 1)])
    return Engine(g, ModelConfig(GossipReply()), RngStream(1))


def hybrid_engine(n=16, strict=True, edges=None):
    g = Graph(n, edges if edges is not None else [(i, i + 1) for i in range(n - 1)])
    return Engine(g, ModelConfig(Hybrid(), strict_capacity=strict), RngStream(1))


def test_log2_ceil_values():
    assert [log2_ceil(n) for n in (1, 2, 3, 4, 5, 1024, 1025)] == [0, 1, 2, 2, 3, 10, 11]
    assert word_bits(1) == 1


@given(st.integers(2, 5000), st.data())
def test_edge_codes_roundtrip(n, data):
    u = data.draw(st.integers(0, n - 1))
    v = data.draw(st.integers(0, n - 1).filter(lambda x: x != u))
    assert decode_edge(encode_edge(u, v, n), n) == (min(u, v), max(u, v))
    us, vs = np.array([u, v]), np.array([v, u])
    lo, hi = decode_edges(encode_edges(us, vs, n), n)
    assert lo.tolist() == [min(u, v)] * 2 and hi.tolist() == [max(u, v)] * 2


def test_reduced_bandwidth_multiplier():
    assert simulate_reduced_bandwidth(10, 10, 1024) == 10
    assert simulate_reduced_bandwidth(10, 5, 1024) == 20
    assert simulate_reduced_bandwidth(10, 3, 1024) == 40
    with pytest.raises(ValueError):
        simulate_reduced_bandwidth(1, 0, 8)


def test_rng_stream_is_a_pure_function_of_its_keys():
    a, b = RngStream(7), RngStream(7)
    assert np.array_equal(a.node_values("color", 3, 10), b.node_values("color", 3, 10))
    assert not np.array_equal(a.node_values("color", 3, 10), a.node_values("color", 4, 10))
    assert not np.array_equal(a.node_values("color", 3, 10), RngStream(8).node_values("color", 3, 10))


def test_gossip_fanout_limit():
    e = gossip_engine()
    with pytest.raises(ContactFanoutViolation):
        e.step_gossip_round(Batch.make([0, 0], [1, 1], Channel.GLOBAL_CONTACT))


def test_gossip_reply_requires_contact():
    e = gossip_engine()
    contacts = Batch.make([0], [1], Channel.GLOBAL_CONTACT)
    with pytest.raises(ReplyWithoutContact):
        e.step_gossip_round(contacts, lambda c: Batch.make([2], [1], Channel.GLOBAL_REPLY))
    e = gossip_engine()
    with pytest.raises(ReplyWithoutContact):
        e.step_gossip_round(contacts, lambda c: Batch.make([1, 1], [0, 0], Channel.GLOBAL_REPLY))


def test_gossip_unknown_destination_and_learning():
    e = gossip_engine()
    with pytest.raises(UnknownDestination):
        e.step_gossip_round(Batch.make([0], [5], Channel.GLOBAL_CONTACT))
    e = gossip_engine()
    # 2 contacts 1 carrying id 3; the reply teaches 1 about 3
    e.step_gossip_round(Batch.make([1], [2], Channel.GLOBAL_CONTACT),
                        lambda c: Batch.make([2], [1], Channel.GLOBAL_REPLY, 2, "", [3]))
    assert e.knows(1, 3) and not e.knows(3, 1)
    e.step_gossip_round(Batch.make([1], [3], Channel.GLOBAL_CONTACT))
    assert e.knows(3, 1)
    assert e.ledger.rounds == 2 and e.ledger.total_messages == 3


def test_payload_budget():
    e = gossip_engine()
    with pytest.raises(PayloadTooLarge):
        e.step_gossip_round(Batch.make([0], [1], Channel.GLOBAL_CONTACT, e.word_budget + 1))


def test_local_message_needs_input_edge():
    e = hybrid_engine()
    with pytest.raises(IllegalLocalMessage):
        e.step_hybrid_round(Batch.make([0], [5], Channel.LOCAL_REQUEST))
    e.step_hybrid_round(Batch.make([0], [1], Channel.LOCAL_REQUEST))
    assert e.ledger.local_messages == 1


def test_local_beta_per_directed_edge():
    e = hybrid_engine()
    with pytest.raises(CapacityViolation):
        e.step_hybrid_round(Batch.make([0, 0], [1, 1], Channel.LOCAL_REQUEST))
    e = hybrid_engine()
    e.step_hybrid_round(Batch.make([0, 1], [1, 0], Channel.LOCAL_REQUEST))


def star_engine(n, strict):
    return hybrid_engine(n, strict, [(0, v) for v in range(1, n)])


def test_global_capacity_strict_and_permissive():
    n = 16
    cap = ModelConfig(Hybrid()).global_capacity(n)
    senders = np.arange(1, cap + 3)
    b = Batch.make(senders, np.zeros(len(senders)), Channel.GLOBAL_CONTACT)
    with pytest.raises(CapacityViolation):
        star_engine(n, True).step_hybrid_round(b)
    e = star_engine(n, False)
    st_ = e.step_hybrid_round(b)
    assert st_.dropped == 2 and e.ledger.recv[0] == cap and e.ledger.dropped_messages == 2
    assert len(e.ledger.violations) == 1
    # permissive drops are seed-deterministic
    e2 = star_engine(n, False)
    e2.step_hybrid_round(b)
    assert e.ledger.fingerprint() == e2.ledger.fingerprint()


def test_send_packs_over_capacity():
    n = 16
    e = star_engine(n, True)
    cap = e.capacity
    senders = np.arange(1, n)
    used = e.send(Batch.make(senders, np.zeros(len(senders)), Channel.GLOBAL_CONTACT))
    assert used == -(-len(senders) // cap)
    assert e.ledger.recv[0] == len(senders) and not e.ledger.violations


def test_charge_bits_and_messages():
    m = Message(0, 1, Channel.GLOBAL_CONTACT, payload=(1, 2, 3))
    assert charge_bits(m, 1024) == 30
    b = Batch.from_messages([m, Message(2, 1, Channel.GLOBAL_CONTACT, ids=(5,))])
    assert charge_bits(b, 1024) == 40 and b.carried.tolist() == [[-1], [5]]


def test_model_config_defaults():
    c = ModelConfig(Hybrid(gamma_factor=2.0))
    assert c.global_capacity(1024) == 20 and c.beta == 1
    assert ModelConfig(GossipReply()).global_capacity(1024) == 1
    with pytest.raises(ValueError):
        Hybrid(beta=0)
