"""Cluster sweeps and the outgoing-edge sketches (HPTestOut, FindOutgoing).

Every cluster is described by a label array ``cluster[v]`` (the id of its
root or leader).  The per-node sketch values are computed from the input
graph's incidence lists; a transport moves them to the root and accounts the
messages and rounds.  Two transports exist: ``StarPull`` (one GOSSIP-reply
round per sweep, members pull the leader) and ``TreeSweep`` (level by level
broadcast-and-echo over a rooted cluster tree).  ``OfflineTransport`` only
counts, for unit tests and the standalone helpers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    Batch,
    Channel,
    Engine,
    InvariantViolated,
    RngStream,
    encode_edges,
    log2_ceil,
    word_bits,
)

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(x: int) -> bool:
    if x < 2:
        return False
    for q in _MR_BASES:
        if x % q == 0:
            return x == q
    d, s = x - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        y = pow(a, d, x)
        if y in (1, x - 1):
            continue
        for _ in range(s - 1):
            y = y * y % x
            if y == x - 1:
                break
        else:
            return False
    return True


def next_prime(x: int) -> int:
    """Smallest prime strictly greater than x."""
    c = x + 1
    while not is_prime(c):
        c += 1
    return c


def hash_prime(n: int) -> int:
    """Global modulus: above every encoded edge id and every hash range used."""
    w = word_bits(n)
    return next_prime(max(1 << (2 * w + 1), 1 << hp_bits(n)))


def hp_bits(n: int) -> int:
    """Number of HPTestOut parity trials, k = 2 ceil(log2 n)."""
    return max(2, 2 * log2_ceil(max(n, 2)))


def words_for_bits(bits: int, n: int) -> int:
    w = word_bits(n)
    return max(1, -(-bits // w))


def _mulmod(a, x, b, p):
    """(a*x + b) mod p elementwise, exact for any size."""
    if 2 * int(p).bit_length() + 1 < 63:
        return (np.asarray(a, dtype=np.int64) * np.asarray(x, dtype=np.int64) + np.asarray(b, dtype=np.int64)) % p
    a = np.asarray(a, dtype=object)
    x = np.asarray(x, dtype=object)
    return np.asarray((a * x + np.asarray(b, dtype=object)) % p, dtype=np.int64)


@dataclass(frozen=True)
class PairwiseHash:
    a: int
    b: int
    p: int
    r: int

    def __post_init__(self):
        if not (0 < self.a < self.p and 0 <= self.b < self.p):
            raise ValueError("hash coefficients out of range")
        if self.r < 1:
            raise ValueError("range must be positive")

    def __call__(self, x):
        if np.isscalar(x):
            return ((self.a * int(x) + self.b) % self.p) % self.r
        return _mulmod(self.a, x, self.b, self.p) % self.r

    @classmethod
    def draw(cls, gen: np.random.Generator, p: int, r: int) -> "PairwiseHash":
        return cls(int(gen.integers(1, p)), int(gen.integers(0, p)), p, r)


class Incidence:
    """Directed incidence arrays of a graph: one entry per (node, edge)."""

    def __init__(self, graph):
        n = graph.n
        indptr, nbr = graph.csr()
        self.n = n
        self.node = np.repeat(np.arange(n, dtype=np.int64), graph.degrees)
        self.nbr = np.asarray(nbr, dtype=np.int64)
        self.code = encode_edges(self.node, self.nbr, n)
        self.degrees = np.asarray(graph.degrees, dtype=np.int64)


def _bitlen(h: np.ndarray) -> np.ndarray:
    return np.frexp(h.astype(np.float64))[1].astype(np.int64)


def node_xor(inc: Incidence, values: np.ndarray) -> np.ndarray:
    out = np.zeros(inc.n, dtype=np.int64)
    np.bitwise_xor.at(out, inc.node, values)
    return out


def cluster_reduce(cluster: np.ndarray, values: np.ndarray, op: str, n: int) -> np.ndarray:
    """Aggregate per-node values into a per-label array of length n."""
    out = np.zeros(n, dtype=np.int64)
    if op == "xor":
        np.bitwise_xor.at(out, cluster, values)
    elif op == "sum":
        np.add.at(out, cluster, values)
    else:
        raise ValueError(f"unknown aggregate {op!r}")
    return out


def hp_node_words(inc: Incidence, a, b, p: int, k: int) -> np.ndarray:
    """Per-node XOR of the k-bit hash over incident edge ids.

    ``a`` and ``b`` are per-incidence coefficient arrays (each node uses its
    own cluster's hash).  Bit j of the cluster XOR is trial j.
    """
    g = _mulmod(a, inc.code, b, p) & ((1 << k) - 1)
    return node_xor(inc, g)


def parity_node_words(inc: Incidence, a, b, p: int, wr: np.ndarray) -> np.ndarray:
    """Bit i is the parity of incident edges with h(e) < 2^i, i in [0, wr]."""
    r = np.left_shift(np.int64(1), wr)
    h = _mulmod(a, inc.code, b, p) % r
    full = np.left_shift(np.int64(1), wr + 1) - 1
    contrib = full & ~(np.left_shift(np.int64(1), _bitlen(h)) - 1)
    return node_xor(inc, contrib)


def s_node_words(inc: Incidence, a, b, p: int, wr: np.ndarray, mins: np.ndarray) -> np.ndarray:
    r = np.left_shift(np.int64(1), wr)
    h = _mulmod(a, inc.code, b, p) % r
    sel = h < np.left_shift(np.int64(1), mins)
    return node_xor(inc, np.where(sel, inc.code, 0))


def incident_hits(inc: Incidence, target: np.ndarray) -> np.ndarray:
    """1 for nodes having an incident edge whose id equals ``target`` (per incidence)."""
    hit = (inc.code == target).astype(np.int64)
    return np.bincount(inc.node, weights=hit, minlength=inc.n).astype(np.int64)


# transports -----------------------------------------------------------------

class OfflineTransport:
    """Aggregates without an engine; counts messages and rounds itself.

    ``parent`` is the cluster tree (-1 at roots); a star is a tree of depth 1.
    """

    def __init__(self, cluster: np.ndarray, parent: np.ndarray):
        self.cluster = np.asarray(cluster, dtype=np.int64)
        self.parent = np.asarray(parent, dtype=np.int64)
        self.n = len(self.cluster)
        self.depth = tree_depths(self.parent)
        self.active = np.ones(self.n, dtype=bool)
        self.messages = 0
        self.rounds = 0

    def _edges(self) -> int:
        return int(np.sum((self.parent >= 0) & self.active[self.cluster]))

    def _dmax(self) -> int:
        mask = self.active[self.cluster]
        return int(self.depth[mask].max()) if mask.any() else 0

    def broadcast(self, down_words) -> None:
        self.messages += self._edges()
        self.rounds += self._dmax()

    def step(self, columns, respond=None, up_words=1, carried=None):
        self.messages += self._edges()
        self.rounds += self._dmax()
        aggs = [cluster_reduce(self.cluster, v, op, self.n) for v, op in columns]
        if respond is not None:
            down = respond(aggs)
            if down is not None:
                self.broadcast(down)
        return aggs

    def set_active(self, labels_mask: np.ndarray) -> None:
        self.active = np.asarray(labels_mask, dtype=bool)


def tree_depths(parent: np.ndarray) -> np.ndarray:
    """Depth of every node of a rooted forest given as a parent array."""
    parent = np.asarray(parent, dtype=np.int64)
    n = len(parent)
    depth = np.full(n, -1, dtype=np.int64)
    kids = np.flatnonzero(parent >= 0)
    order = kids[np.argsort(parent[kids], kind="stable")]
    starts = np.searchsorted(parent[order], np.arange(n + 1))
    frontier = np.flatnonzero(parent < 0)
    d = 0
    while len(frontier):
        depth[frontier] = d
        lo, hi = starts[frontier], starts[frontier + 1]
        cnt = hi - lo
        if not cnt.sum():
            break
        idx = np.repeat(lo - np.cumsum(cnt) + cnt, cnt) + np.arange(cnt.sum())
        frontier = order[idx]
        d += 1
    if (depth < 0).any():
        raise ValueError("parent array contains a cycle")
    return depth


class StarPull:
    """Sweeps for star clusters in GOSSIP-reply: one pull round per sweep.

    In round j every member contacts its leader carrying its echo value for
    sweep j and the leader's reply carries the broadcast for sweep j+1.
    Members of inactive clusters still pull (empty payload).
    """

    def __init__(self, engine: Engine, leader: np.ndarray, tag: str = "sweep"):
        self.engine = engine
        self.leader = np.asarray(leader, dtype=np.int64)
        self.n = len(self.leader)
        self.active = np.ones(self.n, dtype=bool)
        self.members = np.flatnonzero(self.leader != np.arange(self.n))
        self.tag = tag
        self.extra: Callable | None = None  # unused hook kept for symmetry

    def set_active(self, labels_mask: np.ndarray) -> None:
        self.active = np.asarray(labels_mask, dtype=bool)

    def broadcast(self, down_words) -> None:
        # delivered in the previous round's reply
        return None

    def step(self, columns, respond=None, up_words=1, carried=None):
        mem = self.members
        lead = self.leader[mem]
        on = self.active[lead]
        words = np.where(on, np.broadcast_to(np.asarray(up_words), (self.n,))[mem], 1)
        ids = None if carried is None else np.where(on, np.asarray(carried)[mem], -1)
        contacts = Batch.make(mem, lead, Channel.GLOBAL_CONTACT, words, self.tag, ids)
        out = {}

        def reply(c: Batch) -> Batch:
            aggs = [cluster_reduce(self.leader, v, op, self.n) for v, op in columns]
            down = respond(aggs) if respond is not None else None
            out["aggs"] = aggs
            if down is None:
                rw = np.ones(len(c), dtype=np.int64)
            else:
                rw = np.where(self.active[c.dst], np.asarray(down, dtype=np.int64)[c.dst], 1)
            return Batch.make(c.dst, c.src, Channel.GLOBAL_REPLY, rw, self.tag)

        self.engine.step_gossip_round(contacts, reply)
        return out["aggs"]


class TreeSweep:
    """Level-synchronous broadcast-and-echo over cluster trees in HYBRID.

    Tree messages use the global channel; the engine packs a level into more
    than one round only if a node's global capacity would be exceeded.
    """

    def __init__(self, engine: Engine, cluster: np.ndarray, parent: np.ndarray, tag: str = "sweep"):
        self.engine = engine
        self.cluster = np.asarray(cluster, dtype=np.int64)
        self.parent = np.asarray(parent, dtype=np.int64)
        self.n = len(self.cluster)
        self.depth = tree_depths(self.parent)
        self.active = np.ones(self.n, dtype=bool)
        self.tag = tag
        self._levels()

    def _levels(self) -> None:
        nodes = np.flatnonzero((self.parent >= 0) & self.active[self.cluster])
        d = self.depth[nodes]
        order = np.argsort(d, kind="stable")
        nodes, d = nodes[order], d[order]
        self.dmax = int(d.max()) if len(d) else 0
        bounds = np.searchsorted(d, np.arange(1, self.dmax + 2))
        self.level = [nodes[bounds[i] : bounds[i + 1]] for i in range(self.dmax)]

    def set_active(self, labels_mask: np.ndarray) -> None:
        self.active = np.asarray(labels_mask, dtype=bool)
        self._levels()

    def broadcast(self, down_words) -> None:
        down_words = np.asarray(down_words, dtype=np.int64)
        for lv in self.level:
            if len(lv):
                b = Batch.make(self.parent[lv], lv, Channel.GLOBAL_CONTACT, down_words[self.cluster[lv]], self.tag + ":down")
                self.engine.send(b)

    def echo(self, up_words) -> None:
        up = np.broadcast_to(np.asarray(up_words, dtype=np.int64), (self.n,))
        for lv in reversed(self.level):
            if len(lv):
                b = Batch.make(lv, self.parent[lv], Channel.GLOBAL_REPLY, up[lv], self.tag + ":up")
                self.engine.send(b)

    def step(self, columns, respond=None, up_words=1, carried=None):
        self.echo(up_words)
        aggs = [cluster_reduce(self.cluster, v, op, self.n) for v, op in columns]
        if respond is not None:
            down = respond(aggs)
            if down is not None:
                self.broadcast(down)
        return aggs


# FindOutgoing ---------------------------------------------------------------

@dataclass
class SampleResult:
    """Per-label outcome of FindOutgoing (arrays indexed by cluster label)."""

    hp: np.ndarray      # HPTestOut verdict
    edge: np.ndarray    # encoded edge id, -1 if none
    inner: np.ndarray   # endpoint inside the cluster, -1 if none
    outer: np.ndarray   # endpoint outside the cluster, -1 if none

    def found(self) -> np.ndarray:
        return np.flatnonzero(self.edge >= 0)


def find_outgoing_all(
    graph,
    cluster: np.ndarray,
    transport,
    rng: RngStream,
    phase: int,
    inc: Incidence | None = None,
    k: int | None = None,
    check: bool = True,
    announce: bool = True,
) -> SampleResult:
    """Run FindOutgoing concurrently in every cluster.

    Four sweeps: (1) degree sum and HPTestOut parity word, (2) parity vector
    under the broadcast pairwise hash, (3) XOR of edge ids below 2^min,
    (4) count of members incident to the decoded edge.  The hash of each
    cluster is drawn by its root from the root's entry of the phase stream.
    With ``announce=False`` the caller has already delivered those hash
    parameters to every member, so the opening broadcast is skipped.
    """
    n = graph.n
    inc = inc or Incidence(graph)
    cluster = np.asarray(cluster, dtype=np.int64)
    k = hp_bits(n) if k is None else k
    p = hash_prime(n)
    w = word_bits(n)
    labels = np.zeros(n, dtype=bool)
    labels[cluster] = True
    pw = words_for_bits(p.bit_length(), n)

    g1 = rng.generator("hp_hash", phase)
    ha = g1.integers(1, p, size=n)
    hb = g1.integers(0, p, size=n)
    g2 = rng.generator("fo_hash", phase)
    fa = g2.integers(1, p, size=n)
    fb = g2.integers(0, p, size=n)

    ic = cluster[inc.node]
    empty = np.full(n, -1, dtype=np.int64)
    res = SampleResult(np.zeros(n, dtype=bool), empty.copy(), empty.copy(), empty.copy())

    transport.set_active(labels)
    if announce:
        transport.broadcast(np.full(n, 2 * pw, dtype=np.int64))

    # sweep 1
    hp_vals = hp_node_words(inc, ha[ic], hb[ic], p, k)
    state = {}

    def after1(aggs):
        degsum, hpw = aggs
        hp = labels & (hpw != 0)
        res.hp[:] = hp
        wr = np.zeros(n, dtype=np.int64)
        wr[labels] = _bitlen(degsum[labels])  # smallest wr with 2^wr > degsum
        state["wr"] = wr
        transport.set_active(hp)
        return np.full(n, 2 * pw + 1, dtype=np.int64)

    up1 = words_for_bits(2 * w + 1, n) + words_for_bits(k, n)
    transport.step([(inc.degrees, "sum"), (hp_vals, "xor")], after1, up1)
    wr = state["wr"]
    hp = res.hp

    # sweep 2
    par = parity_node_words(inc, fa[ic], fb[ic], p, wr[ic])
    par = np.where(hp[cluster], par, 0)

    def after2(aggs):
        (vec,) = aggs
        ok = hp & (vec != 0)
        lowest = vec & -vec
        mins = np.where(ok, _bitlen(lowest) - 1, 0)
        state["mins"] = mins
        state["ok"] = ok
        transport.set_active(ok)
        return np.ones(n, dtype=np.int64)

    up2 = words_for_bits(int(wr.max()) + 1, n)
    transport.step([(par, "xor")], after2, up2)
    mins, ok = state["mins"], state["ok"]

    # sweep 3
    s = s_node_words(inc, fa[ic], fb[ic], p, wr[ic], mins[ic])
    s = np.where(ok[cluster], s, 0)

    def after3(aggs):
        (st,) = aggs
        state["sT"] = st
        return np.full(n, words_for_bits(2 * w, n), dtype=np.int64)

    transport.step([(s, "xor")], after3, words_for_bits(2 * w, n))
    sT = state["sT"]

    # sweep 4
    hits = incident_hits(inc, sT[ic])
    hits = np.where(ok[cluster], hits, 0)
    state["hits"] = hits

    def after4(aggs):
        (cnt,) = aggs
        valid = ok & (cnt == 1)
        res.edge[valid] = sT[valid]
        return None

    # the incident member names the external endpoint in its echo
    hit_inc = (inc.code == sT[ic]) & ok[ic]
    nb = np.full(n, -1, dtype=np.int64)
    nb[inc.node[hit_inc]] = inc.nbr[hit_inc]
    transport.step([(hits, "sum")], after4, 2, carried=nb)
    valid = np.flatnonzero(res.edge >= 0)
    if len(valid):
        holders = np.flatnonzero((hits > 0) & (res.edge[cluster] >= 0))
        res.inner[cluster[holders]] = holders
        lo, hi = res.edge[valid] >> w, res.edge[valid] & ((1 << w) - 1)
        inner = res.inner[valid]
        res.outer[valid] = np.where(lo == inner, hi, lo)
        if check:
            bad = cluster[res.outer[valid]] == cluster[inner]
            if bad.any() or not all(graph.has_edge(int(a), int(b)) for a, b in zip(inner, res.outer[valid])):
                raise InvariantViolated("FindOutgoing returned a non-outgoing edge")
    return res


def hp_test_out(graph, members, rng: RngStream, trial: int = 0, k: int | None = None) -> bool:
    """Standalone HPTestOut on one node set (offline)."""
    n = graph.n
    inc = Incidence(graph)
    cluster = np.arange(n, dtype=np.int64)
    members = np.asarray(sorted(set(int(x) for x in members)), dtype=np.int64)
    root = int(members[0])
    cluster[members] = root
    k = hp_bits(n) if k is None else k
    p = hash_prime(n)
    g = rng.generator("hp_hash", trial)
    a = g.integers(1, p, size=n)
    b = g.integers(0, p, size=n)
    ic = cluster[inc.node]
    vals = hp_node_words(inc, a[ic], b[ic], p, k)
    return bool(np.bitwise_xor.reduce(vals[members]) != 0)


def find_outgoing(graph, members, rng: RngStream, trial: int = 0, inc: Incidence | None = None):
    """Standalone FindOutgoing on one node set; returns (u, v) or None."""
    n = graph.n
    cluster = np.arange(n, dtype=np.int64)
    members = np.asarray(sorted(set(int(x) for x in members)), dtype=np.int64)
    root = int(members[0])
    cluster[members] = root
    parent = np.full(n, -1, dtype=np.int64)
    parent[members[1:]] = root
    res = find_outgoing_all(graph, cluster, OfflineTransport(cluster, parent), rng, trial, inc=inc)
    if res.edge[root] < 0:
        return None
    return int(res.inner[root]), int(res.outer[root])


def broadcast_and_echo(parent, values, op: str = "sum", engine: Engine | None = None, down_words: int = 1):
    """One broadcast-and-echo over a single rooted tree.

    Returns (aggregate, messages, rounds).  With an engine the messages are
    delivered on the global channel and charged to its ledger.
    """
    parent = np.asarray(parent, dtype=np.int64)
    n = len(parent)
    roots = np.flatnonzero(parent < 0)
    if len(roots) != 1:
        raise ValueError("expected a single rooted tree")
    cluster = np.full(n, roots[0], dtype=np.int64)
    values = np.asarray(values, dtype=np.int64)
    if engine is None:
        t = OfflineTransport(cluster, parent)
        t.broadcast(down_words)
        (agg,) = t.step([(values, op)])
        return int(agg[roots[0]]), t.messages, t.rounds
    r0, m0 = engine.ledger.rounds, engine.ledger.total_messages
    t = TreeSweep(engine, cluster, parent)
    t.broadcast(np.full(n, down_words))
    (agg,) = t.step([(values, op)])
    return int(agg[roots[0]]), engine.ledger.total_messages - m0, engine.ledger.rounds - r0


def star_pull(engine: Engine, leader: int, members, reply_fn: Callable[[int], int] | None = None, tag: str = "pull"):
    """Every member contacts the leader once; the leader replies to each.

    ``reply_fn(member)`` gives the reply's word count.  Returns the delivered
    reply batch.
    """
    members = np.asarray([m for m in members if m != leader], dtype=np.int64)
    contacts = Batch.make(members, np.full(len(members), leader), Channel.GLOBAL_CONTACT, 1, tag)

    def respond(c: Batch) -> Batch:
        words = [1 if reply_fn is None else reply_fn(int(x)) for x in c.src]
        return Batch.make(c.dst, c.src, Channel.GLOBAL_REPLY, words, tag)

    stats = engine.step_gossip_round(contacts, respond)
    return stats.delivered[-1] if len(stats.delivered) > 1 else Batch.empty(Channel.GLOBAL_REPLY, tag)
