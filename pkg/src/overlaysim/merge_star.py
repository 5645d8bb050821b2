"""Star overlay construction in GOSSIP-reply.

Boruvka-style phases of seven rounds each.  Rounds 1-4 run FindOutgoing with
members pulling their leader; round 5 sends the merging request from the
leader to the external endpoint, whose reply names its leader; round 6 asks
that leader, which accepts iff it is Red and the requester Blue; round 7
members pull their old leader and learn the leader of the merged cluster.
Members pull in every round, so a phase costs at most 14n messages.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    Batch,
    Channel,
    Engine,
    GossipReply,
    InvariantViolated,
    ModelConfig,
    PhaseBudgetExceeded,
    RngStream,
    SimulationError,
    concat,
    log2_ceil,
    simulate_reduced_bandwidth,
    word_bits,
)
from .graphs import Graph, InvalidGraph, is_star
from .sketch import Incidence, StarPull, find_outgoing_all, hash_prime, words_for_bits

RED, BLUE = 0, 1
ROUNDS_PER_PHASE = 7


class DegreeTooLarge(SimulationError):
    pass


@dataclass
class PhaseRecord:
    clusters: int
    requests: int
    accepted: int
    red_fraction: float
    clusters_after: int


@dataclass
class MergeStarResult:
    n: int
    leader: np.ndarray
    phases: int
    ledger: object
    records: list = field(default_factory=list)
    success: bool = True
    failure: str = ""
    invariant_failures: int = 0
    b_bits: int = 0

    @property
    def overlay(self) -> list[tuple[int, int]]:
        return [(int(v), int(l)) for v, l in enumerate(self.leader) if v != l]

    def is_star(self) -> bool:
        return is_star(self.n, self.overlay)

    @property
    def rounds(self) -> int:
        """Rounds at the configured bandwidth (multiplied when b < log n)."""
        return simulate_reduced_bandwidth(self.ledger.rounds, self.b_bits, self.n)


class MergeStar:
    def __init__(self, graph: Graph, config: ModelConfig | None = None, seed: int = 0, check: bool = True):
        if not graph.is_connected():
            raise InvalidGraph("MergeStar needs a connected input graph")
        self.graph = graph
        self.n = graph.n
        self.config = config or ModelConfig(GossipReply())
        if not self.config.is_gossip:
            raise ValueError("MergeStar runs in GOSSIP-reply")
        self.rng = RngStream(seed)
        self.engine = Engine(graph, self.config, self.rng)
        self.inc = Incidence(graph)
        self.leader = np.arange(self.n, dtype=np.int64)
        self.phase = 0
        self.records: list[PhaseRecord] = []
        self.check = check
        self.pw = words_for_bits(hash_prime(self.n).bit_length(), self.n)

    def cluster_count(self) -> int:
        return int(np.count_nonzero(self.leader == np.arange(self.n)))

    # one phase -----------------------------------------------------------
    def phase_sample(self):
        """Rounds 1-4: FindOutgoing by star pulls; the leader draws a colour."""
        transport = StarPull(self.engine, self.leader, tag=f"p{self.phase}:fo")
        res = find_outgoing_all(self.graph, self.leader, transport, self.rng, self.phase, inc=self.inc)
        color = (self.rng.node_values("color", self.phase, self.n) >= 0.5).astype(np.int64)
        return res, color

    def phase_group(self, res, color):
        """Rounds 5-6: request to the endpoint, then to the endpoint's leader."""
        n, leader = self.n, self.leader
        ids = np.arange(n)
        members = np.flatnonzero(leader != ids)
        reqs = np.flatnonzero((res.edge >= 0) & (leader == ids))
        target = res.outer[reqs]

        # round 5
        pulls = Batch.make(members, leader[members], Channel.GLOBAL_CONTACT, 1, "r5:pull")
        asks = Batch.make(reqs, target, Channel.GLOBAL_CONTACT, 2, "r5:request", reqs)
        contacts = _concat(pulls, asks)

        def reply5(c: Batch) -> Batch:
            words = np.ones(len(c), dtype=np.int64)
            carried = np.full(len(c), -1, dtype=np.int64)
            is_req = np.zeros(len(c), dtype=bool)
            is_req[len(pulls):] = True
            carried[is_req] = leader[c.dst[is_req]]
            return Batch.make(c.dst, c.src, Channel.GLOBAL_REPLY, words, "r5:reply", carried)

        self.engine.step_gossip_round(contacts, reply5)
        tleader = leader[target]

        # round 6
        asks6 = Batch.make(reqs, tleader, Channel.GLOBAL_CONTACT, 2, "r6:request")
        contacts = _concat(pulls, asks6)
        accept = (color[tleader] == RED) & (color[reqs] == BLUE)

        def reply6(c: Batch) -> Batch:
            words = np.ones(len(c), dtype=np.int64)
            words[len(pulls):] = np.where(accept, 1 + 2 * self.pw, 1)
            return Batch.make(c.dst, c.src, Channel.GLOBAL_REPLY, words, "r6:reply")

        self.engine.step_gossip_round(contacts, reply6)
        return reqs, tleader, accept

    def phase_merge(self, reqs, tleader, accept):
        """Round 7: members pull their old leader and learn the new one."""
        n, leader = self.n, self.leader
        ids = np.arange(n)
        new = ids.copy()
        new[reqs[accept]] = tleader[accept]
        members = np.flatnonzero(leader != ids)
        pulls = Batch.make(members, leader[members], Channel.GLOBAL_CONTACT, 1, "r7:pull")

        def reply7(c: Batch) -> Batch:
            return Batch.make(c.dst, c.src, Channel.GLOBAL_REPLY, 1 + 2 * self.pw, "r7:reply", new[c.dst])

        if len(pulls):
            self.engine.step_gossip_round(pulls, reply7)
        else:
            self.engine.idle_round()
        self.leader = new[leader]

    def _check_star(self) -> None:
        ids = np.arange(self.n)
        if not np.all(self.leader[self.leader] == self.leader):
            raise InvariantViolated("a member points at a non-leader")
        if self.check:
            lead = self.leader
            # every overlay edge of a member goes to its leader, which knows it
            for v in np.flatnonzero(lead != ids).tolist():
                if not self.engine.knows(v, int(lead[v])):
                    raise InvariantViolated(f"node {v} does not know its leader")

    def run_phase(self) -> PhaseRecord:
        before = self.cluster_count()
        self.engine.begin_phase(before)
        r0 = self.engine.ledger.rounds
        res, color = self.phase_sample()
        reqs, tleader, accept = self.phase_group(res, color)
        leaders = np.flatnonzero(self.leader == np.arange(self.n))
        red = float(np.mean(color[leaders] == RED)) if len(leaders) else 0.0
        self.phase_merge(reqs, tleader, accept)
        used = self.engine.ledger.rounds - r0
        if used != ROUNDS_PER_PHASE:
            raise InvariantViolated(f"phase used {used} rounds")
        self.engine.end_phase()
        self._check_star()
        rec = PhaseRecord(before, len(reqs), int(accept.sum()), red, self.cluster_count())
        self.records.append(rec)
        self.phase += 1
        return rec

    def run(self, max_phases: int | None = None) -> MergeStarResult:
        n = self.n
        if max_phases is None:
            max_phases = 40 * max(1, log2_ceil(n))
        result = MergeStarResult(n, self.leader, 0, self.engine.ledger, self.records, b_bits=self.config.bandwidth_bits(n))
        while self.cluster_count() > 1:
            if self.phase >= max_phases:
                result.success = False
                result.failure = "phase budget exceeded"
                result.leader = self.leader
                result.phases = self.phase
                raise PhaseBudgetExceeded(f"MergeStar did not finish in {max_phases} phases", result)
            try:
                self.run_phase()
            except InvariantViolated as e:
                result.invariant_failures += 1
                result.success = False
                result.failure = str(e)
                break
        result.leader = self.leader
        result.phases = self.phase
        result.success = result.success and result.is_star()
        return result


def _concat(a: Batch, b: Batch) -> Batch:
    if not len(a):
        return b if len(b) else a
    if not len(b):
        return a
    return concat([a, b])


def run_merge_star(graph: Graph, config: ModelConfig | None = None, seed: int = 0, max_phases: int | None = None) -> MergeStarResult:
    return MergeStar(graph, config, seed).run(max_phases)


# star to arbitrary topology --------------------------------------------------

@dataclass
class TopologyResult:
    edges: list
    mapping: np.ndarray      # mapping[v] = vertex of H assigned to node v
    rounds: int
    ledger: object


def star_to_topology(center: int, n: int, H: Graph, config: ModelConfig | None = None, seed: int = 0) -> TopologyResult:
    """Turn a star overlay centred at ``center`` into a copy of H.

    Round 1: every leaf contacts the centre; the reply carries the leaf's
    H-vertex and the ids of its H-neighbours (one message).  Afterwards each
    H-edge {x, y} is opened by the endpoint with the smaller H-vertex, one
    contact per round, so at most Delta(H) + 1 further rounds are used.
    """
    if H.n != n:
        raise ValueError("target graph must have n vertices")
    config = config or ModelConfig(GossipReply())
    star = Graph(n, [(center, v) for v in range(n) if v != center])
    rng = RngStream(seed)
    engine = Engine(star, config, rng)
    w = word_bits(n)
    budget_words = engine.word_budget
    if H.max_degree + 1 > budget_words:
        raise DegreeTooLarge(f"Delta(H)={H.max_degree} needs more than {budget_words} words per message")
    # nodes[x] = node playing H-vertex x
    nodes = rng.generator("bijection").permutation(n).astype(np.int64)
    mapping = np.empty(n, dtype=np.int64)
    mapping[nodes] = np.arange(n)
    leaves = np.array([v for v in range(n) if v != center], dtype=np.int64)
    if len(leaves):
        contacts = Batch.make(leaves, np.full(len(leaves), center), Channel.GLOBAL_CONTACT, 1, "assign")
        k = max(1, H.max_degree)
        carried = np.full((len(leaves), k), -1, dtype=np.int64)
        words = np.empty(len(leaves), dtype=np.int64)
        for i, v in enumerate(leaves.tolist()):
            nb = [int(nodes[x]) for x in H.adj[int(mapping[v])]]
            carried[i, : len(nb)] = nb
            words[i] = 1 + len(nb)

        def respond(c: Batch) -> Batch:
            return Batch.make(c.dst, c.src, Channel.GLOBAL_REPLY, words, "assign", carried)

        engine.step_gossip_round(contacts, respond)
    # link rounds: node of H-vertex x opens edges to larger H-vertices
    todo: list[list[int]] = [[] for _ in range(n)]
    for x, y in H.edges():
        todo[int(nodes[min(x, y)])].append(int(nodes[max(x, y)]))
    formed = []
    while any(todo):
        src = [v for v in range(n) if todo[v]]
        dst = [todo[v].pop(0) for v in src]
        engine.step_gossip_round(Batch.make(src, dst, Channel.GLOBAL_CONTACT, 1, "link"))
        formed.extend(zip(src, dst))
    edges = sorted((min(a, b), max(a, b)) for a, b in formed)
    return TopologyResult(edges, mapping, engine.ledger.rounds, engine.ledger)
