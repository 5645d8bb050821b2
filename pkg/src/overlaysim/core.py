"""Synchronous round engine for the GOSSIP-reply and HYBRID models.

Messages travel in columnar batches (numpy arrays of src/dst/words) so that a
round carrying thousands of messages is validated and accounted without a
Python object per message.  Every message is still checked individually:
local messages must cross an input-graph edge, global messages must target an
identifier the sender knows, and payloads must fit the model's word budget.
"""
from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Iterable, Sequence

import numpy as np


class SimulationError(Exception):
    """Base class for protocol or model violations detected by the engine."""


class ContactFanoutViolation(SimulationError):
    pass


class ReplyWithoutContact(SimulationError):
    pass


class CapacityViolation(SimulationError):
    pass


class UnknownDestination(SimulationError):
    pass


class IllegalLocalMessage(SimulationError):
    pass


class PayloadTooLarge(SimulationError):
    pass


class InvariantViolated(SimulationError):
    pass


class PhaseBudgetExceeded(SimulationError):
    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


def log2_ceil(n: int) -> int:
    """ceil(log2 n) for n >= 1 (0 for n == 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (n - 1).bit_length()


def word_bits(n: int) -> int:
    """Width w of one machine word: ceil(log2 n), at least 1."""
    return max(1, log2_ceil(n))


def encode_edge(u: int, v: int, n: int) -> int:
    if u == v:
        raise ValueError("self-loop has no edge id")
    lo, hi = (u, v) if u < v else (v, u)
    return (lo << word_bits(n)) | hi


def decode_edge(code: int, n: int) -> tuple[int, int]:
    w = word_bits(n)
    return code >> w, code & ((1 << w) - 1)


def encode_edges(u: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    lo = np.minimum(u, v).astype(np.int64)
    hi = np.maximum(u, v).astype(np.int64)
    return (lo << word_bits(n)) | hi


def decode_edges(code: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    w = word_bits(n)
    code = np.asarray(code, dtype=np.int64)
    return code >> w, code & ((1 << w) - 1)


class Channel(IntEnum):
    LOCAL_REQUEST = 0
    LOCAL_REPLY = 1
    GLOBAL_CONTACT = 2
    GLOBAL_REPLY = 3

    @property
    def is_local(self) -> bool:
        return self <= Channel.LOCAL_REPLY


@dataclass(frozen=True)
class Message:
    """A single message; batches are the engine's working unit."""

    src: int
    dst: int
    channel: Channel
    tag: str = ""
    payload: tuple = ()
    ids: tuple = ()  # node identifiers carried in the payload

    @property
    def words(self) -> int:
        return max(1, len(self.payload))


@dataclass
class Batch:
    """Messages of one channel sent in the same round."""

    src: np.ndarray
    dst: np.ndarray
    channel: Channel
    words: np.ndarray
    tag: str = ""
    carried: np.ndarray | None = None  # (len, k) node ids, -1 padded

    def __len__(self) -> int:
        return len(self.src)

    @classmethod
    def make(cls, src, dst, channel: Channel, words=1, tag: str = "", carried=None) -> "Batch":
        src = np.asarray(src, dtype=np.int64).reshape(-1)
        dst = np.asarray(dst, dtype=np.int64).reshape(-1)
        if src.shape != dst.shape:
            raise ValueError("src and dst lengths differ")
        words = np.broadcast_to(np.asarray(words, dtype=np.int64), src.shape).copy()
        if carried is not None:
            carried = np.asarray(carried, dtype=np.int64)
            if carried.ndim == 1:
                carried = carried.reshape(-1, 1)
            if carried.shape[0] != src.shape[0]:
                raise ValueError("carried ids must have one row per message")
        return cls(src, dst, Channel(channel), words, tag, carried)

    @classmethod
    def from_messages(cls, messages: Sequence[Message]) -> "Batch":
        if not messages:
            raise ValueError("empty message list")
        channels = {m.channel for m in messages}
        if len(channels) != 1:
            raise ValueError("a batch carries a single channel")
        k = max(len(m.ids) for m in messages)
        carried = None
        if k:
            carried = np.full((len(messages), k), -1, dtype=np.int64)
            for i, m in enumerate(messages):
                carried[i, : len(m.ids)] = m.ids
        return cls.make(
            [m.src for m in messages],
            [m.dst for m in messages],
            channels.pop(),
            [m.words for m in messages],
            messages[0].tag,
            carried,
        )

    @classmethod
    def empty(cls, channel: Channel, tag: str = "") -> "Batch":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.copy(), Channel(channel), z.copy(), tag, None)

    def subset(self, index) -> "Batch":
        carried = None if self.carried is None else self.carried[index]
        return Batch(self.src[index], self.dst[index], self.channel, self.words[index], self.tag, carried)


def concat(batches: Iterable[Batch]) -> Batch:
    batches = [b for b in batches if len(b)]
    if not batches:
        raise ValueError("nothing to concatenate")
    channel = batches[0].channel
    if any(b.channel != channel for b in batches):
        raise ValueError("cannot concatenate different channels")
    k = max(0 if b.carried is None else b.carried.shape[1] for b in batches)
    carried = None
    if k:
        rows = []
        for b in batches:
            c = np.full((len(b), k), -1, dtype=np.int64)
            if b.carried is not None:
                c[:, : b.carried.shape[1]] = b.carried
            rows.append(c)
        carried = np.vstack(rows)
    return Batch(
        np.concatenate([b.src for b in batches]),
        np.concatenate([b.dst for b in batches]),
        channel,
        np.concatenate([b.words for b in batches]),
        batches[0].tag,
        carried,
    )


@dataclass(frozen=True)
class GossipReply:
    b_bits: int | None = None  # None: b = ceil(log2 n)

    def __post_init__(self):
        if self.b_bits is not None and self.b_bits < 1:
            raise ValueError("b_bits must be >= 1")


@dataclass(frozen=True)
class Hybrid:
    alpha_bits: int | None = None  # None: alpha = ceil(log2 n)
    beta: int = 1
    gamma_factor: float = 1.0

    def __post_init__(self):
        if self.alpha_bits is not None and self.alpha_bits < 1:
            raise ValueError("alpha_bits must be >= 1")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.gamma_factor <= 0:
            raise ValueError("gamma_factor must be positive")


@dataclass(frozen=True)
class ModelConfig:
    """Communication model plus enforcement mode.

    ``words_per_message`` is the constant hidden in "O(b)-bit messages": a
    message may carry that many w-bit words per ceil(b / w) of bandwidth.
    """

    variant: GossipReply | Hybrid = field(default_factory=GossipReply)
    strict_capacity: bool = True
    words_per_message: int = 12

    @property
    def is_gossip(self) -> bool:
        return isinstance(self.variant, GossipReply)

    def bandwidth_bits(self, n: int) -> int:
        bits = self.variant.b_bits if self.is_gossip else self.variant.alpha_bits
        return word_bits(n) if bits is None else bits

    def word_budget(self, n: int) -> int:
        return self.words_per_message * max(1, self.bandwidth_bits(n) // word_bits(n))

    def global_capacity(self, n: int) -> int:
        if self.is_gossip:
            return 1
        return max(1, int(self.variant.gamma_factor * word_bits(n)))

    @property
    def beta(self) -> int:
        return 1 if self.is_gossip else self.variant.beta


def charge_bits(message: Message | Batch, n: int) -> int:
    """Bits charged for a message (or a whole batch): words times w."""
    words = int(np.sum(message.words)) if isinstance(message, Batch) else message.words
    return words * word_bits(n)


def simulate_reduced_bandwidth(rounds: int, b_bits: int, n: int) -> int:
    """Rounds needed in GOSSIP-reply(b) to simulate ``rounds`` native rounds."""
    if b_bits < 1:
        raise ValueError("b_bits must be >= 1")
    w = word_bits(n)
    return rounds * max(-(-w // b_bits), 1)


class RngStream:
    """Seeded randomness with a fixed splitting rule.

    ``generator(purpose, *keys)`` returns a numpy Generator seeded by
    ``SeedSequence(master_seed, spawn_key=(crc32(purpose), *keys))``.  Per-node
    values for a phase are entry ``v`` of one array drawn from
    ``generator(purpose, phase)``, so node v's coin in phase i is a fixed
    function of (master_seed, purpose, i, v).
    """

    def __init__(self, master_seed: int = 0):
        self.master_seed = int(master_seed) & 0xFFFFFFFFFFFFFFFF

    def generator(self, purpose: str, *keys: int) -> np.random.Generator:
        key = (zlib.crc32(purpose.encode()),) + tuple(int(k) for k in keys)
        return np.random.default_rng(np.random.SeedSequence(self.master_seed, spawn_key=key))

    def node_values(self, purpose: str, phase: int, n: int) -> np.ndarray:
        return self.generator(purpose, phase).random(n)

    def seed_for(self, purpose: str, *keys: int) -> int:
        return int(self.generator(purpose, *keys).integers(0, 2**63 - 1))


@dataclass
class MetricsLedger:
    n: int
    rounds: int = 0
    total_messages: int = 0
    total_bits: int = 0
    dropped_messages: int = 0
    local_messages: int = 0
    global_messages: int = 0
    max_round_messages: int = 0
    sent: np.ndarray = None
    recv: np.ndarray = None
    cluster_count_per_phase: list = field(default_factory=list)
    phase_rounds: list = field(default_factory=list)
    phase_messages: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    def __post_init__(self):
        if self.sent is None:
            self.sent = np.zeros(self.n, dtype=np.int64)
        if self.recv is None:
            self.recv = np.zeros(self.n, dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "rounds": self.rounds,
            "total_messages": self.total_messages,
            "total_bits": self.total_bits,
            "dropped_messages": self.dropped_messages,
            "local_messages": self.local_messages,
            "global_messages": self.global_messages,
            "max_round_messages": self.max_round_messages,
            "sent": self.sent.tolist(),
            "recv": self.recv.tolist(),
            "cluster_count_per_phase": list(self.cluster_count_per_phase),
            "phase_rounds": list(self.phase_rounds),
            "phase_messages": list(self.phase_messages),
            "violations": list(self.violations),
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def nodewise(self) -> np.ndarray:
        return self.sent + self.recv


@dataclass
class RoundStats:
    messages: int
    bits: int
    dropped: int = 0
    delivered: list = field(default_factory=list)  # delivered batches, in input order


class Engine:
    """Round engine over a fixed input graph.

    Knowledge is kept as one set of codes ``v * n + u`` meaning "v knows u".
    It starts as self plus input-graph neighbours and grows with the sender id
    of every delivered message and every id carried in its payload.
    """

    def __init__(self, graph, config: ModelConfig | None = None, rng: RngStream | int | None = None):
        self.graph = graph
        self.config = config or ModelConfig()
        self.rng = rng if isinstance(rng, RngStream) else RngStream(rng or 0)
        self.n = graph.n
        self.w = word_bits(self.n)
        self.ledger = MetricsLedger(self.n)
        self.word_budget = self.config.word_budget(self.n)
        self.capacity = self.config.global_capacity(self.n)
        n = self.n
        self._known: set[int] = {v * n + v for v in range(n)}
        us, vs = graph.edge_arrays()
        self._known.update((us * n + vs).tolist())
        self._known.update((vs * n + us).tolist())
        self._edge_codes = np.sort(us * n + vs)
        self._phase_start = (0, 0)

    # knowledge -----------------------------------------------------------
    def knows(self, v: int, u: int) -> bool:
        return v * self.n + u in self._known

    def knowledge(self, v: int) -> set[int]:
        n = self.n
        return {c - v * n for c in self._known if c // n == v}

    def knowledge_size(self) -> int:
        return len(self._known)

    def _check_known(self, batch: Batch) -> None:
        codes = (batch.src * self.n + batch.dst).tolist()
        known = self._known
        missing = [c for c in codes if c not in known]
        if missing:
            v, u = divmod(missing[0], self.n)
            raise UnknownDestination(f"node {v} does not know {u} ({batch.tag})")

    def _learn(self, batch: Batch) -> None:
        n = self.n
        self._known.update((batch.dst * n + batch.src).tolist())
        if batch.carried is not None:
            for j in range(batch.carried.shape[1]):
                col = batch.carried[:, j]
                ok = col >= 0
                if ok.any():
                    self._known.update((batch.dst[ok] * n + col[ok]).tolist())

    # validation ----------------------------------------------------------
    def _check_words(self, batch: Batch) -> None:
        if len(batch) and int(batch.words.max()) > self.word_budget:
            raise PayloadTooLarge(
                f"{batch.tag}: {int(batch.words.max())} words > budget {self.word_budget}"
            )

    def _check_local(self, batch: Batch) -> None:
        n = self.n
        lo = np.minimum(batch.src, batch.dst)
        hi = np.maximum(batch.src, batch.dst)
        codes = lo * n + hi
        pos = np.searchsorted(self._edge_codes, codes)
        pos = np.minimum(pos, max(len(self._edge_codes) - 1, 0))
        ok = (len(self._edge_codes) > 0) & (self._edge_codes[pos] == codes) if len(self._edge_codes) else np.zeros(len(codes), bool)
        if not np.all(ok):
            i = int(np.flatnonzero(~ok)[0])
            raise IllegalLocalMessage(
                f"local message {int(batch.src[i])}->{int(batch.dst[i])} is not an input edge ({batch.tag})"
            )

    def _violation(self, kind: str, node: int, count: int, cap: int) -> dict:
        rec = {"round": self.ledger.rounds, "kind": kind, "node": int(node), "count": int(count), "cap": int(cap)}
        self.ledger.violations.append(rec)
        return rec

    # accounting ----------------------------------------------------------
    def _account(self, batch: Batch, delivered: np.ndarray | None = None) -> int:
        led = self.ledger
        m = len(batch)
        if not m:
            return 0
        led.total_messages += m
        led.total_bits += int(batch.words.sum()) * self.w
        if batch.channel.is_local:
            led.local_messages += m
        else:
            led.global_messages += m
        led.sent += np.bincount(batch.src, minlength=self.n)
        if delivered is None:
            led.recv += np.bincount(batch.dst, minlength=self.n)
            self._learn(batch)
        else:
            kept = batch.subset(delivered)
            led.recv += np.bincount(kept.dst, minlength=self.n)
            led.dropped_messages += m - len(kept)
            self._learn(kept)
        return m

    # GOSSIP-reply --------------------------------------------------------
    def step_gossip_round(self, contacts: Batch, respond: Callable[[Batch], Batch | None] | None = None) -> RoundStats:
        """One four-step GOSSIP-reply round.

        ``respond`` runs after contacts are delivered (step 2) and returns the
        replies (step 3), each addressed to a node that contacted its sender.
        """
        if not self.config.is_gossip:
            raise SimulationError("engine is not configured for GOSSIP-reply")
        n = self.n
        if contacts.channel != Channel.GLOBAL_CONTACT:
            raise SimulationError("contacts must use the GLOBAL_CONTACT channel")
        if len(contacts):
            counts = np.bincount(contacts.src, minlength=n)
            if counts.max() > 1:
                v = int(np.argmax(counts))
                raise ContactFanoutViolation(f"node {v} sent {int(counts[v])} contacts in one round")
            self._check_words(contacts)
            self._check_known(contacts)
        msgs = self._account(contacts)
        bits = int(contacts.words.sum()) * self.w
        delivered = [contacts]
        replies = respond(contacts) if respond is not None else None
        if replies is not None and len(replies):
            if replies.channel != Channel.GLOBAL_REPLY:
                raise SimulationError("replies must use the GLOBAL_REPLY channel")
            contact_codes = set((contacts.src * n + contacts.dst).tolist())
            reply_codes = (replies.dst * n + replies.src).tolist()
            if len(set(reply_codes)) != len(reply_codes):
                raise ReplyWithoutContact("more than one reply to a single contact")
            for c in reply_codes:
                if c not in contact_codes:
                    v, u = divmod(c, n)
                    raise ReplyWithoutContact(f"node {u} replied to {v}, which did not contact it")
            self._check_words(replies)
            msgs += self._account(replies)
            bits += int(replies.words.sum()) * self.w
            delivered.append(replies)
        if msgs > 2 * n:
            raise SimulationError(f"{msgs} messages in one GOSSIP-reply round exceeds 2n")
        self.ledger.rounds += 1
        self.ledger.max_round_messages = max(self.ledger.max_round_messages, msgs)
        return RoundStats(msgs, bits, 0, delivered)

    # HYBRID --------------------------------------------------------------
    def step_hybrid_round(self, *batches: Batch) -> RoundStats:
        """Deliver one HYBRID round.

        Sender-side overloads are protocol bugs: recorded, and fatal in strict
        mode.  Receiver-side global overload in permissive mode keeps a
        seed-deterministic subset of ``capacity`` messages per receiver.
        """
        if self.config.is_gossip:
            raise SimulationError("engine is not configured for HYBRID")
        n, cap, strict = self.n, self.capacity, self.config.strict_capacity
        batches = [b for b in batches if len(b)]
        for b in batches:
            self._check_words(b)
            if b.channel.is_local:
                self._check_local(b)
            else:
                self._check_known(b)
        local = [b for b in batches if b.channel.is_local]
        glob = [b for b in batches if not b.channel.is_local]
        if local:
            codes = np.concatenate([b.src * n + b.dst for b in local])
            uniq, cnt = np.unique(codes, return_counts=True)
            over = cnt > self.config.beta
            if over.any():
                c = int(uniq[over][0])
                self._violation("local", c // n, int(cnt[over][0]), self.config.beta)
                if strict:
                    raise CapacityViolation(f"local edge {c // n}->{c % n} overloaded")
        keep: list = [None] * len(batches)
        if glob:
            src = np.concatenate([b.src for b in glob])
            dst = np.concatenate([b.dst for b in glob])
            scount = np.bincount(src, minlength=n)
            if scount.max() > cap:
                v = int(np.argmax(scount))
                self._violation("global_send", v, int(scount[v]), cap)
                if strict:
                    raise CapacityViolation(f"node {v} sent {int(scount[v])} global messages > {cap}")
            rcount = np.bincount(dst, minlength=n)
            if rcount.max() > cap:
                over_nodes = np.flatnonzero(rcount > cap)
                for v in over_nodes:
                    self._violation("global_recv", int(v), int(rcount[v]), cap)
                if strict:
                    v = int(over_nodes[0])
                    raise CapacityViolation(f"node {v} was sent {int(rcount[v])} global messages > {cap}")
                mask = np.ones(len(dst), dtype=bool)
                gen = self.rng.generator("drop", self.ledger.rounds)
                for v in over_nodes:
                    idx = np.flatnonzero(dst == v)
                    drop = gen.permutation(idx)[cap:]
                    mask[drop] = False
                off = 0
                gi = 0
                for i, b in enumerate(batches):
                    if not b.channel.is_local:
                        keep[i] = mask[off : off + len(b)]
                        off += len(b)
                        gi += 1
        msgs = bits = dropped = 0
        for b, k in zip(batches, keep):
            msgs += self._account(b, k)
            bits += int(b.words.sum()) * self.w
            if k is not None:
                dropped += int((~k).sum())
        self.ledger.rounds += 1
        self.ledger.max_round_messages = max(self.ledger.max_round_messages, msgs)
        delivered = [b if k is None else b.subset(k) for b, k in zip(batches, keep)]
        return RoundStats(msgs, bits, dropped, delivered)

    def send(self, *batches: Batch) -> int:
        """Deliver batches as one logical step, packed into as few HYBRID
        rounds as the local and global capacities allow.  Returns rounds used."""
        batches = [b for b in batches if len(b)]
        if not batches:
            return 0
        plan = self._pack(batches)
        if plan is None:
            self.step_hybrid_round(*batches)
            return 1
        rounds = int(max(p.max() for p in plan)) + 1
        for r in range(rounds):
            self.step_hybrid_round(*[b.subset(p == r) for b, p in zip(batches, plan)])
        return rounds

    def _pack(self, batches: list[Batch]):
        n, cap, beta = self.n, self.capacity, self.config.beta
        fits = True
        gl = [b for b in batches if not b.channel.is_local]
        if gl:
            src = np.concatenate([b.src for b in gl])
            dst = np.concatenate([b.dst for b in gl])
            if np.bincount(src, minlength=n).max() > cap or np.bincount(dst, minlength=n).max() > cap:
                fits = False
        lo = [b for b in batches if b.channel.is_local]
        if fits and lo:
            codes = np.concatenate([b.src * n + b.dst for b in lo])
            if np.unique(codes, return_counts=True)[1].max() > beta:
                fits = False
        if fits:
            return None
        send_load: dict = {}
        recv_load: dict = {}
        edge_load: dict = {}
        plan = []
        for b in batches:
            p = np.zeros(len(b), dtype=np.int64)
            local = b.channel.is_local
            for i, (s, d) in enumerate(zip(b.src.tolist(), b.dst.tolist())):
                r = 0
                if local:
                    while edge_load.get((r, s, d), 0) >= beta:
                        r += 1
                    edge_load[(r, s, d)] = edge_load.get((r, s, d), 0) + 1
                else:
                    while send_load.get((r, s), 0) >= cap or recv_load.get((r, d), 0) >= cap:
                        r += 1
                    send_load[(r, s)] = send_load.get((r, s), 0) + 1
                    recv_load[(r, d)] = recv_load.get((r, d), 0) + 1
                p[i] = r
            plan.append(p)
        return plan

    def idle_round(self) -> None:
        self.ledger.rounds += 1

    # phases --------------------------------------------------------------
    def begin_phase(self, cluster_count: int) -> None:
        self.ledger.cluster_count_per_phase.append(int(cluster_count))
        self._phase_start = (self.ledger.rounds, self.ledger.total_messages)

    def end_phase(self) -> None:
        r0, m0 = self._phase_start
        self.ledger.phase_rounds.append(self.ledger.rounds - r0)
        self.ledger.phase_messages.append(self.ledger.total_messages - m0)
