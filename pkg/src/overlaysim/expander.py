"""Degree reduction of an O(log n)-regular overlay by token random walks.

Every node owns ``c`` tokens.  In each phase the active tokens take
``2*ceil(log2 n)`` uniform random-walk steps (one global message per hop);
at the end of the phase a token deactivates if its location holds fewer than
``10c`` tokens.  Once all tokens are inactive every holder links to the
owners of the tokens it holds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Batch,
    Channel,
    Engine,
    Hybrid,
    InvariantViolated,
    ModelConfig,
    PhaseBudgetExceeded,
    RngStream,
    log2_ceil,
)
from .graphs import Graph


@dataclass
class ExpanderResult:
    n: int
    graph: Graph | None
    phases: int
    ledger: object
    success: bool = True
    failure: str = ""
    load_failures: int = 0
    max_load: int = 0
    load_bound: int = 0
    active_per_phase: list = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return self.ledger.rounds


def load_bound(n: int, c_load: float = 6.0) -> int:
    L = max(1, log2_ceil(n))
    ll = max(1.0, math.log2(max(L, 2)))
    return int(c_load * math.ceil(L / ll))


def walk_step_load_check(loads, n: int, c_load: float = 6.0) -> int:
    """Soft check of per-round token arrivals; returns the number of rounds over bound."""
    bound = load_bound(n, c_load)
    return int(sum(1 for x in loads if x > bound))


def expander_degree_reduction(
    graph: Graph,
    c: int = 2,
    seed: int = 0,
    config: ModelConfig | None = None,
    walk_len: int | None = None,
    max_phases: int | None = None,
    c_load: float = 6.0,
) -> ExpanderResult:
    n = graph.n
    L = max(1, log2_ceil(n))
    walk_len = 2 * L if walk_len is None else walk_len
    max_phases = 10 * L if max_phases is None else max_phases
    config = config or ModelConfig(Hybrid())
    rng = RngStream(seed)
    engine = Engine(graph, config, rng)
    indptr, nbrs = graph.csr()
    deg = np.diff(indptr)
    if n > 1 and (deg == 0).any():
        raise ValueError("every node needs a neighbour to walk to")

    owner = np.repeat(np.arange(n, dtype=np.int64), c)
    loc = owner.copy()
    active = np.ones(n * c, dtype=bool)
    res = ExpanderResult(n, None, 0, engine.ledger, load_bound=load_bound(n, c_load))
    loads = []
    threshold = 10 * c

    while active.any():
        if res.phases >= max_phases:
            res.success = False
            res.failure = "tokens still active"
            raise PhaseBudgetExceeded(f"tokens active after {max_phases} phases", res)
        engine.begin_phase(int(active.sum()))
        res.active_per_phase.append(int(active.sum()))
        gen = rng.generator("walk", res.phases)
        idx = np.flatnonzero(active)
        for _ in range(walk_len):
            if n == 1:
                engine.idle_round()
                continue
            here = loc[idx]
            pick = (gen.random(len(idx)) * deg[here]).astype(np.int64)
            there = nbrs[indptr[here] + pick]
            # the token carries its owner's id
            engine.send(Batch.make(here, there, Channel.GLOBAL_CONTACT, 1, "walk", owner[idx]))
            loc[idx] = there
            arrivals = np.bincount(there, minlength=n)
            loads.append(int(arrivals.max()))
            if np.bincount(loc, minlength=n).sum() != n * c:
                raise InvariantViolated("token count not conserved")
        counts = np.bincount(loc, minlength=n)
        stop = active & (counts[loc] < threshold)
        active[stop] = False
        engine.end_phase()
        res.phases += 1

    # holders link to the owners of their inactive tokens
    lo = np.minimum(owner, loc)
    hi = np.maximum(owner, loc)
    keep = lo != hi
    codes = np.unique(lo[keep] * n + hi[keep])
    pairs = np.unique(loc[keep] * n + owner[keep])
    if len(pairs):
        engine.send(Batch.make(pairs // n, pairs % n, Channel.GLOBAL_CONTACT, 1, "link"))
    res.graph = Graph(n, [(int(x // n), int(x % n)) for x in codes])
    if res.graph.max_degree > 11 * c:
        raise InvariantViolated(f"output degree {res.graph.max_degree} > {11 * c}")
    res.max_load = max(loads) if loads else 0
    res.load_failures = walk_step_load_check(loads, n, c_load)
    return res
