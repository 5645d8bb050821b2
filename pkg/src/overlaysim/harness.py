"""Experiment runner: one CSV row per (size, seed) cell."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import calibration as cal
from .core import GossipReply, Hybrid, ModelConfig, PhaseBudgetExceeded, SimulationError, log2_ceil, word_bits
from .expander import expander_degree_reduction
from .graphs import Graph, InvalidGraph, RootedTree, check_satisfactory, generate, load_edgelist
from .hybrid_wft import run_hybrid_wft
from .merge_star import MergeStar, star_to_topology
from .treeops import IterationBudgetExceeded, rc2t

PROTOCOLS = ("merge_star", "star_to_topology", "hybrid_wft", "expander_reduce", "rc2t_bench")
CSV_HEADER = [
    "protocol", "n", "m", "seed", "phases", "rounds", "total_messages", "total_bits",
    "max_nodewise_ratio", "success", "invariant_failures", "wall_time_ms",
]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    protocol: str = "merge_star"
    family: str = "random_connected"
    params: dict = field(default_factory=dict)
    sizes: list = field(default_factory=lambda: [64])
    seeds: list = field(default_factory=lambda: [0])
    b_bits: int | None = None
    alpha_bits: int | None = None
    beta: int = 1
    gamma_factor: float = 1.0
    strict: bool = True
    out: str | None = None
    target: str = "cycle"       # H for star_to_topology
    tokens: int = 2             # c for expander_reduce
    master_seed: int | None = None
    record_time: bool = False   # wall_time_ms stays 0 unless set, so CSVs are reproducible

    def validate(self) -> "ExperimentConfig":
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        self.sizes = [int(s) for s in self.sizes]
        self.seeds = expand_seeds(self.seeds)
        if not self.sizes or min(self.sizes) < 1:
            raise ConfigError("sizes must be a nonempty list of integers >= 1")
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if self.beta < 1 or self.gamma_factor <= 0 or self.tokens < 1:
            raise ConfigError("model constants must be positive")
        if self.b_bits is not None and self.b_bits < 1:
            raise ConfigError("b_bits must be positive")
        if self.family == "edgelist":
            # the graph file fixes n; sizes follow it
            if "path" not in self.params:
                raise ConfigError('family "edgelist" needs params {"path": ...}')
            try:
                self.sizes = [load_edgelist(self.params["path"]).n]
            except (OSError, ValueError, InvalidGraph) as e:
                raise ConfigError(f"cannot read edge list: {e}") from e
        if self.master_seed is None:
            self.master_seed = int(os.environ.get("OVERLAYSIM_SEED", "0"))
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: {e}") from e


def expand_seeds(seeds) -> list[int]:
    """A list of seeds, {"base": b, "count": k}, "b:k", or "s1,s2,..."."""
    if isinstance(seeds, dict):
        return list(range(int(seeds["base"]), int(seeds["base"]) + int(seeds["count"])))
    if isinstance(seeds, str):
        if ":" in seeds:
            b, k = seeds.split(":")
            return list(range(int(b), int(b) + int(k)))
        return [int(s) for s in seeds.split(",") if s.strip()]
    return [int(s) for s in seeds]


@dataclass
class RunRecord:
    protocol: str
    n: int
    m: int
    seed: int
    phases: int
    rounds: int
    total_messages: int
    total_bits: int
    max_nodewise_ratio: float
    success: bool
    invariant_failures: int
    wall_time_ms: int = 0

    def row(self) -> list:
        return [
            self.protocol, self.n, self.m, self.seed, self.phases, self.rounds,
            self.total_messages, self.total_bits, f"{self.max_nodewise_ratio:.6f}",
            int(self.success), self.invariant_failures, self.wall_time_ms,
        ]


def run_seed(master: int, seed: int) -> int:
    """Seed of one cell; the plain seed when no master seed is set."""
    if not master:
        return seed
    return int(np.random.SeedSequence([master, seed]).generate_state(1, dtype=np.uint32)[0])


def nodewise_ratio(ledger, graph: Graph) -> float:
    L = max(1, log2_ceil(graph.n))
    deg = np.asarray(graph.degrees)
    return float((ledger.nodewise() / (deg + L)).max()) if graph.n else 0.0


def _model(cfg: ExperimentConfig, gossip: bool) -> ModelConfig:
    if gossip:
        return ModelConfig(GossipReply(cfg.b_bits), strict_capacity=cfg.strict)
    return ModelConfig(Hybrid(cfg.alpha_bits, cfg.beta, cfg.gamma_factor), strict_capacity=cfg.strict)


def _graph(cfg: ExperimentConfig, n: int, seed: int, family: str | None = None, params: dict | None = None) -> Graph:
    family = family or cfg.family
    params = cfg.params if params is None else params
    if family == "edgelist":
        return load_edgelist(params["path"])
    return generate(family, n, params, seed)


def run_one(cfg: ExperimentConfig, n: int, seed: int) -> RunRecord:
    s = run_seed(cfg.master_seed or 0, seed)
    t0 = time.perf_counter()
    rec = _dispatch(cfg, n, s)
    rec.seed = seed
    if cfg.record_time:
        rec.wall_time_ms = int(round((time.perf_counter() - t0) * 1000))
    return rec


def _dispatch(cfg: ExperimentConfig, n: int, s: int) -> RunRecord:
    p = cfg.protocol
    if p == "merge_star":
        g = _graph(cfg, n, s)
        ms = MergeStar(g, _model(cfg, True), s)
        try:
            r = ms.run(cal.PHASE_FACTOR * max(1, log2_ceil(n)))
        except PhaseBudgetExceeded as e:
            r = e.result
        return RunRecord(p, n, g.m, s, r.phases, r.rounds, r.ledger.total_messages, r.ledger.total_bits,
                         nodewise_ratio(r.ledger, g), r.success, r.invariant_failures)
    if p == "star_to_topology":
        g = _graph(cfg, n, s)
        ms = MergeStar(g, _model(cfg, True), s)
        try:
            r = ms.run(cal.PHASE_FACTOR * max(1, log2_ceil(n)))
        except PhaseBudgetExceeded as e:
            r = e.result
        if not r.success:
            return RunRecord(p, n, g.m, s, r.phases, r.rounds, r.ledger.total_messages, r.ledger.total_bits,
                             nodewise_ratio(r.ledger, g), False, r.invariant_failures)
        H = generate(cfg.target, n, {"d": 3} if cfg.target == "random_regular" else {}, s + 1)
        center = int(r.leader[0])
        t = star_to_topology(center, n, H, _model(cfg, True), s)
        ok = t.edges == relabeled_edges(H, t.mapping) and t.rounds <= H.max_degree + 2
        msgs = r.ledger.total_messages + t.ledger.total_messages
        bits = r.ledger.total_bits + t.ledger.total_bits
        nw = float(((r.ledger.nodewise() + t.ledger.nodewise()) / (np.asarray(g.degrees) + max(1, log2_ceil(n)))).max())
        return RunRecord(p, n, g.m, s, r.phases, r.rounds + t.rounds, msgs, bits, nw, ok, r.invariant_failures)
    if p == "hybrid_wft":
        g = _graph(cfg, n, s)
        try:
            r = run_hybrid_wft(g, _model(cfg, False), s, c_sat=cal.C_SAT, c_depth=cal.C_DEPTH,
                               round_cap_factor=cal.ROUND_CAP_FACTOR,
                               max_phases=cal.PHASE_FACTOR * max(1, log2_ceil(n)))
        except PhaseBudgetExceeded as e:
            r = e.result
        except SimulationError:
            return RunRecord(p, n, g.m, s, 0, 0, 0, 0, 0.0, False, 1)
        return RunRecord(p, n, g.m, s, r.phases, r.rounds, r.ledger.total_messages, r.ledger.total_bits,
                         nodewise_ratio(r.ledger, g), r.success, r.invariant_failures)
    if p == "expander_reduce":
        if cfg.family == "edgelist":
            g = _graph(cfg, n, s)
        else:
            params = dict(cfg.params) if cfg.family == "random_regular" else {}
            params.setdefault("d", max(1, log2_ceil(n)))
            g = generate("random_regular", n, params, s)
        try:
            r = expander_degree_reduction(g, cfg.tokens, s, _model(cfg, False), c_load=cal.C_LOAD,
                                          max_phases=cal.C_EXP_PHASES * max(1, log2_ceil(n)))
            ok = r.success and r.graph.max_degree <= 11 * cfg.tokens
            fails = 0
        except PhaseBudgetExceeded as e:
            r, ok, fails = e.result, False, 0
        except SimulationError:
            return RunRecord(p, n, g.m, s, 0, 0, 0, 0, 0.0, False, 1)
        return RunRecord(p, n, g.m, s, r.phases, r.rounds, r.ledger.total_messages, r.ledger.total_bits,
                         nodewise_ratio(r.ledger, g), ok, fails)
    if p == "rc2t_bench":
        return _rc2t_bench(n, s)
    raise ConfigError(f"unknown protocol {p!r}")


def relabeled_edges(H: Graph, mapping) -> list[tuple[int, int]]:
    """E(H) moved onto nodes: vertex x of H is played by the node v with mapping[v] = x."""
    node_of = np.argsort(np.asarray(mapping))
    return sorted((min(int(node_of[x]), int(node_of[y])), max(int(node_of[x]), int(node_of[y]))) for x, y in H.edges())


def _rc2t_bench(K: int, s: int) -> RunRecord:
    """RC2T on a single cycle of K nodes, each its own owner."""
    succ = (np.arange(K) + 1) % K
    sent = np.zeros(K, dtype=np.int64)
    recv = np.zeros(K, dtype=np.int64)

    def on_round(src, dst, carried):
        np.add.at(sent, src, 1)
        np.add.at(recv, dst, 1)

    gen = np.random.default_rng(np.random.SeedSequence([s, K]))
    L = max(1, log2_ceil(K))
    try:
        r = rc2t(succ, gen=gen, on_round=on_round)
    except IterationBudgetExceeded:
        return RunRecord("rc2t_bench", K, K if K > 2 else K - 1, s, 0, 0, 0, 0, 0.0, False, 1)
    root = int(np.flatnonzero(r.parent < 0)[0])
    tree = RootedTree(K, root, r.parent.tolist())
    ok = check_satisfactory(tree, K, cal.C_SAT).passed and r.iterations <= cal.C_RC * L
    bits = 2 * word_bits(K) * r.messages
    nw = float(((sent + recv) / (2 + L)).max())
    return RunRecord("rc2t_bench", K, K if K > 2 else K - 1, s, r.iterations, r.rounds, r.messages, bits, nw, ok, 0)


def run_experiment(cfg: ExperimentConfig, progress=None) -> tuple[list[RunRecord], dict]:
    cfg.validate()
    records = []
    for n in cfg.sizes:
        for seed in cfg.seeds:
            rec = run_one(cfg, n, seed)
            records.append(rec)
            if progress:
                progress(rec)
    return records, summarize(cfg.protocol, records)


def summarize(protocol: str, records: list[RunRecord]) -> dict:
    out = {"protocol": protocol, "sizes": {}}
    for n in sorted({r.n for r in records}):
        rs = [r for r in records if r.n == n]
        L = max(1.0, math.log2(n))
        mean = lambda k: float(np.mean([getattr(r, k) for r in rs]))
        row = {
            "runs": len(rs),
            "success_rate": mean("success"),
            "phases": mean("phases"),
            "rounds": mean("rounds"),
            "total_messages": mean("total_messages"),
            "total_bits": mean("total_bits"),
            "max_nodewise_ratio": max(r.max_nodewise_ratio for r in rs),
            "messages_per_n_log_n": mean("total_messages") / (n * L),
            "bits_per_n_log2_n": mean("total_bits") / (n * L * L),
        }
        if protocol in ("merge_star", "star_to_topology"):
            row["rounds_per_log_n"] = row["rounds"] / L
        if protocol == "hybrid_wft":
            row["rounds_per_log2_n"] = row["rounds"] / (L * L)
        out["sizes"][str(n)] = row
    out["all_success"] = all(r.success for r in records)
    return out


def write_csv(records: list[RunRecord], path: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())
    text = buf.getvalue()
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
