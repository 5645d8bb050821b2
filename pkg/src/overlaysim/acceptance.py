"""Acceptance suites.  Each criterion returns a ``Criterion`` with the measured
values next to their thresholds; failing is a value, never an exception."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import calibration as cal
from .core import GossipReply, Hybrid, ModelConfig, PhaseBudgetExceeded, RngStream, log2_ceil
from .expander import expander_degree_reduction
from .graphs import Graph, RootedTree, _random_tree_edges, check_satisfactory, conductance_exact, generate
from .harness import ExperimentConfig, PROTOCOLS, relabeled_edges, run_experiment, write_csv
from .hybrid_wft import run_hybrid_wft
from .merge_star import MergeStar, star_to_topology
from .sketch import Incidence, OfflineTransport, find_outgoing, find_outgoing_all
from .treeops import deterministic_wft, rc2t, reroot


@dataclass
class Criterion:
    cid: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        parts = []
        for k, v in self.measured.items():
            t = self.thresholds.get(k)
            vs = f"{v:.4g}" if isinstance(v, float) else str(v)
            if t is None:
                parts.append(f"{k}={vs}")
            else:
                ratio = ""
                if isinstance(v, (int, float)) and isinstance(t, (int, float)) and t:
                    ratio = f" ({v / t:.2f}x)"
                parts.append(f"{k}={vs} vs {t}{ratio}")
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] C{self.cid} {self.name}: " + "; ".join(parts) + f" [{self.seconds:.1f}s]"


def _timed(fn):
    def wrap(*a, **kw):
        t0 = time.perf_counter()
        c = fn(*a, **kw)
        c.seconds = time.perf_counter() - t0
        return c

    wrap.__name__ = fn.__name__
    wrap.__doc__ = fn.__doc__
    return wrap


# sketch -------------------------------------------------------------------

def _fuzz_graph(rng: np.random.Generator, idx: int) -> Graph:
    """Disjoint union of 1-3 random connected pieces, n <= 128."""
    pieces = int(rng.integers(1, 4))
    edges, off = [], 0
    for j in range(pieces):
        size = int(rng.integers(2, 128 // pieces + 1))
        fam = ["random_connected", "line", "cycle", "star", "complete"][int(rng.integers(0, 5))]
        if fam == "complete":
            size = min(size, 12)
        if fam == "cycle":
            size = max(size, 3)
        g = generate(fam, size, {}, idx * 7 + j)
        edges += [(u + off, v + off) for u, v in g.edges()]
        off += size
    return Graph(off, edges)


def sketch_corpus(pairs: int = 10_000, seed: int = 2024):
    """Yields (graph, cluster labels, parent) with many clusters per graph."""
    rng = np.random.default_rng(seed)
    count, idx = 0, 0
    while count < pairs:
        g = _fuzz_graph(rng, idx)
        n = g.n
        # pieces: some kept whole (no outgoing edge), the rest cut into random clusters
        comp = _components(g)
        labels = np.empty(n, dtype=np.int64)
        for c in np.unique(comp):
            members = np.flatnonzero(comp == c)
            if rng.random() < 0.3:
                labels[members] = members[0]
            else:
                k = int(rng.integers(1, len(members) + 1))
                pick = rng.integers(0, k, size=len(members))
                for j in range(k):
                    sel = members[pick == j]
                    if len(sel):
                        labels[sel] = sel[0]
        parent = np.where(labels == np.arange(n), -1, labels)
        yield g, labels, parent
        count += len(np.unique(labels))
        idx += 1


def _components(g: Graph) -> np.ndarray:
    comp = np.full(g.n, -1, dtype=np.int64)
    for s in range(g.n):
        if comp[s] >= 0:
            continue
        comp[s] = s
        stack = [s]
        while stack:
            u = stack.pop()
            for v in g.adj[u]:
                if comp[v] < 0:
                    comp[v] = s
                    stack.append(v)
    return comp


def _outgoing_oracle(g: Graph, labels: np.ndarray) -> dict:
    """Brute force: label -> set of outgoing edges (u < v)."""
    out = {int(l): set() for l in np.unique(labels)}
    for u, v in g.edges():
        if labels[u] != labels[v]:
            e = (min(u, v), max(u, v))
            out[int(labels[u])].add(e)
            out[int(labels[v])].add(e)
    return out


@lru_cache(maxsize=None)
def sketch_fuzz(pairs: int = 10_000) -> dict:
    stats = dict(pairs=0, returned=0, unsound=0, missed_empty=0, empty_clusters=0, hp_true_on_empty=0)
    for i, (g, labels, parent) in enumerate(sketch_corpus(pairs)):
        oracle = _outgoing_oracle(g, labels)
        res = find_outgoing_all(g, labels, OfflineTransport(labels, parent), RngStream(i), 0, check=False)
        for lab, cut in oracle.items():
            stats["pairs"] += 1
            if res.edge[lab] >= 0:
                stats["returned"] += 1
                a, b = int(res.inner[lab]), int(res.outer[lab])
                if (min(a, b), max(a, b)) not in cut or labels[a] != lab:
                    stats["unsound"] += 1
            if not cut:
                stats["empty_clusters"] += 1
                if res.edge[lab] >= 0:
                    stats["missed_empty"] += 1
                if res.hp[lab]:
                    stats["hp_true_on_empty"] += 1
    return stats


@_timed
def criterion_1() -> Criterion:
    s = sketch_fuzz()
    ok = s["pairs"] >= 10_000 and s["unsound"] == 0 and s["missed_empty"] == 0
    return Criterion(1, "FindOutgoing soundness", ok,
                     {"pairs": s["pairs"], "returned": s["returned"], "unsound": s["unsound"],
                      "empty_clusters": s["empty_clusters"], "nonempty_on_empty": s["missed_empty"]},
                     {"unsound": 0, "nonempty_on_empty": 0})


@_timed
def criterion_2(trials: int = 20_000) -> Criterion:
    g = generate("random_connected", 64, {}, 7)
    # a fixed connected 8-node cluster: BFS ball from node 0
    order, seen = [0], {0}
    for u in order:
        for v in g.adj[u]:
            if v not in seen and len(order) < 8:
                seen.add(v)
                order.append(v)
    members = sorted(order)
    inc = Incidence(g)
    rng = RngStream(99)
    hits = sum(find_outgoing(g, members, rng, t, inc) is not None for t in range(trials))
    rate = hits / trials
    return Criterion(2, "FindOutgoing success rate", rate >= 1 / 16 and trials >= 20_000,
                     {"trials": trials, "rate": rate}, {"rate": 0.0625})


@_timed
def criterion_3() -> Criterion:
    s = sketch_fuzz()
    return Criterion(3, "HPTestOut one-sidedness", s["hp_true_on_empty"] == 0 and s["empty_clusters"] > 0,
                     {"empty_clusters": s["empty_clusters"], "true_returns": s["hp_true_on_empty"]},
                     {"true_returns": 0})


# merge star ---------------------------------------------------------------

MERGE_SIZES = (64, 256, 1024, 4096)


@lru_cache(maxsize=None)
def merge_corpus(seeds: int = 20) -> list:
    out = []
    for n in MERGE_SIZES:
        for s in range(seeds):
            g = generate("random_connected", n, {}, s)
            r = MergeStar(g, ModelConfig(GossipReply()), s).run()
            out.append((n, s, r))
    return out


@_timed
def criterion_4() -> Criterion:
    t0 = time.perf_counter()
    runs = merge_corpus()
    elapsed = time.perf_counter() - t0
    stars = all(r.is_star() for _, _, r in runs)
    phase_ok = all(r.phases <= 40 * math.log2(n) for n, _, r in runs)
    rounds_ok = all(r.ledger.rounds == 7 * r.phases for _, _, r in runs)
    means = {n: float(np.mean([r.phases for m, _, r in runs if m == n])) / math.log2(n) for n in MERGE_SIZES}
    spread = max(means.values()) / min(means.values())
    ok = stars and phase_ok and rounds_ok and spread < 2
    m = {"runs": len(runs), "all_star": stars, "rounds_eq_7_phases": rounds_ok,
         "max_phases_per_log_n": max(r.phases / math.log2(n) for n, _, r in runs), "spread": spread,
         "corpus_seconds": elapsed}
    m.update({f"mean_phases/log_n@{n}": v for n, v in means.items()})
    return Criterion(4, "MergeStar star + round scaling", ok, m,
                     {"max_phases_per_log_n": 40, "spread": 2, "corpus_seconds": 300})


@_timed
def criterion_5() -> Criterion:
    ratios = [rec.clusters_after / rec.clusters for _, _, r in merge_corpus() for rec in r.records if rec.clusters >= 2]
    mean = float(np.mean(ratios))
    bound = 63 / 64 + 0.02
    return Criterion(5, "MergeStar per-phase contraction", len(ratios) >= 1000 and mean <= bound,
                     {"phases": len(ratios), "mean_ratio": mean}, {"mean_ratio": round(bound, 6)})


@_timed
def criterion_6() -> Criterion:
    runs = merge_corpus()
    exact = all(r.ledger.total_messages <= 14 * n * r.phases for n, _, r in runs)
    msg = max(r.ledger.total_messages / (n * math.log2(n)) for n, _, r in runs)
    bits = max(r.ledger.total_bits / (n * math.log2(n) ** 2) for n, _, r in runs)
    ok = exact and msg <= cal.C_MSG and bits <= cal.C_BIT
    return Criterion(6, "MergeStar budgets", ok,
                     {"messages<=14n*phases": exact, "msg_per_n_log_n": msg, "bits_per_n_log2_n": bits},
                     {"msg_per_n_log_n": cal.C_MSG, "bits_per_n_log2_n": cal.C_BIT})


@_timed
def criterion_7(seeds: int = 5) -> Criterion:
    n = 256
    results = []
    for fam, params in (("cycle", {}), ("random_regular", {"d": 3})):
        for s in range(seeds):
            H = generate(fam, n, params, 100 + s)
            g = generate("random_connected", n, {}, s)
            star = MergeStar(g, ModelConfig(GossipReply()), s).run()
            t = star_to_topology(int(star.leader[0]), n, H, ModelConfig(GossipReply()), s)
            results.append((star.is_star() and t.edges == relabeled_edges(H, t.mapping), t.rounds, H.max_degree))
    iso = all(r[0] for r in results)
    slack = max(r[1] - r[2] for r in results)
    return Criterion(7, "star_to_topology isomorphism", iso and slack <= 2,
                     {"runs": len(results), "isomorphic": iso, "max_rounds_minus_delta": slack},
                     {"max_rounds_minus_delta": 2})


# hybrid -------------------------------------------------------------------

HYBRID_SIZES = tuple(2 ** e for e in range(6, 12))


@lru_cache(maxsize=None)
def hybrid_corpus(seeds: int = 20) -> list:
    out = []
    t0 = time.perf_counter()
    for fam in ("random_connected", "line"):
        for n in HYBRID_SIZES:
            for s in range(seeds):
                g = generate(fam, n, {}, s)
                r = run_hybrid_wft(g, ModelConfig(Hybrid()), s, c_sat=cal.C_SAT, c_depth=cal.C_DEPTH,
                                   round_cap_factor=cal.ROUND_CAP_FACTOR)
                out.append((fam, n, s, g, r))
    out.append(("elapsed", time.perf_counter() - t0, 0, None, None))
    return out


def _hybrid_runs():
    return [x for x in hybrid_corpus() if x[0] != "elapsed"]


@_timed
def criterion_8() -> Criterion:
    runs = _hybrid_runs()
    elapsed = [x for x in hybrid_corpus() if x[0] == "elapsed"][0][1]
    wft = [getattr(r, "wft_report", None) for *_, r in runs]
    wft_ok = all(w is not None and w.passed for w in wft)
    violations = sum(len(r.ledger.violations) for *_, r in runs)
    rounds = max(r.ledger.rounds / math.log2(n) ** 2 for _, n, _, _, r in runs)
    msgs = max(r.ledger.total_messages / (n * math.log2(n)) for _, n, _, _, r in runs)
    depth = max((w.depth / math.log2(n)) if w else float("inf") for w, (_, n, *_rest) in zip(wft, runs))
    maxdeg = max(w.maxdeg if w else 99 for w in wft)
    cap_hits = sum(r.round_budget_hits for *_, r in runs)
    ok = wft_ok and violations == 0 and rounds <= cal.C_ROUNDS_HYBRID and msgs <= cal.C_MSG_HYBRID and elapsed < 600
    return Criterion(8, "HybridWFT output", ok,
                     {"runs": len(runs), "wft_pass": wft_ok, "max_degree": maxdeg, "depth_per_log_n": depth,
                      "capacity_violations": violations, "rounds_per_log2_n": rounds, "msg_per_n_log_n": msgs,
                      "phase_round_cap_hits": cap_hits, "corpus_seconds": elapsed},
                     {"max_degree": 6, "depth_per_log_n": cal.C_DEPTH, "capacity_violations": 0,
                      "rounds_per_log2_n": cal.C_ROUNDS_HYBRID, "msg_per_n_log_n": cal.C_MSG_HYBRID,
                      "corpus_seconds": 600})


@_timed
def criterion_9() -> Criterion:
    runs = _hybrid_runs()
    checks = sum(r.forest_checks for *_, r in runs)
    phases = sum(r.phases for *_, r in runs)
    bad = [r.failure for *_, r in runs if "cluster graph" in r.failure or "diameter" in r.failure]
    diam = max(r.max_forest_diameter for *_, r in runs)
    ok = not bad and checks == phases and diam <= 3
    return Criterion(9, "cluster graph is a forest of diameter <= 3", ok,
                     {"phases_checked": checks, "phases": phases, "violations": len(bad), "max_diameter": diam},
                     {"violations": 0, "max_diameter": 3})


@_timed
def criterion_10() -> Criterion:
    runs = _hybrid_runs()
    per = {}
    for _, n, _, g, r in runs:
        deg = np.asarray(g.degrees)
        ratio = float((r.ledger.nodewise() / (deg + math.log2(n))).max())
        per[n] = max(per.get(n, 0.0), ratio)
    top = max(per.values())
    growth = per[max(per)] / per[min(per)]
    ok = top <= cal.C_NODE and growth < 2
    m = {"max_ratio": top, "largest_over_smallest": growth}
    m.update({f"max@{n}": v for n, v in sorted(per.items())})
    return Criterion(10, "node-wise message bound", ok, m, {"max_ratio": cal.C_NODE, "largest_over_smallest": 2})


# tree ops -----------------------------------------------------------------

@_timed
def criterion_11(seeds: int = 4) -> Criterion:
    active = dead = 0
    worst_iter = 0.0
    sat = True
    for e in range(6, 15):
        K = 2 ** e
        succ = (np.arange(K) + 1) % K
        for s in range(seeds):
            r = rc2t(succ, gen=np.random.default_rng([s, K]))
            active += sum(r.active_counts)
            dead += sum(r.deactivated)
            worst_iter = max(worst_iter, r.iterations / e)
            root = int(np.flatnonzero(r.parent < 0)[0])
            sat &= check_satisfactory(RootedTree(K, root, r.parent.tolist()), K, cal.C_SAT).passed
    survival = 1 - dead / active
    ok = active >= 100_000 and abs(survival - 7 / 8) <= 0.02 and worst_iter <= cal.C_RC and sat
    return Criterion(11, "RC2T statistics", ok,
                     {"node_iterations": active, "survival": survival, "iterations_per_log_K": worst_iter,
                      "satisfactory": sat},
                     {"survival": 0.875, "iterations_per_log_K": cal.C_RC})


def fuzz_trees(count: int = 100, seed: int = 5):
    rng = np.random.default_rng(seed)
    shapes = ["random_connected", "line", "star", "binary_tree", "caterpillar"]
    for i in range(count):
        n = int(rng.integers(1, 2049))
        fam = shapes[i % len(shapes)]
        if fam == "random_connected":
            edges = _random_tree_edges(n, rng) if n > 1 else []
            g = Graph(n, edges)
        else:
            g = generate(fam, n, {}, i)
        root = int(rng.integers(0, n))
        yield reroot(n, g.edges(), root)


@_timed
def criterion_12() -> Criterion:
    worst_deg = 0
    worst_slack = -99
    count = 0
    for t in fuzz_trees():
        tree, info = deterministic_wft(np.asarray(t.parent), t.root)
        count += 1
        worst_deg = max(worst_deg, tree.max_degree)
        worst_slack = max(worst_slack, tree.depth - math.ceil(math.log2(max(info["K"], 1))))
    ok = worst_deg <= 6 and worst_slack <= cal.PIPELINE_DEPTH_SLACK
    return Criterion(12, "deterministic pipeline structure", ok,
                     {"trees": count, "max_degree": worst_deg, "depth_minus_log_K": worst_slack},
                     {"max_degree": 6, "depth_minus_log_K": cal.PIPELINE_DEPTH_SLACK})


# expander -----------------------------------------------------------------

@_timed
def criterion_13(seeds: int = 5) -> Criterion:
    worst_phase = worst_msg = 0.0
    worst_deg = 0
    done = True
    for e in range(8, 13):
        n = 2 ** e
        for s in range(seeds):
            g = generate("random_regular", n, {"d": e}, s)
            try:
                r = expander_degree_reduction(g, 2, s, c_load=cal.C_LOAD, max_phases=cal.C_EXP_PHASES * e)
            except PhaseBudgetExceeded:
                done = False
                continue
            worst_phase = max(worst_phase, r.phases / e)
            worst_deg = max(worst_deg, r.graph.max_degree)
            worst_msg = max(worst_msg, r.ledger.total_messages / (n * e * e))
    phi = {}
    for n in (12, 16):
        vals = []
        for s in range(seeds):
            g = generate("random_regular", n, {"d": log2_ceil(n)}, s)
            vals.append(conductance_exact(expander_degree_reduction(g, 2, s).graph))
        phi[n] = min(vals)
    ok = done and worst_phase <= cal.C_EXP_PHASES and worst_deg <= 22 and worst_msg <= cal.C_EXP_MSG and min(phi.values()) > 0
    return Criterion(13, "expander degree reduction", ok,
                     {"all_inactive": done, "phases_per_log_n": worst_phase, "max_degree": worst_deg,
                      "msg_per_n_log2_n": worst_msg, "min_conductance@12": phi[12], "min_conductance@16": phi[16]},
                     {"phases_per_log_n": cal.C_EXP_PHASES, "max_degree": 22, "msg_per_n_log2_n": cal.C_EXP_MSG})


# determinism --------------------------------------------------------------

DETERMINISM_CONFIGS = [
    dict(protocol="merge_star", sizes=[64, 256], seeds=[0, 1, 2]),
    dict(protocol="star_to_topology", sizes=[64], seeds=[0, 1], target="random_regular"),
    dict(protocol="hybrid_wft", sizes=[64, 128], seeds=[0, 1]),
    dict(protocol="hybrid_wft", family="line", sizes=[64], seeds=[3]),
    dict(protocol="expander_reduce", sizes=[256], seeds=[0, 1]),
    dict(protocol="rc2t_bench", sizes=[64, 1024], seeds=[0, 1]),
]


@_timed
def criterion_14() -> Criterion:
    same = 0
    for d in DETERMINISM_CONFIGS:
        a = write_csv(run_experiment(ExperimentConfig(**d, master_seed=0))[0])
        b = write_csv(run_experiment(ExperimentConfig(**d, master_seed=0))[0])
        same += a == b
    covered = sorted({d["protocol"] for d in DETERMINISM_CONFIGS})
    return Criterion(14, "byte-identical CSV", same == len(DETERMINISM_CONFIGS) and covered == sorted(PROTOCOLS),
                     {"configs": len(DETERMINISM_CONFIGS), "identical": same}, {"identical": len(DETERMINISM_CONFIGS)})


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11, 12: criterion_12,
    13: criterion_13, 14: criterion_14,
}

SUITES = {
    "sketch": (1, 2, 3),
    "merge_star": (4, 5, 6),
    "topology": (7,),
    "hybrid": (8, 9, 10),
    "forest": (9,),
    "rc2t": (11,),
    "pipeline": (12,),
    "expander": (13,),
    "determinism": (14,),
    "all": tuple(range(1, 15)),
}


def verify(suite: str, out=print) -> list[Criterion]:
    if suite not in SUITES:
        raise KeyError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    results = []
    for cid in SUITES[suite]:
        c = CRITERIA[cid]()
        results.append(c)
        if out:
            out(c.line())
    return results
