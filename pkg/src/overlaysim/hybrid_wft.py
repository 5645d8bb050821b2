"""Well-formed tree construction in HYBRID.

Clusters are rooted trees given by ``parent`` (``-1`` at roots) with
``root[v]`` the root of v's cluster.  A phase samples an outgoing edge per
cluster over tree sweeps, sends merging requests over local edges, pairs up
rejected requesters at each receiving node, re-roots every grouped cluster by
a BFS from its new leader and rebuilds it with child-sibling, Euler tour and
RC2T.  After the last phase the single tree goes through the deterministic
pipeline.
"""
from __future__ import annotations

from collections import defaultdict
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
from .graphs import Graph, InvalidGraph, RootedTree, check_satisfactory, check_wft
from .sketch import Incidence, TreeSweep, find_outgoing_all, hash_prime, tree_depths, words_for_bits
from .treeops import (
    IterationBudgetExceeded,
    bfs_parents,
    child_sibling,
    cycle_positions,
    euler_tour,
    merge_virtual,
    pointer_jump_tree,
    rc2t,
)

RED, BLUE = 0, 1


@dataclass
class GroupRecord:
    """Outcome of one grouping step (all ids are node ids)."""

    requesters: np.ndarray      # inner endpoint x of each request
    targets: np.ndarray         # receiving node y
    accepted: np.ndarray        # bool per request
    pairs: list                 # (x1, x2) matched rejected requesters
    cluster_edges: list         # (root_a, root_b, kind) with kind "a" or "m"
    leader: dict                # root -> new leader for grouped roots
    arrivals: np.ndarray        # requests received per node


@dataclass
class HybridResult:
    n: int
    tree: RootedTree | None
    ledger: object
    phases: int
    success: bool = True
    failure: str = ""
    invariant_failures: int = 0
    phase_rounds: list = field(default_factory=list)
    phase_messages: list = field(default_factory=list)
    forest_checks: int = 0
    max_forest_diameter: int = 0
    reroot_depth_ratio: float = 0.0
    max_sat_degree: int = 0
    max_sat_depth: int = 0
    rc2t_iterations: list = field(default_factory=list)
    active_iters: np.ndarray | None = None
    contraction_checks: int = 0
    round_budget_hits: int = 0

    @property
    def rounds(self) -> int:
        return self.ledger.rounds


def roots_of(parent: np.ndarray) -> np.ndarray:
    r = np.where(parent >= 0, parent, np.arange(len(parent)))
    while True:
        nxt = r[r]
        if np.array_equal(nxt, r):
            return r
        r = nxt


def effective_degree(graph: Graph, root: np.ndarray) -> np.ndarray:
    """Number of distinct foreign clusters adjacent to each node."""
    us, vs = graph.edge_arrays()
    a = np.concatenate([us, vs])
    b = np.concatenate([vs, us])
    ra = root[a]
    rb = root[b]
    keep = ra != rb
    codes = np.unique(a[keep] * graph.n + rb[keep])
    return np.bincount(codes // graph.n, minlength=graph.n)


def check_cluster_forest(n_roots_edges) -> int:
    """Assert the grouped-cluster graph is a forest of diameter <= 3.

    Takes (a, b, kind) cluster edges; returns the largest tree diameter.
    """
    adj = defaultdict(list)
    seen_pairs = set()
    for a, b, _ in n_roots_edges:
        key = (min(a, b), max(a, b))
        if a == b or key in seen_pairs:
            raise InvariantViolated(f"cluster graph has a cycle through {a}, {b}")
        seen_pairs.add(key)
        adj[a].append(b)
        adj[b].append(a)
    visited = set()
    best = 0

    def far(src):
        dist = {src: 0}
        stack = [src]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    stack.append(v)
        node = max(dist, key=lambda x: (dist[x], -x))
        return node, dist

    for s in list(adj):
        if s in visited:
            continue
        _, dist = far(s)
        comp = set(dist)
        visited |= comp
        nedges = sum(len(adj[u]) for u in comp) // 2
        if nedges != len(comp) - 1:
            raise InvariantViolated("cluster graph is not a forest")
        a, _ = far(s)
        _, d2 = far(a)
        diam = max(d2.values())
        if diam > 3:
            raise InvariantViolated(f"grouped cluster tree has diameter {diam} > 3")
        best = max(best, diam)
    return best


class HybridWFT:
    def __init__(
        self,
        graph: Graph,
        config: ModelConfig | None = None,
        seed: int = 0,
        c_sat: float = 4.0,
        check: bool = True,
        round_cap_factor: int = 30,
    ):
        if not graph.is_connected():
            raise InvalidGraph("HybridWFT needs a connected input graph")
        self.graph = graph
        self.n = graph.n
        self.config = config or ModelConfig(Hybrid())
        if self.config.is_gossip:
            raise ValueError("HybridWFT runs in HYBRID")
        self.rng = RngStream(seed)
        self.engine = Engine(graph, self.config, self.rng)
        self.inc = Incidence(graph)
        self.parent = np.full(self.n, -1, dtype=np.int64)
        self.root = np.arange(self.n, dtype=np.int64)
        self.phase = 0
        self.c_sat = c_sat
        self.check = check
        self.logn = max(1, log2_ceil(self.n))
        self.round_cap = round_cap_factor * self.logn
        self.active_iters = np.zeros(self.n, dtype=np.int64)
        self.result = HybridResult(self.n, None, self.engine.ledger, 0, active_iters=self.active_iters)
        # words of the HPTestOut hash pair carried for the next phase
        self.pw2 = 2 * words_for_bits(hash_prime(self.n).bit_length(), self.n)
        us, vs = graph.edge_arrays()
        self._gcodes = set((us * self.n + vs).tolist())

    # helpers -------------------------------------------------------------
    def _is_edge(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        codes = lo * self.n + hi
        return np.fromiter((c in self._gcodes for c in codes.tolist()), dtype=bool, count=len(codes))

    def _send_tree(self, src, dst, words, tag, carried=None, prefer_local=False):
        """Send along overlay links; G-edges go local when ``prefer_local``."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if not len(src):
            return 0
        words = np.broadcast_to(np.asarray(words, dtype=np.int64), src.shape)
        if carried is not None:
            carried = np.asarray(carried, dtype=np.int64)
            if carried.ndim == 1:
                carried = carried.reshape(-1, 1)
        loc = self._is_edge(src, dst) if prefer_local else np.zeros(len(src), dtype=bool)
        batches = []
        for mask, ch in ((loc, Channel.LOCAL_REQUEST), (~loc, Channel.GLOBAL_CONTACT)):
            if mask.any():
                batches.append(Batch.make(src[mask], dst[mask], ch, words[mask], tag,
                                          None if carried is None else carried[mask]))
        return self.engine.send(*batches)

    def cluster_count(self) -> int:
        return int(np.count_nonzero(self.parent < 0))

    # sampling ------------------------------------------------------------
    def hybrid_sample(self):
        sweep = TreeSweep(self.engine, self.root, self.parent, tag=f"p{self.phase}:fo")
        # hash parameters for this phase arrived with the previous phase's
        # colour broadcast or re-rooting flood (nothing to send in phase 0)
        res = find_outgoing_all(self.graph, self.root, sweep, self.rng, self.phase, inc=self.inc, announce=False)
        color = (self.rng.node_values("color", self.phase, self.n) >= 0.5).astype(np.int64)
        # root broadcasts (edge, colour); clusters without an edge send the colour only
        allc = np.zeros(self.n, dtype=bool)
        allc[self.root] = True
        sweep.set_active(allc)
        sweep.broadcast(np.where(res.edge >= 0, 3, 1) + self.pw2)
        return res, color

    # grouping ------------------------------------------------------------
    def hybrid_group(self, res, color) -> GroupRecord:
        n, root = self.n, self.root
        labels = np.flatnonzero(res.edge >= 0)
        x = res.inner[labels]
        y = res.outer[labels]
        # merging requests over the local edge: (colour, root id)
        self.engine.send(Batch.make(x, y, Channel.LOCAL_REQUEST, 2, "request", root[x]))
        rcol = color[root[x]]
        acol = color[root[y]]
        accepted = (acol == RED) & (rcol == BLUE)
        arrivals = np.bincount(y, minlength=n)
        # matching of rejected requesters per receiving node, ascending requester root
        rej = np.flatnonzero(~accepted)
        order = rej[np.lexsort((root[x[rej]], y[rej]))]
        pairs = []
        partner = np.full(len(x), -1, dtype=np.int64)
        i = 0
        while i < len(order):
            j = i
            while j < len(order) and y[order[j]] == y[order[i]]:
                j += 1
            grp = order[i:j]
            for a, b in zip(grp[0::2], grp[1::2]):
                partner[a], partner[b] = b, a
                pairs.append((int(x[a]), int(x[b])))
            i = j
        # replies over the same local edge: accept, or reject + partner (node, root)
        words = np.where(accepted, 2, np.where(partner >= 0, 3, 1))
        carried = np.full((len(x), 2), -1, dtype=np.int64)
        carried[accepted, 0] = y[accepted]
        pm = partner >= 0
        carried[pm, 0] = x[partner[pm]]
        carried[pm, 1] = root[x[partner[pm]]]
        self.engine.send(Batch.make(y, x, Channel.LOCAL_REPLY, words, "reply", carried))
        # regrouping: matched requesters exchange their roots over the global channel
        if pairs:
            p = np.array(pairs, dtype=np.int64)
            src = np.concatenate([p[:, 0], p[:, 1]])
            dst = np.concatenate([p[:, 1], p[:, 0]])
            self.engine.send(Batch.make(src, dst, Channel.GLOBAL_CONTACT, 1, "regroup", root[src]))
        edges = [(int(root[a]), int(root[b]), "a") for a, b in zip(x[accepted], y[accepted])]
        edges += [(int(root[a]), int(root[b]), "m") for a, b in pairs]
        leader = self._leaders(edges, color)
        return GroupRecord(x, y, accepted, pairs, edges, leader, arrivals)

    def _leaders(self, edges, color) -> dict:
        adj = defaultdict(list)
        for a, b, k in edges:
            adj[a].append((b, k))
            adj[b].append((a, k))
        leader = {}
        for s in sorted(adj):
            if s in leader:
                continue
            comp, stack = {s}, [s]
            matched = []
            while stack:
                u = stack.pop()
                for v, k in adj[u]:
                    if k == "m":
                        matched.append((u, v))
                    if v not in comp:
                        comp.add(v)
                        stack.append(v)
            if matched:
                pair = {matched[0][0], matched[0][1]}
                if any({a, b} != pair for a, b in matched):
                    raise InvariantViolated("grouped cluster holds two matched edges")
                lead = max(pair)
            else:
                reds = [c for c in comp if color[c] == RED and len(adj[c]) > 0 and all(k == "a" for _, k in adj[c])]
                centers = [c for c in reds if len(adj[c]) >= 1 and all(color[v] == BLUE for v, _ in adj[c])]
                if len(comp) == 2:
                    centers = [c for c in comp if color[c] == RED]
                if len(centers) != 1:
                    raise InvariantViolated("accepted star without a unique Red centre")
                lead = centers[0]
            for c in comp:
                leader[c] = lead
        return leader

    # merging -------------------------------------------------------------
    def hybrid_merge(self, rec: GroupRecord) -> None:
        n, root, parent = self.n, self.root, self.parent
        if not rec.leader:
            return
        lead_of_root = np.full(n, -1, dtype=np.int64)
        for r, l in rec.leader.items():
            lead_of_root[r] = l
        merged = lead_of_root[root] >= 0

        # 1. nodes that acted for the new leader inform it, up its tree
        inform = set()
        for a, acc, yy in zip(rec.requesters, rec.accepted, rec.targets):
            if acc and lead_of_root[root[yy]] == root[yy]:
                inform.add(int(yy))
        for a, b in rec.pairs:
            for u in (a, b):
                if lead_of_root[root[u]] == root[u]:
                    inform.add(u)
        self._inform_up(np.array(sorted(inform), dtype=np.int64))

        # 2. BFS re-rooting over old tree edges, accepted local edges and matched links
        m = np.flatnonzero(merged & (parent >= 0))
        tree_edges = list(zip(m.tolist(), parent[m].tolist()))
        acc_edges = [(int(a), int(b)) for a, b, ok in zip(rec.requesters, rec.targets, rec.accepted) if ok]
        edges = tree_edges + acc_edges + list(rec.pairs)
        leaders = sorted(set(rec.leader.values()))
        bpar, bdep = bfs_parents(n, edges, leaders)
        if (bdep[merged] < 0).any():
            raise InvariantViolated("re-rooting did not reach every merged node")
        local_pairs = set((min(a, b), max(a, b)) for a, b in acc_edges)
        old_depth = tree_depths(parent)
        for d in range(1, int(bdep.max()) + 1 if merged.any() else 1):
            lv = np.flatnonzero(bdep == d)
            src = bpar[lv]
            is_loc = np.fromiter(((min(a, b), max(a, b)) in local_pairs for a, b in zip(src.tolist(), lv.tolist())), dtype=bool, count=len(lv))
            batches = []
            if is_loc.any():
                batches.append(Batch.make(src[is_loc], lv[is_loc], Channel.LOCAL_REQUEST, 1, "reroot", src[is_loc]))
            if (~is_loc).any():
                batches.append(Batch.make(src[~is_loc], lv[~is_loc], Channel.GLOBAL_CONTACT, 1, "reroot", bpar[lv[~is_loc]]))
            self.engine.send(*batches)
        # re-rooted depth versus constituent depths
        old_max = int(old_depth[merged].max()) if merged.any() else 0
        new_max = int(bdep[merged].max()) if merged.any() else 0
        self.result.reroot_depth_ratio = max(self.result.reroot_depth_ratio, new_max / (4 * old_max + 3))

        # 3. restructure the merged clusters: child-sibling, Euler tour, RC2T
        nodes = np.flatnonzero(merged)
        idx = np.full(n, -1, dtype=np.int64)
        idx[nodes] = np.arange(len(nodes))
        sub_parent = np.where(bpar[nodes] >= 0, idx[np.maximum(bpar[nodes], 0)], -1)
        sub_parent[bpar[nodes] < 0] = -1
        self._restructure(nodes, sub_parent)

    def _inform_up(self, starts: np.ndarray) -> None:
        """Partial echo: each informing node's message climbs to its root,
        merging at shared ancestors (at most one message per tree edge)."""
        parent = self.parent
        reached = np.zeros(self.n, dtype=bool)
        frontier = starts[parent[starts] >= 0] if len(starts) else starts
        reached[starts] = True
        while len(frontier):
            up = parent[frontier]
            self._send_tree(frontier, up, 1, "inform")
            nxt = np.unique(up[~reached[up]])
            reached[nxt] = True
            frontier = nxt[parent[nxt] >= 0]

    def _restructure(self, nodes: np.ndarray, sub_parent: np.ndarray) -> None:
        n = self.n
        k = len(nodes)
        bt = child_sibling(sub_parent, key=nodes)
        # child-sibling messages: every old child learns its previous/next sibling
        ch = np.flatnonzero(sub_parent >= 0)
        if len(ch):
            par = sub_parent[ch]
            prev = bt.parent[ch]
            nxt = np.full(len(ch), -1, dtype=np.int64)
            has_r = bt.right[ch] >= 0
            nxt[has_r] = nodes[bt.right[ch][has_r]]
            carried = np.stack([nodes[prev], nxt], axis=1)
            self._send_tree(nodes[par], nodes[ch], 2, "child-sibling", carried, prefer_local=True)
        cyc = euler_tour(bt)
        # Euler tour: each node tells each binary-tree neighbour its adjacent copies
        src, dst = [], []
        for arr in (bt.parent, bt.left, bt.right):
            ok = arr >= 0
            src.append(np.flatnonzero(ok))
            dst.append(arr[ok])
        src = np.concatenate(src)
        dst = np.concatenate(dst)
        if len(src):
            self._send_tree(nodes[src], nodes[dst], 2, "euler", nodes[src], prefer_local=True)

        def on_round(s, d, c):
            if len(s):
                self.engine.send(Batch.make(nodes[s], nodes[d], Channel.GLOBAL_CONTACT, 2, "rc2t", nodes[c]))
            else:
                self.engine.idle_round()

        gen = self.rng.generator("rc2t", self.phase)
        budget = 10 * max(1, (cyc.K - 1).bit_length()) + 10
        res = rc2t(cyc.succ, cyc.owner, gen, budget=budget, on_round=on_round)
        self.result.rc2t_iterations.append(res.iterations)
        np.add.at(self.active_iters, nodes[cyc.owner], res.active_iters)
        # contract copies; BFS flood from each cycle root's owner
        vroots = np.flatnonzero(res.parent < 0)
        owner_edges = merge_virtual(cyc.owner, res.parent, k)
        new_roots = np.unique(cyc.owner[vroots])
        opar, odep = bfs_parents(k, owner_edges, new_roots.tolist())
        if (odep < 0).any():
            raise InvariantViolated("contracted cluster is disconnected")
        adj = defaultdict(list)
        for a, b in owner_edges:
            adj[a].append(b)
            adj[b].append(a)
        croot = roots_of(opar)
        for d in range(0, int(odep.max()) if k else 0):
            lv = np.flatnonzero(odep == d)
            s, t = [], []
            for u in lv.tolist():
                for v in adj[u]:
                    if v != opar[u]:
                        s.append(u)
                        t.append(v)
            if s:
                s = np.array(s)
                t = np.array(t)
                self.engine.send(Batch.make(nodes[s], nodes[t], Channel.GLOBAL_CONTACT, 1 + self.pw2, "flood", nodes[croot[s]]))
        newpar = np.where(opar >= 0, nodes[np.maximum(opar, 0)], -1)
        self.parent[nodes] = newpar
        self.root[nodes] = roots_of(self.parent)[nodes]

    # checks --------------------------------------------------------------
    def _check_satisfactory(self) -> None:
        parent = self.parent
        depth = tree_depths(parent)
        deg = np.bincount(parent[parent >= 0], minlength=self.n) + (parent >= 0)
        bound = self.c_sat * self.logn
        self.result.max_sat_degree = max(self.result.max_sat_degree, int(deg.max()))
        self.result.max_sat_depth = max(self.result.max_sat_depth, int(depth.max()))
        if deg.max() > bound or depth.max() > bound:
            raise InvariantViolated(
                f"cluster tree not satisfactory: degree {int(deg.max())}, depth {int(depth.max())}, bound {bound}"
            )
        if not np.array_equal(roots_of(parent), self.root):
            raise InvariantViolated("root labels inconsistent with parent pointers")

    def run_phase(self) -> GroupRecord:
        eng = self.engine
        before = self.cluster_count()
        eng.begin_phase(before)
        r0 = eng.ledger.rounds
        y_before = effective_degree(self.graph, self.root)
        res, color = self.hybrid_sample()
        rec = self.hybrid_group(res, color)
        if self.check:
            diam = check_cluster_forest(rec.cluster_edges)
            self.result.forest_checks += 1
            self.result.max_forest_diameter = max(self.result.max_forest_diameter, diam)
        self.hybrid_merge(rec)
        eng.end_phase()
        if self.check:
            self._check_satisfactory()
            y_after = effective_degree(self.graph, self.root)
            k = rec.arrivals
            many = np.flatnonzero(k >= 2)
            self.result.contraction_checks += len(many)
            bad = y_after[many] > y_before[many] - k[many] // 2
            if bad.any():
                v = int(many[np.argmax(bad)])
                raise InvariantViolated(f"effective degree of {v} did not contract")
        if eng.ledger.rounds - r0 > self.round_cap:
            self.result.round_budget_hits += 1
        self.phase += 1
        return rec

    # post-processing -----------------------------------------------------
    def post_process(self) -> RootedTree:
        """Deterministic conversion of the final satisfactory tree."""
        n = self.n
        r = int(self.root[0])
        if n == 1:
            return RootedTree(1, 0, [-1])
        nodes = np.arange(n)
        bt = child_sibling(self.parent)
        ch = np.flatnonzero(self.parent >= 0)
        prev = bt.parent[ch]
        nxt = np.where(bt.right[ch] >= 0, bt.right[ch], -1)
        self._send_tree(self.parent[ch], ch, 2, "pp:child-sibling", np.stack([prev, nxt], axis=1), prefer_local=True)
        cyc = euler_tour(bt)
        src, dst = [], []
        for arr in (bt.parent, bt.left, bt.right):
            ok = arr >= 0
            src.append(np.flatnonzero(ok))
            dst.append(arr[ok])
        self._send_tree(np.concatenate(src), np.concatenate(dst), 2, "pp:euler", np.concatenate(src), prefer_local=True)
        K = cyc.K
        owner = cyc.owner
        # every copy finds the next first-copy along the cycle (pointer chasing)
        member = np.zeros(K, dtype=bool)
        member[cyc.first] = True
        ptr = cyc.succ.copy()
        pending = ~member[ptr]
        while pending.any():
            s = np.flatnonzero(pending)
            self._send_virtual(owner, s, ptr[s], ptr[s], "pp:chase")
            self._send_virtual(owner, ptr[s], s, ptr[ptr[s]], "pp:chase")
            ptr = np.where(pending, ptr[ptr], ptr)
            pending = ~member[ptr]
        # each first copy greets the next one so both ends of the link know it
        self._send_virtual(owner, cyc.first, ptr[cyc.first], cyc.first, "pp:greet")
        # halving broadcast over the first copies (doubling on that list first)
        vroot = int(cyc.first[r])
        jr = pointer_jump_tree(cyc.succ, vroot, member, cyc.first[owner])
        reps = cyc.first
        nxt_rep = ptr[reps]
        Lr = n.bit_length() - 1
        fwd = nxt_rep.copy()
        at_rep = np.full(K, -1, dtype=np.int64)
        at_rep[reps] = np.arange(n)
        fwd = at_rep[fwd]
        bwd = np.empty(n, dtype=np.int64)
        bwd[fwd] = np.arange(n)
        for _ in range(Lr):
            s = np.concatenate([np.arange(n), np.arange(n)])
            d = np.concatenate([bwd, fwd])
            c = np.concatenate([fwd, bwd])
            self._send_tree(s[s != d], d[s != d], 2, "pp:double2", c[s != d])
            fwd, bwd = fwd[fwd], bwd[bwd]
        vdepth = tree_depths(jr.parent)
        rep_nodes = reps
        for d in range(1, int(vdepth[rep_nodes].max()) + 1):
            lv = rep_nodes[vdepth[rep_nodes] == d]
            self._send_virtual(owner, jr.parent[lv], lv, jr.parent[lv], "pp:broadcast")
        edges = merge_virtual(owner, jr.parent, n)
        bpar, bdep = bfs_parents(n, edges, [r])
        adj = defaultdict(list)
        for a, b in edges:
            adj[a].append(b)
            adj[b].append(a)
        for d in range(0, int(bdep.max())):
            lv = np.flatnonzero(bdep == d)
            s = [u for u in lv.tolist() for v in adj[u] if v != bpar[u]]
            t = [v for u in lv.tolist() for v in adj[u] if v != bpar[u]]
            if s:
                self._send_tree(s, t, 1, "pp:bfs", s)
        return RootedTree(n, r, bpar.tolist())

    def _send_virtual(self, owner, s, d, c, tag):
        s = np.asarray(s)
        d = np.asarray(d)
        os_, od = owner[s], owner[d]
        keep = os_ != od
        if keep.any():
            self.engine.send(Batch.make(os_[keep], od[keep], Channel.GLOBAL_CONTACT, 2, tag, owner[np.asarray(c)[keep]]))
        else:
            self.engine.idle_round()

    # driver --------------------------------------------------------------
    def run(self, max_phases: int | None = None, c_depth: float = 2.0) -> HybridResult:
        res = self.result
        if max_phases is None:
            max_phases = 40 * self.logn
        try:
            while self.cluster_count() > 1:
                if self.phase >= max_phases:
                    res.success = False
                    res.failure = "phase budget exceeded"
                    res.phases = self.phase
                    raise PhaseBudgetExceeded(f"HybridWFT did not finish in {max_phases} phases", res)
                self.run_phase()
            res.phases = self.phase
            r0 = self.engine.ledger.rounds
            res.tree = self.post_process()
            res.post_rounds = self.engine.ledger.rounds - r0
        except (InvariantViolated, IterationBudgetExceeded) as e:
            res.success = False
            res.failure = str(e)
            res.invariant_failures += 1
            res.phases = self.phase
            return res
        led = self.engine.ledger
        res.phase_rounds = list(led.phase_rounds)
        res.phase_messages = list(led.phase_messages)
        if led.violations:
            res.success = False
            res.failure = "capacity violations"
        elif res.round_budget_hits:
            res.success = False
            res.failure = f"{res.round_budget_hits} phases over the round cap of {self.round_cap}"
        rep = check_wft(res.tree, self.n, 6, c_depth)
        res.wft_report = rep
        if not rep.passed:
            res.success = False
            res.failure = str(rep)
        return res


def run_hybrid_wft(graph: Graph, config: ModelConfig | None = None, seed: int = 0, **kw) -> HybridResult:
    c_depth = kw.pop("c_depth", 2.0)
    max_phases = kw.pop("max_phases", None)
    return HybridWFT(graph, config, seed, **kw).run(max_phases, c_depth)
