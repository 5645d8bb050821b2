"""Tree restructuring: child-sibling, Euler tour, pointer jumping, virtual
node merging, BFS re-rooting and the randomized cycle-to-tree procedure.

All routines work on parent arrays (``-1`` at roots) and may act on a forest
at once, which is how the protocol drives them: every merged cluster is
restructured in the same rounds.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import SimulationError
from .graphs import RootedTree


class IterationBudgetExceeded(SimulationError):
    pass


@dataclass
class BinaryTree:
    """Child-sibling form: ``left`` is the first child, ``right`` the next sibling."""

    parent: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def n(self) -> int:
        return len(self.parent)

    def degree(self) -> np.ndarray:
        return (self.parent >= 0).astype(int) + (self.left >= 0) + (self.right >= 0)


def child_sibling(parent, key=None) -> BinaryTree:
    """Each node keeps its first child; every child links to its next sibling.

    Children are ordered by ``key`` (default: node id).  Returns the binary
    tree in which the sibling link is a child edge.
    """
    parent = np.asarray(parent, dtype=np.int64)
    n = len(parent)
    key = np.arange(n) if key is None else np.asarray(key)
    kids = np.flatnonzero(parent >= 0)
    order = kids[np.lexsort((key[kids], parent[kids]))]
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)
    newpar = parent.copy()
    if len(order):
        par = parent[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = par[1:] != par[:-1]
        left[par[first]] = order[first]
        nxt = np.flatnonzero(~first)
        right[order[nxt - 1]] = order[nxt]
        newpar[order[nxt]] = order[nxt - 1]
    return BinaryTree(newpar, left, right)


@dataclass
class VirtualCycle:
    """Virtual nodes of an Euler tour: copy j of ``owner`` is the arrival
    at the owner from its j-th tree neighbour (neighbours ordered parent,
    left, right).  ``succ``/``pred`` may describe several disjoint cycles."""

    owner: np.ndarray
    copy: np.ndarray
    succ: np.ndarray
    pred: np.ndarray
    first: np.ndarray  # per owner: index of its copy 0

    @property
    def K(self) -> int:
        return len(self.owner)


def euler_tour(tree: BinaryTree) -> VirtualCycle:
    n = tree.n
    nb = np.stack([tree.parent, tree.left, tree.right], axis=1)
    # compact each row so existing neighbours come first, keeping order
    present = nb >= 0
    rank = np.cumsum(present, axis=1) - 1
    deg = present.sum(axis=1)
    nbrs = np.full((n, 3), -1, dtype=np.int64)
    rows, cols = np.nonzero(present)
    nbrs[rows, rank[rows, cols]] = nb[rows, cols]
    ncopies = np.maximum(deg, 1)
    first = np.concatenate([[0], np.cumsum(ncopies)[:-1]]).astype(np.int64)
    K = int(ncopies.sum())
    owner = np.repeat(np.arange(n, dtype=np.int64), ncopies)
    copy = np.arange(K, dtype=np.int64) - first[owner]
    succ = np.arange(K, dtype=np.int64)  # isolated nodes: self-cycle
    # position of v inside u's neighbour row, for every (v, slot j) pair
    pos = np.full((n, 3), -1, dtype=np.int64)
    for j in range(3):
        u = nbrs[:, j]
        ok = u >= 0
        vs = np.flatnonzero(ok)
        match = nbrs[u[vs]] == vs[:, None]
        pos[vs, j] = np.argmax(match, axis=1)
    has = deg > 0
    vs = np.repeat(np.flatnonzero(has), deg[has])
    js = np.arange(len(vs)) - np.repeat(np.concatenate([[0], np.cumsum(deg[has])[:-1]]), deg[has])
    nxt = (js + 1) % deg[vs]
    u = nbrs[vs, nxt]
    succ[first[vs] + js] = first[u] + pos[vs, nxt]
    pred = np.empty(K, dtype=np.int64)
    pred[succ] = np.arange(K)
    return VirtualCycle(owner, copy, succ, pred, first)


def cycle_labels(succ: np.ndarray) -> np.ndarray:
    """Smallest member index of the cycle containing each node."""
    K = len(succ)
    lab = np.arange(K, dtype=np.int64)
    cur = np.asarray(succ, dtype=np.int64).copy()
    # min over 2^t successors, doubled until the orbit is covered
    span = 1
    while span < K:
        lab = np.minimum(lab, lab[cur])
        cur = cur[cur]
        span *= 2
    return lab


def cycle_positions(succ: np.ndarray, start: int) -> np.ndarray:
    """Distance from ``start`` along succ for every node on its cycle."""
    K = len(succ)
    pos = np.full(K, -1, dtype=np.int64)
    v, i = start, 0
    while pos[v] < 0:
        pos[v] = i
        v = succ[v]
        i += 1
    return pos


@dataclass
class JumpResult:
    parent: np.ndarray
    depth: int
    iterations: int  # doubling iterations used to build the N_t lists
    messages: int


def _halving_tree(M: int) -> dict:
    """Parent map of the distance-halving broadcast over offsets 1..M.

    The top offset is 2^floor(log2 M).  Offset s = odd * 2^j forwards to
    s - 2^(j-1) and to s + 2^i for the largest i < j with s + 2^i <= M, so
    each offset has at most two children and the depth is floor(log2 M) + 1.
    """
    if M <= 0:
        return {}
    top = 1 << (M.bit_length() - 1)
    par = {top: 0}
    stack = [(top, M.bit_length() - 1)]
    while stack:
        s, j = stack.pop()
        if j == 0:
            continue
        left = s - (1 << (j - 1))
        par[left] = s
        stack.append((left, j - 1))
        for i in range(j - 1, -1, -1):
            if s + (1 << i) <= M:
                par[s + (1 << i)] = s
                stack.append((s + (1 << i), i))
                break
    return par


def pointer_jump_tree(succ, root: int, members=None, attach=None) -> JumpResult:
    """Deterministic doubling broadcast over a single cycle.

    After floor(log2 K) doubling iterations every node knows its
    distance-2^t neighbours N_t in both directions.  The root starts one
    halving broadcast clockwise and one counter-clockwise; each message
    carries the sender's offset, so a receiver knows its own offset and
    forwards along the next smaller N_t that stays on its side.  The kept
    broadcast edges form a binary tree (at most two children per node).
    Messages count the doubling introductions (two per node per iteration)
    plus one per tree edge.

    With a ``members`` mask the broadcast runs over the members only, in
    cycle order (each member finds the next member by the same doubling);
    every non-member is hung below ``attach[v]`` (default: the preceding
    member).  The root must be a member.
    """
    succ = np.asarray(succ, dtype=np.int64)
    K = len(succ)
    parent = np.full(K, -1, dtype=np.int64)
    if K == 1:
        return JumpResult(parent, 0, 0, 0)
    pos = cycle_positions(succ, root)
    if (pos < 0).any():
        raise ValueError("succ is not a single cycle")
    at = np.empty(K, dtype=np.int64)
    at[pos] = np.arange(K)
    L = K.bit_length() - 1
    if members is not None:
        members = np.asarray(members, dtype=bool)
        if not members[root]:
            raise ValueError("root must be a member")
        ordered = at[members[at]]
        if attach is None:
            idx = np.cumsum(members[at]) - 1
            attach = np.empty(K, dtype=np.int64)
            attach[at] = ordered[idx]
        sub = np.empty(len(ordered), dtype=np.int64)
        sub[:-1] = np.arange(1, len(ordered))
        sub[-1] = 0
        inner = pointer_jump_tree(sub, 0)
        kp = inner.parent
        for i, v in enumerate(ordered):
            if kp[i] >= 0:
                parent[v] = ordered[kp[i]]
        nonmem = np.flatnonzero(~members)
        parent[nonmem] = np.asarray(attach)[nonmem]
        d = inner.depth + (1 if len(nonmem) else 0)
        return JumpResult(parent, d, L + inner.iterations, 2 * K * L + inner.messages)
    depth = 0
    for M, sign in ((K // 2, 1), ((K - 1) // 2, -1)):
        par = _halving_tree(M)
        lvl = {0: 0}
        for s, ps in par.items():  # insertion order is parent-before-child
            parent[at[(sign * s) % K]] = at[(sign * ps) % K]
            lvl[s] = lvl[ps] + 1
            depth = max(depth, lvl[s])
    messages = 2 * K * L + (K - 1)
    return JumpResult(parent, depth, L, messages)


def merge_virtual(owner, vparent, n: int) -> list[tuple[int, int]]:
    """Contract virtual copies into their owners; returns the owner edges."""
    owner = np.asarray(owner, dtype=np.int64)
    vparent = np.asarray(vparent, dtype=np.int64)
    ch = np.flatnonzero(vparent >= 0)
    a, b = owner[ch], owner[vparent[ch]]
    keep = a != b
    lo, hi = np.minimum(a[keep], b[keep]), np.maximum(a[keep], b[keep])
    codes = np.unique(lo * n + hi)
    return [(int(c // n), int(c % n)) for c in codes]


def adjacency(n: int, edges) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    for a in adj:
        a.sort()
    return adj


def reroot(n: int, edges, root: int) -> RootedTree:
    """BFS tree of the union graph from ``root`` (neighbours scanned by id)."""
    adj = adjacency(n, edges)
    parent = [-1] * n
    seen = [False] * n
    seen[root] = True
    q = deque([root])
    count = 1
    while q:
        u = q.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                parent[v] = u
                count += 1
                q.append(v)
    if count != n:
        raise SimulationError("re-rooting graph is disconnected")
    return RootedTree(n, root, parent)


def bfs_parents(n: int, edges, roots) -> tuple[np.ndarray, np.ndarray]:
    """Multi-source BFS forest over an edge list; returns (parent, depth).

    Nodes not reachable from any root keep parent -1 and depth -1.
    """
    adj = adjacency(n, edges)
    parent = np.full(n, -1, dtype=np.int64)
    depth = np.full(n, -1, dtype=np.int64)
    q = deque()
    for r in roots:
        depth[r] = 0
        q.append(r)
    while q:
        u = q.popleft()
        for v in adj[u]:
            if depth[v] < 0:
                depth[v] = depth[u] + 1
                parent[v] = u
                q.append(v)
    return parent, depth


def deterministic_wft(parent, root: int, compact: bool = True) -> tuple[RootedTree, dict]:
    """child_sibling -> euler_tour -> pointer_jump_tree -> merge_virtual -> BFS.

    With ``compact`` the broadcast tree is built over each owner's first
    copy (pre-order) and the remaining copies hang below it, so merging
    leaves every owner with at most three neighbours.  Without it the tree
    spans all copies and merged owners can reach degree nine.
    """
    parent = np.asarray(parent, dtype=np.int64)
    n = len(parent)
    if n == 1:
        return RootedTree(1, 0, [-1]), {"K": 1, "virtual_depth": 0, "merged_maxdeg": 0}
    bt = child_sibling(parent)
    cyc = euler_tour(bt)
    vroot = int(cyc.first[root])
    reps = np.zeros(cyc.K, dtype=bool)
    reps[cyc.first] = True
    jr = pointer_jump_tree(cyc.succ, vroot, reps, cyc.first[cyc.owner]) if compact else pointer_jump_tree(cyc.succ, vroot)
    edges = merge_virtual(cyc.owner, jr.parent, n)
    deg = np.zeros(n, dtype=np.int64)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    tree = reroot(n, edges, root)
    return tree, {"K": cyc.K, "virtual_depth": jr.depth, "merged_maxdeg": int(deg.max()), "messages": jr.messages}


# RC2T -----------------------------------------------------------------------

@dataclass
class RC2TResult:
    parent: np.ndarray          # over virtual nodes; -1 at each cycle's root
    iterations: int
    active_counts: list = field(default_factory=list)   # per iteration, nodes in cycles with >= 3 active
    deactivated: list = field(default_factory=list)     # per iteration
    active_iters: np.ndarray | None = None              # per virtual node
    messages: int = 0
    rounds: int = 0

    def survival(self) -> float:
        a = sum(self.active_counts)
        return 1.0 - sum(self.deactivated) / a if a else 1.0


def rc2t(
    succ,
    owner=None,
    gen: np.random.Generator | None = None,
    budget: int | None = None,
    on_round: Callable | None = None,
    coins: Callable | None = None,
) -> RC2TResult:
    """Randomized cycle-to-tree over one or more disjoint cycles.

    Per iteration (two rounds): every active node flips a coin and tells both
    cycle neighbours its coin and the other neighbour's id; a head whose two
    neighbours are tails deactivates, becomes the child of the neighbour with
    the smaller (owner, index), and its neighbours are spliced together by
    its notification.  Cycles down to two active nodes finish directly: the
    larger (owner, index) is root.  Only messages between different owners
    are counted; ``on_round(src_owner, dst_owner, carried_owner)`` receives
    them per round so a driver can deliver them.
    """
    succ = np.asarray(succ, dtype=np.int64).copy()
    K = len(succ)
    owner = np.arange(K, dtype=np.int64) if owner is None else np.asarray(owner, dtype=np.int64)
    gen = gen or np.random.default_rng(0)
    pred = np.empty(K, dtype=np.int64)
    pred[succ] = np.arange(K)
    lab = cycle_labels(succ)
    active = np.ones(K, dtype=bool)
    parent = np.full(K, -1, dtype=np.int64)
    res = RC2TResult(parent, 0, active_iters=np.zeros(K, dtype=np.int64))
    rank = owner * K + np.arange(K)  # tie-break key: (owner, index)
    if budget is None:
        budget = 10 * max(1, (K - 1).bit_length()) + 10

    def emit(src, dst, carried):
        diff = owner[src] != owner[dst]
        res.messages += int(diff.sum())
        res.rounds += 1
        if on_round is not None:
            on_round(owner[src][diff], owner[dst][diff], owner[carried][diff])

    while True:
        counts = np.bincount(lab[active], minlength=K)
        cnt = counts[lab]
        big = active & (cnt >= 3)
        two = active & (cnt == 2)
        if two.any():
            # the smaller-rank node of each 2-cycle joins the larger one
            small = two & (rank < rank[succ])
            parent[small] = succ[small]
            active[small] = False
            emit(np.flatnonzero(small), succ[small], np.flatnonzero(small))
        if not big.any():
            break
        if res.iterations >= budget:
            raise IterationBudgetExceeded(f"RC2T exceeded {budget} iterations")
        idx = np.flatnonzero(big)
        head = np.zeros(K, dtype=bool)
        head[idx] = gen.random(len(idx)) < 0.5 if coins is None else coins(res.iterations, idx)
        # round 1: coin and the other neighbour's id to both neighbours
        emit(np.concatenate([idx, idx]), np.concatenate([succ[idx], pred[idx]]), np.concatenate([pred[idx], succ[idx]]))
        res.active_iters[idx] += 1
        dead = big & head & ~head[succ] & ~head[pred]
        if (dead & dead[succ]).any():
            raise SimulationError("adjacent nodes deactivated together")
        d = np.flatnonzero(dead)
        s, p = succ[d], pred[d]
        par = np.where(rank[p] < rank[s], p, s)
        parent[d] = par
        # round 2: notify both neighbours (new neighbour id); parent learns its child
        emit(np.concatenate([d, d]), np.concatenate([s, p]), np.concatenate([p, s]))
        succ[p] = s
        pred[s] = p
        active[d] = False
        res.active_counts.append(len(idx))
        res.deactivated.append(len(d))
        res.iterations += 1
    return res
