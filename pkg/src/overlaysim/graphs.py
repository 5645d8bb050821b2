"""Input graphs, rooted trees and ground-truth checkers."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import log2_ceil


class InvalidGraph(ValueError):
    pass


class InvalidParams(ValueError):
    pass


class TooLarge(ValueError):
    pass


class Graph:
    """Immutable simple undirected graph on nodes 0..n-1."""

    __slots__ = ("n", "adj", "_us", "_vs", "_deg", "_indptr", "_indices")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]]):
        if n < 0:
            raise InvalidGraph("negative node count")
        nbrs: list[set] = [set() for _ in range(n)]
        count = 0
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidGraph(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise InvalidGraph(f"self-loop at {u}")
            if v in nbrs[u]:
                raise InvalidGraph(f"multi-edge {u}-{v}")
            nbrs[u].add(v)
            nbrs[v].add(u)
            count += 1
        self.n = n
        self.adj: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(s)) for s in nbrs)
        us = [u for u in range(n) for v in self.adj[u] if u < v]
        vs = [v for u in range(n) for v in self.adj[u] if u < v]
        self._us = np.array(us, dtype=np.int64)
        self._vs = np.array(vs, dtype=np.int64)
        self._deg = np.array([len(a) for a in self.adj], dtype=np.int64)
        self._indptr = np.concatenate([[0], np.cumsum(self._deg)]).astype(np.int64)
        self._indices = np.array([v for a in self.adj for v in a], dtype=np.int64)
        for arr in (self._us, self._vs, self._deg, self._indptr, self._indices):
            arr.setflags(write=False)

    @property
    def m(self) -> int:
        return len(self._us)

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self._us.tolist(), self._vs.tolist()))

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(u, v) arrays with u < v, sorted lexicographically."""
        return self._us, self._vs

    @property
    def degrees(self) -> np.ndarray:
        return self._deg

    def degree(self, v: int) -> int:
        return int(self._deg[v])

    @property
    def max_degree(self) -> int:
        return int(self._deg.max()) if self.n else 0

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        return self._indptr, self._indices

    def has_edge(self, u: int, v: int) -> bool:
        a = self.adj[u]
        i = np.searchsorted(a, v)
        return i < len(a) and a[i] == v

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        return len(_bfs_order(self.adj, 0)) == self.n

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.n == other.n and self.adj == other.adj

    def __hash__(self) -> int:
        return hash((self.n, self.adj))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


def _bfs_order(adj, root: int) -> list[int]:
    seen = {root}
    order = [root]
    q = deque([root])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                order.append(v)
                q.append(v)
    return order


class RootedTree:
    """Rooted tree given by a parent array (parent[root] == -1)."""

    def __init__(self, n: int, root: int, parent: Sequence[int]):
        if len(parent) != n:
            raise InvalidGraph("parent array length != n")
        self.n = n
        self.root = int(root)
        self.parent = [int(p) for p in parent]
        kids: list[list[int]] = [[] for _ in range(n)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                kids[p].append(v)
        self.children = kids

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], root: int) -> "RootedTree":
        g = Graph(n, edges)
        return bfs_tree(g.adj, root, n)

    def edges(self) -> list[tuple[int, int]]:
        return [(min(v, p), max(v, p)) for v, p in enumerate(self.parent) if p >= 0]

    def degree(self, v: int) -> int:
        return len(self.children[v]) + (1 if self.parent[v] >= 0 else 0)

    @property
    def max_degree(self) -> int:
        return max((self.degree(v) for v in range(self.n)), default=0)

    def depths(self) -> list[int]:
        """Depth of every node; -1 for nodes unreachable from the root."""
        d = [-1] * self.n
        if not self.n:
            return d
        d[self.root] = 0
        q = deque([self.root])
        while q:
            u = q.popleft()
            for c in self.children[u]:
                if d[c] < 0:
                    d[c] = d[u] + 1
                    q.append(c)
        return d

    @property
    def depth(self) -> int:
        return max(self.depths(), default=0)

    def is_valid(self) -> bool:
        """Spanning, acyclic and rooted at ``root``."""
        if self.n == 0:
            return True
        if not (0 <= self.root < self.n) or self.parent[self.root] != -1:
            return False
        if sum(1 for p in self.parent if p < 0) != 1:
            return False
        return all(x >= 0 for x in self.depths())

    def __repr__(self) -> str:
        return f"RootedTree(n={self.n}, root={self.root})"


def bfs_tree(adj, root: int, n: int | None = None) -> RootedTree:
    n = len(adj) if n is None else n
    parent = [-1] * n
    seen = [False] * n
    seen[root] = True
    q = deque([root])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                parent[v] = u
                q.append(v)
    return RootedTree(n, root, parent)


# generators -----------------------------------------------------------------

FAMILIES = (
    "line", "cycle", "star", "complete", "random_connected",
    "caterpillar", "barbell", "random_regular", "binary_tree",
)


def _random_tree_edges(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform labelled spanning tree via a random Pruefer sequence."""
    if n <= 1:
        return []
    if n == 2:
        return [(0, 1)]
    seq = rng.integers(0, n, size=n - 2).tolist()
    degree = [1] * n
    for x in seq:
        degree[x] += 1
    import heapq

    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for x in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, x))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, x)
    u, v = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((u, v))
    return edges


def generate(family: str, n: int, params: dict | None = None, seed: int = 0) -> Graph:
    params = dict(params or {})
    if n < 1:
        raise InvalidParams("n must be >= 1")
    rng = np.random.default_rng(seed)
    if family == "line":
        return Graph(n, [(i, i + 1) for i in range(n - 1)])
    if family == "cycle":
        if n < 3:
            return Graph(n, [(i, i + 1) for i in range(n - 1)])
        return Graph(n, [(i, (i + 1) % n) for i in range(n)])
    if family == "star":
        return Graph(n, [(0, i) for i in range(1, n)])
    if family == "complete":
        return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
    if family == "binary_tree":
        return Graph(n, [((i - 1) // 2, i) for i in range(1, n)])
    if family == "caterpillar":
        spine = int(params.get("spine", max(1, n // 2)))
        if not 1 <= spine <= n:
            raise InvalidParams("spine must be in [1, n]")
        edges = [(i, i + 1) for i in range(spine - 1)]
        edges += [(i % spine, i) for i in range(spine, n)]
        return Graph(n, edges)
    if family == "barbell":
        if n < 2:
            return Graph(n, [])
        a = n // 2
        edges = [(i, j) for i in range(a) for j in range(i + 1, a)]
        edges += [(i, j) for i in range(a, n) for j in range(i + 1, n)]
        edges.append((a - 1, a))
        return Graph(n, edges)
    if family == "random_connected":
        p = params.get("p")
        if p is None:
            p = min(1.0, 2 * math.log(n) / n) if n > 1 else 0.0
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise InvalidParams("p must be in [0, 1]")
        edges = {(min(u, v), max(u, v)) for u, v in _random_tree_edges(n, rng)}
        if p > 0 and n > 1:
            iu, ju = np.triu_indices(n, k=1)
            keep = rng.random(len(iu)) < p
            edges.update(zip(iu[keep].tolist(), ju[keep].tolist()))
        return Graph(n, sorted(edges))
    if family == "random_regular":
        d = int(params.get("d", 3))
        if d < 0 or d >= n or (n * d) % 2:
            raise InvalidParams("random_regular needs 0 <= d < n and n*d even")
        import networkx as nx

        for _ in range(1000):
            s = int(rng.integers(0, 2**31 - 1))
            g = nx.random_regular_graph(d, n, seed=s)
            graph = Graph(n, g.edges())
            if graph.is_connected() or d == 0:
                return graph
        raise InvalidParams("could not sample a connected regular graph")
    raise InvalidParams(f"unknown family {family!r}")


# edge list files ------------------------------------------------------------

def save_edgelist(graph: Graph, path) -> None:
    lines = [f"{graph.n} {graph.m}"] + [f"{u} {v}" for u, v in graph.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_edgelist(path, require_connected: bool = True) -> Graph:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise InvalidGraph("missing 'n m' header")
    n, m = int(rows[0][0]), int(rows[0][1])
    edges = []
    for r in rows[1:]:
        if len(r) != 2:
            raise InvalidGraph(f"bad edge line {' '.join(r)!r}")
        edges.append((int(r[0]), int(r[1])))
    if len(edges) != m:
        raise InvalidGraph(f"header says {m} edges, found {len(edges)}")
    g = Graph(n, edges)
    if require_connected and not g.is_connected():
        raise InvalidGraph("input graph is disconnected")
    return g


# checkers -------------------------------------------------------------------

def conductance_exact(graph: Graph) -> float:
    """Minimum cut/min-volume ratio over all proper nonempty subsets."""
    n = graph.n
    if n > 20:
        raise TooLarge("exact conductance needs n <= 20")
    if n < 2:
        raise InvalidParams("conductance needs n >= 2")
    if not graph.is_connected():
        return 0.0
    us, vs = graph.edge_arrays()
    deg = graph.degrees
    vol_total = int(deg.sum())
    best = math.inf
    # node n-1 is kept outside S; the complement covers the rest by symmetry
    chunk = 1 << 16
    total = 1 << (n - 1)
    bits = np.arange(n - 1, dtype=np.int64)
    for start in range(1, total, chunk):
        masks = np.arange(start, min(total, start + chunk), dtype=np.int64)
        member = ((masks[:, None] >> bits) & 1).astype(bool)
        member = np.hstack([member, np.zeros((len(masks), 1), dtype=bool)])
        cut = (member[:, us] != member[:, vs]).sum(axis=1)
        vol = member @ deg
        denom = np.minimum(vol, vol_total - vol)
        ratio = cut / denom
        best = min(best, float(ratio.min()))
    return best


@dataclass(frozen=True)
class TreeReport:
    passed: bool
    maxdeg: int
    depth: int
    spanning: bool
    acyclic: bool

    def __bool__(self) -> bool:
        return self.passed

    def __str__(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} maxdeg={self.maxdeg} depth={self.depth}"


def _tree_shape(tree: RootedTree, n: int) -> tuple[int, int, bool, bool]:
    if tree.n != n:
        return tree.max_degree, tree.depth, False, False
    roots = [v for v in range(n) if tree.parent[v] < 0]
    depths = tree.depths() if n else []
    spanning = all(d >= 0 for d in depths)
    acyclic = len(roots) == 1 and roots[0] == tree.root and spanning if n else True
    return tree.max_degree, max(depths, default=0), spanning, acyclic


def check_wft(tree: RootedTree, n: int, c_deg: int = 6, c_depth: float = 2.0) -> TreeReport:
    maxdeg, depth, spanning, acyclic = _tree_shape(tree, n)
    ok = spanning and acyclic and maxdeg <= c_deg and depth <= c_depth * log2_ceil(max(n, 1))
    return TreeReport(ok, maxdeg, depth, spanning, acyclic)


def check_satisfactory(tree: RootedTree, n: int, c: float) -> TreeReport:
    maxdeg, depth, spanning, acyclic = _tree_shape(tree, n)
    bound = c * log2_ceil(max(n, 1))
    ok = spanning and acyclic and maxdeg <= bound and depth <= bound
    return TreeReport(ok, maxdeg, depth, spanning, acyclic)


def is_star(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    es = {(min(u, v), max(u, v)) for u, v in edges}
    if n <= 1:
        return not es
    if len(es) != n - 1:
        return False
    common = None
    for u, v in es:
        common = {u, v} if common is None else common & {u, v}
        if not common:
            return False
    return True
