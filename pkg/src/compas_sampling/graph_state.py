"""Mutable sample state: the sample graph, the staging buffer and the partition."""

from __future__ import annotations

import heapq
from collections import defaultdict


class CapacityError(RuntimeError):
    pass


class SampleGraph:
    """Simple undirected graph with an optional node capacity.

    Nodes are also indexed by degree so that the eviction rule can find the
    lowest-degree nodes without scanning the whole sample.
    """

    def __init__(self, capacity: int | None = None):
        self.capacity = capacity
        self.adj: dict[int, set[int]] = {}
        self.n_edges = 0
        self._by_degree: dict[int, set[int]] = defaultdict(set)

    def __len__(self) -> int:
        return len(self.adj)

    def __contains__(self, x) -> bool:
        return x in self.adj

    @property
    def full(self) -> bool:
        return self.capacity is not None and len(self.adj) >= self.capacity

    def nodes(self):
        return self.adj.keys()

    def neighbors(self, x) -> set[int]:
        return self.adj[x]

    def degree(self, x) -> int:
        return len(self.adj[x])

    def has_edge(self, u, v) -> bool:
        nb = self.adj.get(u)
        return nb is not None and v in nb

    def edges(self):
        for u, nb in self.adj.items():
            for v in nb:
                if u < v:
                    yield u, v

    def _rebucket(self, x, old: int, new: int) -> None:
        bucket = self._by_degree[old]
        bucket.discard(x)
        if not bucket:
            del self._by_degree[old]
        self._by_degree[new].add(x)

    def add_node(self, x) -> None:
        if x in self.adj:
            raise KeyError(f"node {x} already in sample")
        if self.full:
            raise CapacityError(f"sample at capacity {self.capacity}")
        self.adj[x] = set()
        self._by_degree[0].add(x)

    def add_edge(self, u, v) -> bool:
        """Insert edge (u, v); return False if it was already present."""
        if u == v:
            raise ValueError("self-loops are not allowed")
        if u not in self.adj or v not in self.adj:
            raise KeyError(f"edge ({u}, {v}) has an endpoint outside the sample")
        nu = self.adj[u]
        if v in nu:
            return False
        self._rebucket(u, len(nu), len(nu) + 1)
        nv = self.adj[v]
        self._rebucket(v, len(nv), len(nv) + 1)
        nu.add(v)
        nv.add(u)
        self.n_edges += 1
        return True

    def remove_node(self, x) -> list[tuple[int, int]]:
        """Delete x and its edges; return the removed edges as (x, neighbor)."""
        nb = self.adj.pop(x)
        self._by_degree[len(nb)].discard(x)
        if not self._by_degree[len(nb)]:
            del self._by_degree[len(nb)]
        for y in nb:
            ny = self.adj[y]
            self._rebucket(y, len(ny), len(ny) - 1)
            ny.discard(x)
        self.n_edges -= len(nb)
        return [(x, y) for y in nb]

    def triangles(self, x) -> int:
        nb = self.adj[x]
        adj = self.adj
        return sum(len(nb & adj[y]) for y in nb) // 2

    def clustering_coefficient(self, x) -> float:
        d = len(self.adj[x])
        if d < 2:
            return 0.0
        return 2.0 * self.triangles(x) / (d * (d - 1))

    def min_degree(self) -> int:
        return min(self._by_degree)

    def nodes_with_degree(self, d: int) -> set[int]:
        return self._by_degree.get(d, set())

    def copy(self) -> "SampleGraph":
        g = SampleGraph(self.capacity)
        g.adj = {x: set(nb) for x, nb in self.adj.items()}
        g.n_edges = self.n_edges
        for d, bucket in self._by_degree.items():
            g._by_degree[d] = set(bucket)
        return g

    @classmethod
    def from_edges(cls, edges, capacity: int | None = None, nodes=()) -> "SampleGraph":
        g = cls(capacity)
        for x in nodes:
            if x not in g:
                g.add_node(x)
        for u, v in edges:
            if u == v:
                continue
            if u not in g:
                g.add_node(u)
            if v not in g:
                g.add_node(v)
            g.add_edge(u, v)
        return g


class Buffer:
    """Staging area: per-node occurrence count and most recent parent."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("buffer capacity must be >= 1")
        self.capacity = capacity
        self.count: dict[int, int] = {}
        self.parent: dict[int, int] = {}
        # (count, node) entries; stale ones are skipped lazily
        self._heap: list[tuple[int, int]] = []

    def __len__(self) -> int:
        return len(self.count)

    def __contains__(self, x) -> bool:
        return x in self.count

    @property
    def full(self) -> bool:
        return len(self.count) >= self.capacity

    def insert(self, x, parent) -> None:
        if x in self.count:
            raise KeyError(f"node {x} already buffered")
        if self.full:
            raise CapacityError("buffer full; evict before inserting")
        self.count[x] = 1
        self.parent[x] = parent
        heapq.heappush(self._heap, (1, x))

    def touch(self, x) -> None:
        if x not in self.count:
            raise KeyError(f"node {x} is not buffered")
        self.count[x] += 1
        heapq.heappush(self._heap, (self.count[x], x))

    def set_parent(self, x, parent) -> None:
        """Record ``parent`` as the node x arrived with most recently."""
        if x not in self.count:
            raise KeyError(f"node {x} is not buffered")
        self.parent[x] = parent

    def remove(self, x) -> tuple[int, int]:
        """Drop x, returning its (count, parent)."""
        return self.count.pop(x), self.parent.pop(x)

    def pick_promotable(self, graph: SampleGraph, rng, strategy: str = "proportional"):
        """Draw a buffered node whose parent is sampled, weighted by its count.

        ``strategy="inverse"`` weights by 1/count instead. Returns None when no
        buffered node has its parent in the sample.
        """
        eligible = [x for x, p in self.parent.items() if p in graph.adj]
        if not eligible:
            return None
        if len(eligible) == 1:
            return eligible[0]
        if strategy == "proportional":
            weights = [self.count[x] for x in eligible]
        elif strategy == "inverse":
            weights = [1.0 / self.count[x] for x in eligible]
        else:
            raise ValueError(f"unknown promotion strategy {strategy!r}")
        r = rng.random() * sum(weights)
        acc = 0.0
        for x, w in zip(eligible, weights):
            acc += w
            if r < acc:
                return x
        return eligible[-1]

    def min_count_node(self):
        """Buffered node with the lowest count (ties: smallest id)."""
        heap, count = self._heap, self.count
        while heap:
            c, x = heap[0]
            if count.get(x) == c:
                return x
            heapq.heappop(heap)
        raise ValueError("buffer is empty")


class Partition:
    """Community assignment with per-community aggregates.

    ``internal[c]`` is m_c (edges with both ends in c), ``total_degree[c]`` is
    D_c, and ``n_edges`` mirrors |E| of the graph the partition describes.
    Running sums of m_c and D_c**2 give the modularity in O(1).
    """

    def __init__(self):
        self.comm: dict[int, int] = {}
        self.members: dict[int, set[int]] = {}
        self.internal: dict[int, int] = {}
        self.total_degree: dict[int, int] = {}
        self.n_edges = 0
        self.sum_internal = 0
        self.sum_degree_sq = 0
        self._next_id = 0

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, x) -> bool:
        return x in self.comm

    def __getitem__(self, x) -> int:
        return self.comm[x]

    def communities(self) -> list[set[int]]:
        return [set(m) for _, m in sorted(self.members.items())]

    def new_id(self) -> int:
        cid = self._next_id
        self._next_id += 1
        return cid

    def _ensure(self, cid) -> None:
        if cid not in self.members:
            self.members[cid] = set()
            self.internal[cid] = 0
            self.total_degree[cid] = 0
            if cid >= self._next_id:
                self._next_id = cid + 1

    def _bump(self, cid, d_internal: int, d_degree: int) -> None:
        if d_internal:
            self.internal[cid] += d_internal
            self.sum_internal += d_internal
        if d_degree:
            old = self.total_degree[cid]
            new = old + d_degree
            self.total_degree[cid] = new
            self.sum_degree_sq += new * new - old * old

    def _drop_if_empty(self, cid) -> None:
        if not self.members[cid]:
            self.sum_degree_sq -= self.total_degree[cid] ** 2
            self.sum_internal -= self.internal[cid]
            del self.members[cid], self.internal[cid], self.total_degree[cid]

    @classmethod
    def from_assignment(cls, graph: SampleGraph, assignment: dict) -> "Partition":
        """Build a partition over every node of ``graph`` from node -> label."""
        part = cls()
        relabel = {}
        for x in sorted(graph.nodes()):
            label = assignment[x]
            if label not in relabel:
                relabel[label] = part.new_id()
                part._ensure(relabel[label])
            cid = relabel[label]
            part.comm[x] = cid
            part.members[cid].add(x)
            part._bump(cid, 0, graph.degree(x))
        for u, v in graph.edges():
            if part.comm[u] == part.comm[v]:
                part._bump(part.comm[u], 1, 0)
        part.n_edges = graph.n_edges
        return part

    # -- graph mutations mirrored into the aggregates ---------------------

    def add_node(self, x, cid=None) -> int:
        """Place a degree-0 node into ``cid`` (a fresh community if None)."""
        if x in self.comm:
            raise KeyError(f"node {x} already assigned")
        if cid is None:
            cid = self.new_id()
        self._ensure(cid)
        self.comm[x] = cid
        self.members[cid].add(x)
        return cid

    def edge_added(self, u, v) -> None:
        cu, cv = self.comm[u], self.comm[v]
        self.n_edges += 1
        if cu == cv:
            self._bump(cu, 1, 2)
        else:
            self._bump(cu, 0, 1)
            self._bump(cv, 0, 1)

    def node_removed(self, x, former_neighbors) -> int:
        """Account for x leaving the graph; return its old community."""
        cx = self.comm.pop(x)
        d = 0
        for y in former_neighbors:
            d += 1
            cy = self.comm[y]
            self._bump(cy, -1 if cy == cx else 0, -1)
        self._bump(cx, 0, -d)
        self.n_edges -= d
        self.members[cx].discard(x)
        self._drop_if_empty(cx)
        return cx

    def move(self, graph: SampleGraph, nodes, target) -> None:
        """Reassign every node of ``nodes`` to community ``target``."""
        block = set(nodes)
        self._ensure(target)
        comm = self.comm
        adj = graph.adj
        # accumulate per-community deltas first; one _bump per community
        d_int: dict[int, int] = defaultdict(int)
        d_deg: dict[int, int] = defaultdict(int)
        for s in block:
            src = comm[s]
            nb = adj[s]
            d_deg[src] -= len(nb)
            d_deg[target] += len(nb)
            for y in nb:
                cy = comm[y]
                if y in block:
                    if s < y:
                        if src == cy:
                            d_int[src] -= 1
                        d_int[target] += 1
                    continue
                if cy == src:
                    d_int[src] -= 1
                if cy == target:
                    d_int[target] += 1
        for c in d_int.keys() | d_deg.keys():
            self._bump(c, d_int.get(c, 0), d_deg.get(c, 0))
        sources = set()
        for s in block:
            src = comm[s]
            sources.add(src)
            self.members[src].discard(s)
            self.members[target].add(s)
            comm[s] = target
        for src in sources:
            if src != target:
                self._drop_if_empty(src)

    def detach(self, graph: SampleGraph, nodes) -> int:
        cid = self.new_id()
        self.move(graph, nodes, cid)
        return cid

    # -- derived quantities ------------------------------------------------

    def modularity(self) -> float:
        M = self.n_edges
        if M == 0:
            raise ValueError("modularity is undefined for a graph without edges")
        return self.sum_internal / M - self.sum_degree_sq / (4.0 * M * M)

    def as_dict(self) -> dict[int, int]:
        return dict(self.comm)

    def copy(self) -> "Partition":
        p = Partition()
        p.comm = dict(self.comm)
        p.members = {c: set(m) for c, m in self.members.items()}
        p.internal = dict(self.internal)
        p.total_degree = dict(self.total_degree)
        p.n_edges = self.n_edges
        p.sum_internal = self.sum_internal
        p.sum_degree_sq = self.sum_degree_sq
        p._next_id = self._next_id
        return p

    def reconcile(self, graph: SampleGraph) -> list[str]:
        """Compare every aggregate with a from-scratch recount; list mismatches."""
        problems = []
        if set(self.comm) != set(graph.nodes()):
            problems.append("partition does not cover the sample node set exactly")
            return problems
        m = defaultdict(int)
        D = defaultdict(int)
        members = defaultdict(set)
        for x, c in self.comm.items():
            members[c].add(x)
            D[c] += graph.degree(x)
        inter = 0
        for u, v in graph.edges():
            if self.comm[u] == self.comm[v]:
                m[self.comm[u]] += 1
            else:
                inter += 1
        if set(members) != set(self.members):
            problems.append("community id sets differ")
        for c in members:
            if self.members.get(c) != members[c]:
                problems.append(f"members of {c} differ")
            if self.internal.get(c) != m[c]:
                problems.append(f"m_c of {c}: {self.internal.get(c)} != {m[c]}")
            if self.total_degree.get(c) != D[c]:
                problems.append(f"D_c of {c}: {self.total_degree.get(c)} != {D[c]}")
        if self.n_edges != graph.n_edges:
            problems.append(f"M: {self.n_edges} != {graph.n_edges}")
        if sum(m.values()) + inter != graph.n_edges:
            problems.append("internal plus inter-community edges do not sum to M")
        if self.sum_internal != sum(m.values()):
            problems.append("running sum of m_c drifted")
        if self.sum_degree_sq != sum(v * v for v in D.values()):
            problems.append("running sum of D_c^2 drifted")
        return problems
