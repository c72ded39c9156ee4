"""Streaming baseline samplers: SN, SE, SBFS and PIES.

These follow the one-line characterisations usually given for them:

* SN keeps a uniform reservoir of nodes and stores an edge only while both
  endpoints sit in the reservoir. Replacing a node drops its stored edges.
* SE keeps a uniform reservoir of edge arrivals (duplicates are separate
  arrivals). Its nodes are the endpoints of the retained edges.
* SBFS runs breadth-first search over a sliding window of the last W edges,
  admitting visited nodes until the node budget is met; a root is drawn at
  random and the search restarts from a fresh random root whenever a
  component is exhausted. After that only edges between admitted nodes are kept.
* PIES takes every edge (and both endpoints) until the node budget is met,
  and afterwards only edges whose endpoints are both sampled. No evictions.

Communities for these samples come from running Louvain on the result.
"""

from __future__ import annotations

import math
import random
from collections import Counter, deque
from dataclasses import asdict, dataclass

from .graph_state import SampleGraph


@dataclass
class BaselineConfig:
    n: int
    seed: int = 0
    window: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("budget must be >= 1")
        if self.window is not None and self.window < 1:
            raise ValueError("window W must be >= 1")


class _Base:
    algorithm = "base"

    def __init__(self, config: BaselineConfig):
        self.config = config
        self.rng = random.Random(config.seed)
        self.graph = SampleGraph()
        self.events = 0

    def run(self, stream):
        for e in stream:
            self.process_event(e)
        return self

    def process_event(self, e) -> None:
        raise NotImplementedError

    def finalize(self) -> SampleGraph:
        return self.graph

    def budget_ok(self) -> bool:
        return len(self.graph) <= self.config.n

    def metadata(self) -> dict:
        return {"algorithm": self.algorithm, "config": asdict(self.config), "events": self.events,
                "n_nodes": len(self.graph), "n_edges": self.graph.n_edges}


class StreamingNodeSampler(_Base):
    algorithm = "sn"

    def __init__(self, config: BaselineConfig):
        super().__init__(config)
        self.seen: set = set()
        self.reservoir: list = []
        self._slot: dict = {}

    def _offer(self, x) -> None:
        self.seen.add(x)
        k = len(self.seen)
        n = self.config.n
        if len(self.reservoir) < n:
            self._slot[x] = len(self.reservoir)
            self.reservoir.append(x)
            self.graph.add_node(x)
            return
        j = self.rng.randrange(k)
        if j < n:
            old = self.reservoir[j]
            del self._slot[old]
            self.graph.remove_node(old)
            self.reservoir[j] = x
            self._slot[x] = j
            self.graph.add_node(x)

    def process_event(self, e) -> None:
        u, v = e[0], e[1]
        self.events += 1
        if u == v:
            return
        for x in (u, v):
            if x not in self.seen:
                self._offer(x)
        if u in self._slot and v in self._slot:
            self.graph.add_edge(u, v)


class StreamingEdgeSampler(_Base):
    """Reservoir over edge arrivals; ``config.n`` is the edge budget."""

    algorithm = "se"

    def __init__(self, config: BaselineConfig):
        super().__init__(config)
        self.reservoir: list = []

    def process_event(self, e) -> None:
        u, v = e[0], e[1]
        self.events += 1
        if u == v:
            return
        item = (u, v, self.events - 1)
        if len(self.reservoir) < self.config.n:
            self.reservoir.append(item)
        else:
            j = self.rng.randrange(self.events)
            if j < self.config.n:
                self.reservoir[j] = item

    def finalize(self) -> SampleGraph:
        self.graph = SampleGraph.from_edges((u, v) for u, v, _ in self.reservoir)
        return self.graph

    def budget_ok(self) -> bool:
        return len(self.reservoir) <= self.config.n


class StreamingBFSSampler(_Base):
    algorithm = "sbfs"

    def __init__(self, config: BaselineConfig):
        super().__init__(config)
        self.window_size = config.window or 10 * config.n
        self.window: deque = deque()
        self._since_search = 0

    def process_event(self, e) -> None:
        u, v = e[0], e[1]
        self.events += 1
        if u == v:
            return
        self.window.append((u, v))
        if len(self.window) > self.window_size:
            self.window.popleft()
        g = self.graph
        if u in g and v in g:
            g.add_edge(u, v)
        self._since_search += 1
        if len(g) < self.config.n and self._since_search >= self.window_size:
            self.search()

    def search(self) -> None:
        """BFS over the current window, admitting nodes until the budget is met."""
        self._since_search = 0
        g = self.graph
        budget = self.config.n
        wadj: dict = {}
        for a, b in self.window:
            wadj.setdefault(a, set()).add(b)
            wadj.setdefault(b, set()).add(a)
        unvisited = sorted(x for x in wadj if x not in g)
        left = set(unvisited)
        while len(g) < budget and left:
            root = self.rng.choice([x for x in unvisited if x in left])
            left.discard(root)
            queue = deque([root])
            self._admit(root, wadj)
            while queue and len(g) < budget:
                x = queue.popleft()
                for y in sorted(wadj[x]):
                    if y in left:
                        left.discard(y)
                        self._admit(y, wadj)
                        queue.append(y)
                        if len(g) >= budget:
                            break
            unvisited = [x for x in unvisited if x in left]

    def _admit(self, x, wadj) -> None:
        g = self.graph
        g.add_node(x)
        for y in wadj[x]:
            if y in g:
                g.add_edge(x, y)

    def finalize(self) -> SampleGraph:
        if len(self.graph) < self.config.n and self.window:
            self.search()
        return self.graph


class PIESSampler(_Base):
    algorithm = "pies"

    def process_event(self, e) -> None:
        u, v = e[0], e[1]
        self.events += 1
        if u == v:
            return
        g = self.graph
        fresh = (u not in g) + (v not in g)
        if fresh == 0:
            g.add_edge(u, v)
        elif len(g) + fresh <= self.config.n:
            for x in (u, v):
                if x not in g:
                    g.add_node(x)
            g.add_edge(u, v)


SAMPLERS = {
    "sn": StreamingNodeSampler,
    "se": StreamingEdgeSampler,
    "sbfs": StreamingBFSSampler,
    "pies": PIESSampler,
}


def se_edge_budget(n_nodes: int) -> int:
    """Edge budget giving SE roughly ``n_nodes`` endpoints on a sparse stream."""
    return max(1, math.ceil(n_nodes / 2))


def make_baseline(name: str, n: int, seed: int = 0, window: int | None = None):
    if name not in SAMPLERS:
        raise ValueError(f"unknown baseline {name!r}")
    budget = se_edge_budget(n) if name == "se" else n
    return SAMPLERS[name](BaselineConfig(budget, seed, window))


def retention_counts(stream, name: str, n: int, seeds) -> Counter:
    """How often each node (SN) or arrival index (SE) survives, over many seeds."""
    hits = Counter()
    for s in seeds:
        smp = SAMPLERS[name](BaselineConfig(n, s)).run(stream)
        if name == "se":
            hits.update(t for _, _, t in smp.reservoir)
        else:
            hits.update(smp.reservoir)
    return hits
