"""Community-preserving streaming sampler (ComPAS)."""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import asdict, dataclass, field

from . import community
from .graph_state import Buffer, Partition, SampleGraph

DEFAULT_ALPHA = 0.4
DEFAULT_BUFFER_FRAC = 0.0075
DEFAULT_SAMPLE_FRAC = 0.4


class ConfigError(ValueError):
    pass


def default_sample_size(n_nodes: int, frac: float = DEFAULT_SAMPLE_FRAC) -> int:
    return max(2, math.ceil(frac * n_nodes))


def default_buffer_size(n: int, frac: float = DEFAULT_BUFFER_FRAC) -> int:
    return max(1, math.ceil(frac * n))


@dataclass
class SamplerConfig:
    n: int
    alpha: float = DEFAULT_ALPHA
    n_d: int | None = None
    seed: int = 0
    initial_algorithm: str = "louvain"
    strict_line12: bool = False
    promotion: str = "proportional"
    track_last_parent: bool = False

    def __post_init__(self):
        if self.n_d is None:
            self.n_d = default_buffer_size(self.n)
        if self.n < 2:
            raise ConfigError("sample size n must be >= 2")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie strictly between 0 and 1")
        if self.n_d < 1:
            raise ConfigError("buffer size n_d must be >= 1")
        if self.initial_algorithm != "louvain":
            raise ConfigError("only Louvain is supported for the initial communities")
        if self.promotion not in ("proportional", "inverse"):
            raise ConfigError(f"unknown promotion strategy {self.promotion!r}")

    @property
    def warmup_threshold(self) -> float:
        return self.alpha * self.n


@dataclass
class RunStats:
    events: int = 0
    transition_event: int | None = None
    duplicates: int = 0
    promotions: int = 0
    drops: int = 0
    aborted_insertions: int = 0
    evictions: int = 0
    community_moves: int = 0
    cases: dict = field(default_factory=lambda: {k: 0 for k in
                                                 ("warmup", "i", "ii", "iii", "iv", "v", "vi")})


class CompasSampler:
    """One sampling run: a sample graph, its buffer and its partition.

    Feed edges with :meth:`process_event` (or :meth:`run`) and collect the
    result with :meth:`finalize`.
    """

    algorithm = "compas"

    def __init__(self, config: SamplerConfig):
        self.config = config
        self.rng = random.Random(config.seed)
        self.graph = SampleGraph(config.n)
        self.buffer = Buffer(config.n_d)
        self.partition: Partition | None = None
        self.phase = "warmup"
        self.t = 0
        self.stats = RunStats()

    # -- dispatch ------------------------------------------------------------

    def process_event(self, e) -> None:
        u, v = e[0], e[1]
        self.stats.events += 1
        self.t += 1
        if u == v:
            return
        if self.phase == "warmup":
            if self._warmup_insert(u, v):
                return
            self._start_steady()
            if self.config.strict_line12:
                return
        self._dispatch(u, v)

    def run(self, stream) -> "CompasSampler":
        for e in stream:
            self.process_event(e)
        return self

    def _warmup_insert(self, u, v) -> bool:
        g = self.graph
        if len(g) >= self.config.warmup_threshold:
            return False
        fresh = (u not in g) + (v not in g)
        if len(g) + fresh > self.config.n:
            return False
        for x in (u, v):
            if x not in g:
                g.add_node(x)
        if not g.add_edge(u, v):
            self.stats.duplicates += 1
        self.stats.cases["warmup"] += 1
        return True

    def _start_steady(self) -> None:
        self.partition = community.louvain(self.graph, seed=self.rng.randrange(2**32))
        self.phase = "steady"
        self.stats.transition_event = self.t - 1

    def _dispatch(self, u, v) -> None:
        g, h = self.graph, self.buffer
        cases = self.stats.cases
        u_s, v_s = u in g, v in g
        if u_s and v_s:
            cases["i"] += 1
            if g.add_edge(u, v):
                self.partition.edge_added(u, v)
                rep = community.both_in_sample(g, self.partition, u, v)
                self.stats.community_moves += len(rep.moves)
            else:
                self.stats.duplicates += 1
            return
        u_b, v_b = u in h, v in h
        if u_s or v_s:
            s, o, o_b = (u, v, v_b) if u_s else (v, u, u_b)
            if o_b:
                cases["iii"] += 1
                h.touch(o)
                if self.config.track_last_parent:
                    h.set_parent(o, s)
            else:
                cases["iv"] += 1
                self.node_is_new(o, s)
            return
        if u_b and v_b:
            cases["ii"] += 1
            h.touch(u)
            h.touch(v)
            if self.config.track_last_parent:
                h.set_parent(u, v)
                h.set_parent(v, u)
        elif u_b or v_b:
            cases["v"] += 1
            b, o = (u, v) if u_b else (v, u)
            h.touch(b)
            if self.config.track_last_parent:
                h.set_parent(b, o)
            self.node_is_new(o, b)
        else:
            cases["vi"] += 1
            self.node_is_new(u, v)
            self.node_is_new(v, u)

    # -- buffer and sample maintenance ------------------------------------------

    def node_is_new(self, x, parent) -> None:
        if self.buffer.full:
            self.remove_node_from_buffer()
        self.buffer.insert(x, parent)

    def remove_node_from_buffer(self) -> None:
        h = self.buffer
        x = h.pick_promotable(self.graph, self.rng, self.config.promotion)
        if x is None:
            victim = h.min_count_node()
            h.remove(victim)
            self.stats.drops += 1
            return
        _, parent = h.remove(x)
        self.insert_node_in_sample(x, parent)

    def insert_node_in_sample(self, x, parent) -> None:
        if parent not in self.graph:
            raise RuntimeError(f"parent {parent} of promoted node {x} is not sampled")
        if len(self.graph) >= self.config.n:
            self.check_resize_sample(1)
            if parent not in self.graph:
                self.stats.aborted_insertions += 1
                self.stats.drops += 1
                return
        g, part = self.graph, self.partition
        g.add_node(x)
        part.add_node(x, part.comm[parent])
        g.add_edge(x, parent)
        part.edge_added(x, parent)
        self.stats.promotions += 1

    def select_victims(self, m: int) -> list:
        """Lowest degree first, then lowest clustering coefficient, then node id."""
        g = self.graph
        victims = []
        for d in sorted(g._by_degree):
            need = m - len(victims)
            bucket = g.nodes_with_degree(d)
            if d < 2:
                victims.extend(heapq.nsmallest(need, bucket))
            else:
                victims.extend(heapq.nsmallest(
                    need, bucket, key=lambda x: (g.clustering_coefficient(x), x)))
            if len(victims) == m:
                break
        return victims

    def check_resize_sample(self, m: int = 1) -> None:
        if m < 1:
            raise ValueError("m must be >= 1")
        g, part = self.graph, self.partition
        if len(g) < self.config.n:
            return
        for x in self.select_victims(m):
            removed = g.remove_node(x)
            nbrs = [y for _, y in removed]
            old = part.node_removed(x, nbrs)
            self.stats.evictions += 1
            frags = community.split_after_removal(g, part, nbrs, old)
            community.merge_fragments(g, part, frags)

    # -- results -------------------------------------------------------------------

    def finalize(self) -> tuple[SampleGraph, Partition]:
        if self.partition is None:
            if self.graph.n_edges == 0:
                raise ValueError("stream produced an empty sample")
            self._start_steady()
        return self.graph, self.partition

    def check_invariants(self, full: bool = False) -> list[str]:
        g, h = self.graph, self.buffer
        problems = []
        if len(g) > self.config.n:
            problems.append(f"|V_s| = {len(g)} exceeds n = {self.config.n}")
        if len(h) > self.config.n_d:
            problems.append(f"buffer holds {len(h)} > n_d = {self.config.n_d}")
        overlap = [x for x in h.count if x in g.adj]
        if overlap:
            problems.append(f"{len(overlap)} nodes both buffered and sampled")
        if full:
            if sum(len(nb) for nb in g.adj.values()) != 2 * g.n_edges:
                problems.append("degree sum differs from 2|E_s|")
            if self.partition is not None:
                problems.extend(self.partition.reconcile(g))
        return problems

    def metadata(self) -> dict:
        g, part = self.graph, self.partition
        meta = {
            "algorithm": self.algorithm,
            "config": asdict(self.config),
            "phase": self.phase,
            "stats": asdict(self.stats),
            "n_nodes": len(g),
            "n_edges": g.n_edges,
            "buffer_occupancy": len(self.buffer),
        }
        if part is not None:
            meta["n_communities"] = len(part)
            meta["modularity"] = part.modularity() if part.n_edges else None
        return meta


def sample_stream(stream, config: SamplerConfig) -> CompasSampler:
    return CompasSampler(config).run(stream)
