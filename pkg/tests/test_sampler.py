from __future__ import annotations

import itertools
import random
import statistics

import networkx as nx
import pytest

from compas_sampling import community
from compas_sampling.graph_state import Partition, SampleGraph
from compas_sampling.sampler import (CompasSampler, ConfigError, SamplerConfig,
                                     default_buffer_size, default_sample_size, sample_stream)
from compas_sampling.stream_io import EdgeStream, generate_planted_partition

from oracles import eq1, triangle_fragments


def steady(edges, labels, n, n_d=2, seed=0, **kw):
    """A sampler already in steady phase with the given sample and partition."""
    smp = CompasSampler(SamplerConfig(n=n, n_d=n_d, seed=seed, **kw))
    for u, v in edges:
        for x in (u, v):
            if x not in smp.graph:
                smp.graph.add_node(x)
        smp.graph.add_edge(u, v)
    smp.partition = Partition.from_assignment(smp.graph, labels)
    smp.phase = "steady"
    return smp


def test_warmup_threshold():
    assert SamplerConfig(n=100, alpha=0.4).warmup_threshold == 40


def test_default_buffer_size():
    assert SamplerConfig(n=1000).n_d == 8
    assert default_buffer_size(1000) == 8
    assert default_sample_size(1000) == 400


@pytest.mark.parametrize("kw", [dict(n=100, alpha=1.2), dict(n=100, alpha=0.0), dict(n=1),
                                dict(n=10, n_d=0), dict(n=10, initial_algorithm="infomap"),
                                dict(n=10, promotion="random")])
def test_bad_config(kw):
    with pytest.raises(ConfigError):
        SamplerConfig(**kw)


def test_new_sampler_is_empty():
    smp = CompasSampler(SamplerConfig(n=10))
    assert smp.phase == "warmup" and len(smp.graph) == 0 and len(smp.buffer) == 0
    assert smp.partition is None


def test_warmup_first_edge():
    smp = CompasSampler(SamplerConfig(n=100))
    smp.process_event((1, 2, 0))
    assert set(smp.graph.nodes()) == {1, 2}
    assert list(smp.graph.edges()) == [(1, 2)]
    assert smp.partition is None


def test_warmup_duplicate_edge_counts_once():
    smp = CompasSampler(SamplerConfig(n=100))
    smp.run(EdgeStream.from_pairs([(1, 2), (2, 1)]))
    assert smp.graph.n_edges == 1 and smp.stats.duplicates == 1


def test_transition_runs_louvain_and_dispatches_edge():
    # threshold 0.4 * 10 = 4 nodes, reached after the third event
    pairs = [(0, 1), (1, 2), (2, 3), (5, 6)]
    smp = CompasSampler(SamplerConfig(n=10, n_d=2)).run(EdgeStream.from_pairs(pairs))
    assert smp.phase == "steady" and smp.stats.transition_event == 3
    assert set(smp.partition.comm) == {0, 1, 2, 3}
    assert 5 in smp.buffer and 6 in smp.buffer


def test_strict_line12_drops_trigger_edge():
    pairs = [(0, 1), (1, 2), (2, 3), (5, 6)]
    loose = CompasSampler(SamplerConfig(n=10, n_d=2)).run(EdgeStream.from_pairs(pairs))
    strict = CompasSampler(SamplerConfig(n=10, n_d=2, strict_line12=True)).run(EdgeStream.from_pairs(pairs))
    assert len(loose.buffer) == 2
    assert len(strict.buffer) == 0 and strict.phase == "steady"


def test_intra_edge_in_steady_phase():
    # b and d already share a community
    edges = [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (4, 6), (3, 4)]
    smp = steady(edges, {0: 0, 1: 0, 2: 0, 3: 0, 4: 1, 5: 1, 6: 1}, n=20)
    before = smp.partition.as_dict()
    smp.process_event((1, 3, 0))
    assert smp.graph.has_edge(1, 3)
    assert smp.partition.as_dict() == before
    assert smp.stats.cases["i"] == 1


def test_dispatch_cases():
    smp = steady([(0, 1), (1, 2)], {0: 0, 1: 0, 2: 0}, n=20, n_d=5)
    smp.process_event((2, 10, 0))  # (iv) sampled + new
    assert smp.buffer.parent[10] == 2 and smp.buffer.count[10] == 1
    smp.process_event((0, 10, 1))  # (iii) sampled + buffered
    assert smp.buffer.count[10] == 2 and smp.buffer.parent[10] == 2
    smp.process_event((10, 11, 2))  # (v) buffered + new
    assert smp.buffer.count[10] == 3 and smp.buffer.parent[11] == 10
    smp.process_event((10, 11, 3))  # (ii) both buffered
    assert smp.buffer.count[10] == 4 and smp.buffer.count[11] == 2
    smp.process_event((20, 21, 4))  # (vi) both new
    assert smp.buffer.parent[20] == 21 and smp.buffer.parent[21] == 20
    assert smp.stats.cases == {"warmup": 0, "i": 0, "ii": 1, "iii": 1, "iv": 1, "v": 1, "vi": 1}


def test_last_parent_switch():
    smp = steady([(0, 1), (1, 2)], {0: 0, 1: 0, 2: 0}, n=20, n_d=5, track_last_parent=True)
    smp.process_event((2, 10, 0))
    smp.process_event((0, 10, 1))
    assert smp.buffer.parent[10] == 0


def test_both_new_on_full_buffer_promotes_twice():
    # scripted 10-node trace: sample {0..3}, buffer of two promotable nodes
    smp = steady([(0, 1), (1, 2), (2, 3), (0, 2)], {0: 0, 1: 0, 2: 0, 3: 0}, n=10, n_d=2)
    smp.process_event((3, 4, 0))
    smp.process_event((1, 5, 1))
    assert len(smp.buffer) == 2
    smp.process_event((8, 9, 2))
    assert smp.stats.promotions == 2
    assert {4, 5} <= set(smp.graph.nodes())
    assert set(smp.buffer.count) == {8, 9}
    assert len(smp.buffer) <= 2


def test_node_is_new_with_room():
    smp = steady([(0, 1)], {0: 0, 1: 0}, n=10, n_d=3)
    smp.node_is_new(7, 0)
    assert smp.buffer.count[7] == 1 and smp.stats.promotions == 0


def test_node_is_new_fallback_discards_min_count():
    smp = steady([(0, 1)], {0: 0, 1: 0}, n=10, n_d=2)
    smp.buffer.insert(30, 99)
    smp.buffer.insert(31, 98)
    smp.buffer.touch(30)
    smp.node_is_new(7, 0)
    assert 31 not in smp.buffer and 30 in smp.buffer and 7 in smp.buffer
    assert smp.stats.drops == 1 and smp.stats.promotions == 0


def test_promotion_joins_parent_community():
    smp = steady([(0, 1), (2, 3)], {0: 0, 1: 0, 2: 1, 3: 1}, n=10, n_d=1)
    smp.buffer.insert(9, 2)
    smp.remove_node_from_buffer()
    assert smp.graph.has_edge(9, 2) and 9 not in smp.buffer
    assert smp.partition.comm[9] == smp.partition.comm[2]
    assert smp.partition.reconcile(smp.graph) == []


def test_promotion_frequencies_follow_counts():
    hits = 0
    runs = 10_000
    for seed in range(runs):
        smp = steady([(0, 1)], {0: 0, 1: 0}, n=10, n_d=2, seed=seed)
        smp.buffer.insert(5, 0)
        smp.buffer.insert(6, 1)
        smp.buffer.touch(5)
        smp.buffer.touch(5)
        smp.remove_node_from_buffer()
        hits += 5 in smp.graph
    assert abs(hits / runs - 0.75) <= 0.03


def test_insert_at_capacity_evicts_one():
    edges = [(0, 1), (1, 2), (0, 2), (2, 3)]
    smp = steady(edges, {0: 0, 1: 0, 2: 0, 3: 0}, n=4, n_d=1)
    smp.insert_node_in_sample(9, 1)
    assert len(smp.graph) == 4 and 3 not in smp.graph and 9 in smp.graph
    assert smp.stats.evictions == 1


def test_insert_aborts_when_parent_evicted():
    edges = [(0, 1), (1, 2), (0, 2), (2, 3)]
    smp = steady(edges, {0: 0, 1: 0, 2: 0, 3: 0}, n=4, n_d=1)
    smp.insert_node_in_sample(9, 3)
    assert 9 not in smp.graph and 3 not in smp.graph
    assert smp.stats.aborted_insertions == 1 and smp.stats.drops == 1


def test_insert_needs_sampled_parent():
    smp = steady([(0, 1)], {0: 0, 1: 0}, n=4)
    with pytest.raises(RuntimeError):
        smp.insert_node_in_sample(9, 42)


def test_resize_below_capacity_is_noop():
    smp = steady([(0, 1)], {0: 0, 1: 0}, n=4)
    smp.check_resize_sample(1)
    assert len(smp.graph) == 2


def test_resize_rejects_zero():
    with pytest.raises(ValueError):
        steady([(0, 1)], {0: 0, 1: 0}, n=4).check_resize_sample(0)


def test_pendant_goes_first():
    edges = list(itertools.combinations(range(4), 2)) + [(3, 8)]
    smp = steady(edges, {x: 0 for x in (0, 1, 2, 3, 8)}, n=5)
    assert smp.select_victims(1) == [8]


def test_victim_order_degree_then_clustering_then_id():
    # 5 and 6 both have degree 2; 5 closes a triangle, 6 does not
    edges = list(itertools.combinations(range(5), 2)) + [(5, 0), (5, 1), (6, 2), (6, 7), (7, 3), (7, 4)]
    smp = steady(edges, {x: 0 for x in range(8)}, n=8)
    assert smp.select_victims(2) == [6, 5]
    twins = steady([(0, 1), (2, 3), (1, 2)], {x: 0 for x in range(4)}, n=4)
    assert twins.select_victims(1) == [0]


def test_cut_vertex_eviction_on_twelve_nodes():
    # two K4s joined through node 8 (degree 2, clustering 0), and a triangle hanging on node 1
    edges = (list(itertools.combinations(range(4), 2)) + list(itertools.combinations(range(4, 8), 2))
             + [(8, 0), (8, 4), (9, 1), (9, 10), (9, 11), (10, 11)])
    smp = steady(edges, {x: 0 for x in range(12)}, n=12)
    assert smp.select_victims(1) == [8]
    h = nx.Graph(edges)
    h.remove_node(8)
    expected = triangle_fragments(h, set(range(12)) - {8}, [0, 4])
    assert sorted(map(sorted, expected)) == [[0, 1, 2, 3], [4, 5, 6, 7], [9, 10, 11]]
    removed = smp.graph.remove_node(8)
    nbrs = [y for _, y in removed]
    old = smp.partition.node_removed(8, nbrs)
    frags = community.split_after_removal(smp.graph, smp.partition, nbrs, old)
    assert sorted(map(sorted, frags)) == sorted(map(sorted, expected))
    community.merge_fragments(smp.graph, smp.partition, frags)
    comm = smp.partition.comm
    assert comm[0] != comm[4]
    assert smp.partition.reconcile(smp.graph) == []
    h_labels = dict(comm)
    assert smp.partition.modularity() == pytest.approx(eq1(h, h_labels), abs=1e-12)


def test_cut_vertex_removal_splits_community():
    edges = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 6), (6, 3)]
    smp = steady(edges, {x: 0 for x in range(7)}, n=7)
    assert smp.select_victims(1) == [6]
    smp.check_resize_sample(1)
    comm = smp.partition.comm
    assert comm[0] == comm[1] == comm[2]
    assert comm[3] == comm[4] == comm[5]
    assert comm[0] != comm[3]
    assert smp.partition.reconcile(smp.graph) == []


def test_finalize_during_warmup_runs_louvain():
    smp = CompasSampler(SamplerConfig(n=100)).run(EdgeStream.from_pairs([(0, 1), (1, 2), (0, 2)]))
    g, part = smp.finalize()
    assert smp.phase == "steady" and set(part.comm) == {0, 1, 2}


def test_finalize_without_edges():
    with pytest.raises(ValueError):
        CompasSampler(SamplerConfig(n=10)).finalize()


def test_finalize_in_steady_phase_returns_state():
    smp = steady([(0, 1)], {0: 0, 1: 0}, n=4)
    g, part = smp.finalize()
    assert g is smp.graph and part is smp.partition


def test_replay_is_deterministic():
    rng = random.Random(50)
    pairs = [(rng.randrange(15), rng.randrange(15)) for _ in range(50)]
    stream = EdgeStream.from_pairs(pairs)
    a = sample_stream(stream, SamplerConfig(n=8, n_d=2, seed=3))
    b = sample_stream(stream, SamplerConfig(n=8, n_d=2, seed=3))
    assert sorted(a.graph.edges()) == sorted(b.graph.edges())
    assert a.partition.as_dict() == b.partition.as_dict()
    assert a.metadata() == b.metadata()


@pytest.mark.parametrize("seed", range(3))
def test_invariants_hold_throughout(seed):
    stream, _ = generate_planted_partition(300, 6, 0.25, 0.02, seed)
    smp = CompasSampler(SamplerConfig(n=120, seed=seed))
    for t, e in enumerate(stream, start=1):
        smp.process_event(e)
        assert smp.check_invariants() == []
        if t % 1000 == 0 and smp.partition is not None:
            assert smp.check_invariants(full=True) == []
            h = nx.Graph(list(smp.graph.edges()))
            h.add_nodes_from(smp.graph.nodes())
            assert smp.partition.modularity() == pytest.approx(eq1(h, smp.partition.comm), abs=1e-9)
    assert smp.check_invariants(full=True) == []


def test_metadata_document():
    stream, _ = generate_planted_partition(200, 4, 0.3, 0.02, 1)
    smp = sample_stream(stream, SamplerConfig(n=80, seed=1))
    meta = smp.metadata()
    for key in ("config", "stats", "n_nodes", "n_edges", "n_communities", "modularity"):
        assert key in meta
    assert meta["stats"]["transition_event"] is not None
    assert meta["n_nodes"] <= 80


def test_modularity_improves_over_the_run():
    early, late = [], []
    for seed in range(10):
        stream, _ = generate_planted_partition(500, 10, 0.3, 0.01, seed)
        smp = CompasSampler(SamplerConfig(n=200, seed=seed))
        trace = []
        for e in stream:
            smp.process_event(e)
            if smp.phase == "steady" and smp.graph.n_edges:
                trace.append(smp.partition.modularity())
        tenth = max(1, len(stream) // 10)
        steady_events = len(trace)
        early.append(statistics.mean(trace[:max(1, steady_events // 10)]))
        late.append(statistics.mean(trace[-tenth:]))
    assert statistics.mean(late) >= statistics.mean(early)
