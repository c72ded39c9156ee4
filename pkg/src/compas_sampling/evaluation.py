"""Community-quality evaluation: per-community measures, KS distances,
partition agreement and run diagnostics."""

from __future__ import annotations

import csv
import math
import statistics
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np

from . import community
from .graph_state import Partition, SampleGraph

MEASURES = ("ID", "EI", "AD", "FOMD", "TPR", "EX", "CR", "CON", "NC", "MODF", "AODF", "FODF", "MOD")


def _labels(partition) -> dict:
    return partition.comm if isinstance(partition, Partition) else partition


def _groups(labels: dict) -> dict:
    groups = defaultdict(set)
    for x, c in labels.items():
        groups[c].add(x)
    return groups


def ground_truth(stream, seed: int = 0, labels: dict | None = None):
    """Aggregate every arrival into one simple graph and partition it.

    Louvain is used unless external ``labels`` are supplied; labels must then
    cover every node of the aggregate.
    """
    if len(stream) == 0:
        raise ValueError("empty stream")
    graph = SampleGraph.from_edges(stream.pairs() if hasattr(stream, "pairs") else stream)
    if labels is None:
        return graph, community.louvain(graph, seed=seed)
    missing = [x for x in graph.nodes() if x not in labels]
    if missing:
        raise ValueError(f"{len(missing)} stream nodes have no label")
    return graph, Partition.from_assignment(graph, labels)


@dataclass
class CommunityScores:
    community: int
    n_s: int
    m_s: int
    c_s: int
    values: dict = field(default_factory=dict)

    def __getitem__(self, measure):
        return self.values[measure]


def _ratio(num, den) -> float:
    return num / den if den else 0.0


def _score(graph: SampleGraph, cid, members: set, median_degree: float) -> CommunityScores:
    adj = graph.adj
    M = graph.n_edges
    N = len(graph)
    n_s = len(members)
    twice_m = c_s = D_s = 0
    in_triangle = above_median = flake = 0
    odf = []
    for u in members:
        nb = adj[u]
        d = len(nb)
        inside = nb & members
        k_in = len(inside)
        twice_m += k_in
        c_s += d - k_in
        D_s += d
        if k_in > median_degree:
            above_median += 1
        if k_in < d / 2:
            flake += 1
        odf.append((d - k_in) / d if d else 0.0)
        if k_in >= 2 and any(inside & adj[w] for w in inside):
            in_triangle += 1
    m_s = twice_m // 2
    con = _ratio(c_s, 2 * m_s + c_s)
    vals = {
        "ID": _ratio(m_s, n_s * (n_s - 1) / 2),
        "EI": float(m_s),
        "AD": 2.0 * m_s / n_s,
        "FOMD": above_median / n_s,
        "TPR": in_triangle / n_s,
        "EX": c_s / n_s,
        "CR": _ratio(c_s, n_s * (N - n_s)),
        "CON": con,
        "NC": con + _ratio(c_s, 2 * (M - m_s) + c_s),
        "MODF": max(odf),
        "AODF": sum(odf) / n_s,
        "FODF": flake / n_s,
        "MOD": (m_s / M - (D_s / (2.0 * M)) ** 2) if M else 0.0,
    }
    return CommunityScores(cid, n_s, m_s, c_s, vals)


def _median_degree(graph: SampleGraph) -> float:
    return statistics.median(len(nb) for nb in graph.adj.values()) if len(graph) else 0


def all_community_scores(graph: SampleGraph, partition) -> list[CommunityScores]:
    """The thirteen measures for every community of ``partition``.

    FOMD compares internal degrees against the median degree of ``graph``
    itself. Zero denominators give 0 so every value is finite.
    """
    median = _median_degree(graph)
    return [_score(graph, cid, members, median) for cid, members in sorted(_groups(_labels(partition)).items())]


def community_scores(graph: SampleGraph, partition, cid) -> CommunityScores:
    members = {x for x, c in _labels(partition).items() if c == cid}
    if not members:
        raise KeyError(f"community {cid} not in partition")
    return _score(graph, cid, members, _median_degree(graph))


def ks_d(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov D between the empirical CDFs of a and b."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_d needs two non-empty samples")
    support = np.concatenate([a, b])
    fa = np.searchsorted(a, support, side="right") / a.size
    fb = np.searchsorted(b, support, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def _contingency(p, q):
    p, q = _labels(p), _labels(q)
    common = [x for x in p if x in q]
    if not common:
        raise ValueError("partitions share no nodes")
    table = Counter((p[x], q[x]) for x in common)
    rows = Counter(p[x] for x in common)
    cols = Counter(q[x] for x in common)
    return table, rows, cols, len(common)


def _entropy(counts, n) -> float:
    return -sum(c / n * math.log(c / n) for c in counts.values())


def nmi(p, q, norm: str = "mean") -> float:
    """Normalised mutual information on the nodes both partitions label.

    ``norm`` is ``"mean"`` (arithmetic mean of the entropies) or ``"max"``.
    """
    table, rows, cols, n = _contingency(p, q)
    if len(table) == len(rows) == len(cols):
        return 1.0
    hp, hq = _entropy(rows, n), _entropy(cols, n)
    if hp == 0.0 or hq == 0.0:
        return 0.0
    mi = sum(c / n * math.log(n * c / (rows[a] * cols[b])) for (a, b), c in table.items())
    if norm == "mean":
        den = (hp + hq) / 2
    elif norm == "max":
        den = max(hp, hq)
    else:
        raise ValueError(f"unknown NMI normalisation {norm!r}")
    return min(1.0, max(0.0, mi / den))


def ari(p, q) -> float:
    table, rows, cols, n = _contingency(p, q)

    def pairs(k):
        return k * (k - 1) / 2

    index = sum(pairs(c) for c in table.values())
    sa = sum(pairs(c) for c in rows.values())
    sb = sum(pairs(c) for c in cols.values())
    expected = sa * sb / pairs(n) if n > 1 else 0.0
    top = (sa + sb) / 2
    if top == expected:
        return 1.0
    return (index - expected) / (top - expected)


def purity(pred, truth) -> float:
    """Share of nodes that fall in the majority truth class of their predicted cluster."""
    table, rows, _, n = _contingency(pred, truth)
    best = defaultdict(int)
    for (a, _), c in table.items():
        best[a] = max(best[a], c)
    return sum(best.values()) / n


@dataclass
class MetricReport:
    d_stats: dict
    avg_d: float
    sd_d: float
    nmi: float
    ari: float
    purity: float
    run_id: str = ""
    n_common: int = 0
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def score_table(graph, partition) -> dict[str, list[float]]:
    scores = all_community_scores(graph, partition)
    return {m: [s.values[m] for s in scores] for m in MEASURES}


def metric_report(sample: SampleGraph, sample_partition, truth: SampleGraph, truth_partition,
                  run_id: str = "", nmi_norm: str = "mean") -> MetricReport:
    ours = score_table(sample, sample_partition)
    theirs = score_table(truth, truth_partition)
    d = {m: ks_d(ours[m], theirs[m]) for m in MEASURES}
    vals = list(d.values())
    _, _, _, n_common = _contingency(sample_partition, truth_partition)
    return MetricReport(
        d_stats=d,
        avg_d=float(np.mean(vals)),
        sd_d=float(np.std(vals)),
        nmi=nmi(sample_partition, truth_partition, nmi_norm),
        ari=ari(sample_partition, truth_partition),
        purity=purity(sample_partition, truth_partition),
        run_id=run_id,
        n_common=n_common,
    )


def write_score_csv(path, graph, partition) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["community", "n_s", "m_s", "c_s", *MEASURES])
        for s in all_community_scores(graph, partition):
            w.writerow([s.community, s.n_s, s.m_s, s.c_s, *(repr(s.values[m]) for m in MEASURES)])


# -- diagnostics -----------------------------------------------------------------

def intra_edge_fraction(graph: SampleGraph, partition) -> float:
    labels = _labels(partition)
    if graph.n_edges == 0:
        return 0.0
    intra = sum(1 for u, v in graph.edges() if labels[u] == labels[v])
    return intra / graph.n_edges


def edge_retention(sample: SampleGraph, truth: SampleGraph) -> float:
    """|E_s| over the number of aggregate edges among the sampled nodes."""
    nodes = set(sample.nodes())
    induced = sum(1 for u in nodes if u in truth.adj for v in truth.adj[u] if u < v and v in nodes)
    return sample.n_edges / induced if induced else 0.0


def bucket_profile(stream, truth: SampleGraph, sample: SampleGraph, buckets: int = 500) -> list[dict]:
    """Nodes grouped by first-arrival time into equal slices of the stream."""
    if buckets < 1:
        raise ValueError("need at least one bucket")
    first = {}
    for t, e in enumerate(stream):
        for x in (e[0], e[1]):
            if x not in first:
                first[x] = t
    length = max(1, len(stream))
    groups = defaultdict(list)
    for x, t in first.items():
        groups[min(buckets - 1, t * buckets // length)].append(x)
    n_sampled = max(1, len(sample))
    rows = []
    for b in range(buckets):
        xs = groups.get(b, [])
        picked = sum(1 for x in xs if x in sample.adj)
        rows.append({
            "bucket": b,
            "nodes": len(xs),
            "mean_degree": sum(truth.degree(x) for x in xs) / len(xs) if xs else 0.0,
            "sampled_rate": picked / len(xs) if xs else 0.0,
            "sampled_share": picked / n_sampled,
        })
    return rows


def sample_snapshot(graph: SampleGraph, partition) -> dict:
    n = len(graph)
    snap = {
        "n_nodes": n,
        "n_edges": graph.n_edges,
        "mean_degree": 2.0 * graph.n_edges / n if n else 0.0,
        "mean_clustering": (sum(graph.clustering_coefficient(x) for x in graph.nodes()) / n) if n else 0.0,
        "modularity": None,
    }
    if partition is not None and graph.n_edges:
        snap["modularity"] = community.modularity(graph, partition)
    return snap


def record_series(sampler, stream, every: int = 1000) -> list[dict]:
    """Run ``sampler`` over ``stream``, snapshotting the sample every ``every`` events."""
    series = []
    for t, e in enumerate(stream, start=1):
        sampler.process_event(e)
        if t % every == 0 or t == len(stream):
            snap = sample_snapshot(sampler.graph, getattr(sampler, "partition", None))
            snap["event"] = t
            snap["phase"] = getattr(sampler, "phase", None)
            series.append(snap)
    return series


def diagnostics(sample: SampleGraph, sample_partition, truth: SampleGraph, truth_partition,
                stream, series: list | None = None, buckets: int = 500) -> dict:
    return {
        "series": series or [],
        "intra_fraction_sample": intra_edge_fraction(sample, sample_partition),
        "intra_fraction_original": intra_edge_fraction(truth, truth_partition),
        "edge_retention": edge_retention(sample, truth),
        "buckets": bucket_profile(stream, truth, sample, buckets),
    }
