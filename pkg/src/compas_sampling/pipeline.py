"""Run any sampler end to end and score the result against a ground truth."""

from __future__ import annotations

from . import community
from .baselines import SAMPLERS, make_baseline
from .evaluation import metric_report
from .sampler import (DEFAULT_ALPHA, DEFAULT_BUFFER_FRAC, CompasSampler, SamplerConfig,
                      default_buffer_size)

ALGORITHMS = ("compas", *SAMPLERS)


def run_sampler(algo: str, stream, n: int, seed: int = 0, alpha: float = DEFAULT_ALPHA,
                buffer_frac: float = DEFAULT_BUFFER_FRAC, window: int | None = None,
                strict_line12: bool = False):
    """Sample ``stream`` with ``algo``; return (graph, partition, metadata).

    Baselines produce no communities of their own, so Louvain is run on their
    sample (seeded from ``seed``) and the metadata says so.
    """
    if algo == "compas":
        cfg = SamplerConfig(n=n, alpha=alpha, n_d=default_buffer_size(n, buffer_frac), seed=seed,
                            strict_line12=strict_line12)
        smp = CompasSampler(cfg).run(stream)
        graph, part = smp.finalize()
        return graph, part, smp.metadata()
    if algo not in SAMPLERS:
        raise ValueError(f"unknown algorithm {algo!r}")
    smp = make_baseline(algo, n, seed, window).run(stream)
    graph = smp.finalize()
    meta = smp.metadata()
    if graph.n_edges == 0:
        raise ValueError(f"{algo} produced a sample without edges")
    part = community.louvain(graph, seed=seed)
    meta["partition_source"] = "louvain"
    return graph, part, meta


def evaluate_run(algo, stream, truth_graph, truth_part, n, seed=0, nmi_norm="mean", **kwargs):
    graph, part, meta = run_sampler(algo, stream, n, seed, **kwargs)
    report = metric_report(graph, part, truth_graph, truth_part, run_id=f"{algo}-seed{seed}",
                           nmi_norm=nmi_norm)
    if meta.get("partition_source") == "louvain":
        report.notes.append("communities obtained by running Louvain on the sample")
    return report, graph, part, meta
