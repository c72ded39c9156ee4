"""Command-line entry point.

Commands: generate, sample, evaluate, compare, perturb-study, scale-bench.
Exit status is 0 on success, 1 for usage errors, 2 for data errors and 3 when
a sampler breaks one of its internal invariants.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import community
from .evaluation import MEASURES, ground_truth, metric_report, write_score_csv
from .graph_state import Partition, SampleGraph
from .pipeline import ALGORITHMS, run_sampler
from .sampler import (DEFAULT_ALPHA, DEFAULT_BUFFER_FRAC, DEFAULT_SAMPLE_FRAC, CompasSampler,
                      ConfigError, SamplerConfig, default_buffer_size, default_sample_size)
from .stream_io import (StreamFormatError, check_labels, generate_planted_partition,
                        load_edge_stream, load_labels, perturb_order, write_edge_file,
                        write_labels)

log = logging.getLogger("compas_sampling")

DEFAULT_Y_GRID = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)


class UsageError(Exception):
    pass


class InvariantViolation(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- argument helpers ----------------------------------------------------------------

def _generator_params(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected n,k,p_in,p_out")
    try:
        return int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3])
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse generator parameters {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def _add_input(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="edge file, one 'u v' (or 'u v t') per line")
    src.add_argument("--generate", type=_generator_params, metavar="n,k,p_in,p_out",
                     help="planted-partition stream; each seed draws its own graph")
    p.add_argument("--format", choices=("plain", "timestamped"), default="plain")
    p.add_argument("--labels", help="label file for --truth labels with --input")
    p.add_argument("--truth", choices=("louvain", "labels"), default="louvain")


def _add_sampling(p: argparse.ArgumentParser, multi_algo: bool = False) -> None:
    if multi_algo:
        p.add_argument("--algo", action="append", choices=ALGORITHMS,
                       help="repeat to compare several samplers (default: all)")
    else:
        p.add_argument("--algo", choices=ALGORITHMS, default="compas")
    size = p.add_mutually_exclusive_group()
    size.add_argument("--sample-frac", type=float, default=None,
                      help=f"n as a fraction of |V| (default {DEFAULT_SAMPLE_FRAC})")
    size.add_argument("--sample-n", type=int, default=None)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--buffer-frac", type=float, default=DEFAULT_BUFFER_FRAC)
    p.add_argument("--window", type=int, default=None, help="SBFS window W (default 10n)")
    p.add_argument("--strict-line12", action="store_true",
                   help="drop the edge that triggers the first community detection")
    p.add_argument("--seed", type=int, action="append", help="repeatable; default 0")
    p.add_argument("--nmi-norm", choices=("mean", "max"), default="mean")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="compas-sample", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a planted-partition edge file and labels")
    g.add_argument("--generate", type=_generator_params, required=True, metavar="n,k,p_in,p_out")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    s = sub.add_parser("sample", help="run one sampler for each seed and write the samples")
    _add_input(s)
    _add_sampling(s)

    e = sub.add_parser("evaluate", help="score samples written by 'sample' against the ground truth")
    e.add_argument("--samples", required=True, help="directory written by 'sample'")
    _add_input(e)
    e.add_argument("--nmi-norm", choices=("mean", "max"), default="mean")
    e.add_argument("--out", required=True)

    c = sub.add_parser("compare", help="D statistics and NMI/ARI/Purity for several samplers")
    _add_input(c)
    _add_sampling(c, multi_algo=True)

    ps = sub.add_parser("perturb-study", help="avg D against the fraction of swapped edge pairs")
    _add_input(ps)
    _add_sampling(ps)
    ps.add_argument("--y", type=_float_list, default=list(DEFAULT_Y_GRID),
                    help="comma separated swap fractions (default 0.05..0.5)")

    sb = sub.add_parser("scale-bench", help="wall time against stream size")
    _add_sampling(sb)
    sb.add_argument("--base-edges", type=int, default=50_000)
    sb.add_argument("--sizes", type=_int_list, default=[1, 2, 4, 8], help="size multipliers")
    sb.add_argument("--reps", type=int, default=3)
    return parser


# -- shared plumbing -------------------------------------------------------------------

def run_config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "verbose"}
    if isinstance(cfg.get("generate"), tuple):
        cfg["generate"] = list(cfg["generate"])
    return cfg


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _csv_with_config(path: Path, header, rows, config: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _seeds(args) -> list[int]:
    return args.seed or [0]


def _check_input(args) -> None:
    if not args.input and not args.generate:
        raise UsageError("one of --input or --generate is required")
    if args.truth == "labels" and args.input and not args.labels:
        raise UsageError("--truth labels with --input needs --labels")


def load_input(args, seed: int):
    """Stream, truth graph and truth partition for one seed."""
    if args.generate:
        try:
            stream, labels = generate_planted_partition(*args.generate, seed=seed)
        except ValueError as exc:
            raise UsageError(f"--generate: {exc}") from None
    else:
        stream = load_edge_stream(args.input, args.format)
        labels = None
        if args.labels:
            labels = load_labels(args.labels)
            check_labels(labels, stream)
    truth_labels = labels if args.truth == "labels" else None
    truth_graph, truth_part = ground_truth(stream, seed, truth_labels)
    return stream, truth_graph, truth_part


def _sample_size(args, n_nodes: int) -> int:
    if args.sample_n is not None:
        if args.sample_n < 2:
            raise UsageError("--sample-n must be >= 2")
        return args.sample_n
    frac = DEFAULT_SAMPLE_FRAC if args.sample_frac is None else args.sample_frac
    if not 0.0 < frac <= 1.0:
        raise UsageError("--sample-frac must lie in (0, 1]")
    return default_sample_size(n_nodes, frac)


def _run(algo, stream, n, seed, args):
    """One sampler run; ComPAS runs are checked against their invariants."""
    if args.window is not None and args.window < 1:
        raise UsageError("--window must be >= 1")
    if algo == "compas":
        cfg = SamplerConfig(n=n, alpha=args.alpha, n_d=default_buffer_size(n, args.buffer_frac),
                            seed=seed, strict_line12=args.strict_line12)
        smp = CompasSampler(cfg)
        try:
            smp.run(stream)
        except RuntimeError as exc:
            raise InvariantViolation(str(exc)) from exc
        problems = smp.check_invariants(full=True)
        if problems:
            raise InvariantViolation("; ".join(problems))
        graph, part = smp.finalize()
        return graph, part, smp.metadata()
    return run_sampler(algo, stream, n, seed, window=args.window)


# -- commands ----------------------------------------------------------------------------

def cmd_generate(args) -> int:
    n, k, p_in, p_out = args.generate
    try:
        stream, labels = generate_planted_partition(n, k, p_in, p_out, args.seed)
    except ValueError as exc:
        raise UsageError(f"--generate: {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = "config: " + json.dumps(run_config(args), sort_keys=True)
    write_edge_file(out / "edges.txt", stream.pairs(), header)
    write_labels(out / "labels.txt", labels, header)
    print(f"wrote {len(stream)} edges over {len(labels)} nodes to {out}")
    return 0


def cmd_sample(args) -> int:
    _check_input(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = run_config(args)
    for seed in _seeds(args):
        stream, truth_graph, _ = load_input(args, seed)
        n = _sample_size(args, len(truth_graph))
        graph, part, meta = _run(args.algo, stream, n, seed, args)
        stem = out / f"{args.algo}-seed{seed}"
        header = "config: " + json.dumps(config, sort_keys=True)
        write_edge_file(stem.with_suffix(".edges"), sorted(graph.edges()), header)
        for x in graph.nodes():
            if graph.degree(x) == 0:
                meta.setdefault("isolated_nodes", []).append(x)
        if meta.get("partition_source") != "louvain":
            write_labels(stem.with_suffix(".partition"), part.as_dict(), header)
        meta.update(seed=seed, n=n, invocation=config)
        _write_json(stem.with_suffix(".meta.json"), meta)
        log.info("%s seed %d: %d nodes, %d edges", args.algo, seed, len(graph), graph.n_edges)
    return 0


def _read_sample(stem: Path):
    meta = json.loads(stem.with_suffix(".meta.json").read_text(encoding="utf-8"))
    edge_file = stem.with_suffix(".edges")
    pairs = load_edge_stream(edge_file).pairs() if _has_edges(edge_file) else []
    graph = SampleGraph.from_edges(pairs, nodes=meta.get("isolated_nodes", []))
    part_file = stem.with_suffix(".partition")
    notes = []
    if part_file.exists():
        part = Partition.from_assignment(graph, load_labels(part_file))
    else:
        part = community.louvain(graph, seed=meta.get("seed", 0))
        notes.append("no partition file; communities obtained by running Louvain on the sample")
    return graph, part, meta, notes


def _has_edges(path: Path) -> bool:
    with open(path, encoding="utf-8") as fh:
        return any(line.strip() and not line.startswith("#") for line in fh)


def _aggregate(reports) -> dict:
    keys = ("avg_d", "sd_d", "nmi", "ari", "purity")
    agg = {}
    for k in keys:
        vals = [getattr(r, k) for r in reports]
        agg[k] = {"mean": float(np.mean(vals)), "sd": float(np.std(vals))}
    agg["d_stats"] = {m: float(np.mean([r.d_stats[m] for r in reports])) for m in MEASURES}
    agg["runs"] = len(reports)
    return agg


def cmd_evaluate(args) -> int:
    _check_input(args)
    src = Path(args.samples)
    stems = sorted(p.with_suffix("").with_suffix("") for p in src.glob("*.meta.json"))
    if not stems:
        raise UsageError(f"no sample outputs found in {src}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = run_config(args)
    reports = []
    truth_cache = {}
    for stem in stems:
        graph, part, meta, notes = _read_sample(stem)
        seed = meta.get("seed", 0)
        key = seed if args.generate else None
        if key not in truth_cache:
            truth_cache[key] = load_input(args, seed)[1:]
        truth_graph, truth_part = truth_cache[key]
        report = metric_report(graph, part, truth_graph, truth_part, run_id=stem.name,
                               nmi_norm=args.nmi_norm)
        report.notes.extend(notes)
        reports.append(report)
        _write_json(out / f"{stem.name}.report.json", dict(report.to_dict(), invocation=config))
        write_score_csv(out / f"{stem.name}.scores.csv", graph, part)
    _write_json(out / "aggregate.json", dict(_aggregate(reports), invocation=config))
    print(f"evaluated {len(reports)} samples; reports in {out}")
    return 0


def compare_rows(results: dict) -> list[list]:
    """One row per algorithm, averaged over seeds, sorted by Avg ascending."""
    rows = []
    for algo, reports in results.items():
        agg = _aggregate(reports)
        rows.append([algo, *(agg["d_stats"][m] for m in MEASURES), agg["avg_d"]["mean"],
                     agg["sd_d"]["mean"], agg["nmi"]["mean"], agg["ari"]["mean"],
                     agg["purity"]["mean"]])
    rows.sort(key=lambda r: (r[len(MEASURES) + 1], r[0]))
    return rows


def cmd_compare(args) -> int:
    _check_input(args)
    algos = args.algo or list(ALGORITHMS)
    if not algos:
        raise UsageError("no algorithms to compare")
    results = {a: [] for a in dict.fromkeys(algos)}
    for seed in _seeds(args):
        stream, truth_graph, truth_part = load_input(args, seed)
        n = _sample_size(args, len(truth_graph))
        for algo in results:
            graph, part, _ = _run(algo, stream, n, seed, args)
            results[algo].append(metric_report(graph, part, truth_graph, truth_part,
                                               run_id=f"{algo}-seed{seed}", nmi_norm=args.nmi_norm))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["algorithm", *MEASURES, "Avg", "SD", "NMI", "ARI", "Purity"]
    rows = compare_rows(results)
    _csv_with_config(out / "compare.csv", header, rows, run_config(args))
    for r in rows:
        print(f"{r[0]:>6}  Avg {r[len(MEASURES) + 1]:.4f}  NMI {r[-3]:.4f}")
    return 0


def cmd_perturb_study(args) -> int:
    _check_input(args)
    ys = args.y
    if not ys or any(not 0.0 <= y <= 1.0 for y in ys):
        raise UsageError("--y values must lie in [0, 1]")
    rows = []
    for seed in _seeds(args):
        stream, truth_graph, truth_part = load_input(args, seed)
        n = _sample_size(args, len(truth_graph))
        for y in ys:
            s = perturb_order(stream, y, seed) if y > 0 else stream
            graph, part, _ = _run(args.algo, s, n, seed, args)
            r = metric_report(graph, part, truth_graph, truth_part, nmi_norm=args.nmi_norm)
            rows.append([y, seed, r.avg_d, r.sd_d, r.nmi])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _csv_with_config(out / "perturb.csv", ["y", "seed", "avg_d", "sd_d", "nmi"], rows, run_config(args))
    print(f"wrote {len(rows)} rows to {out / 'perturb.csv'}")
    return 0


def scale_stream(n_edges: int, seed: int):
    """Planted-partition stream with about ``n_edges`` edges and constant mean degree.

    Blocks hold 50 nodes with p_in = 0.3 and every node expects three
    inter-block edges, so both |V| and the edge count grow linearly.
    """
    per_node = 0.3 * 49 / 2 + 1.5
    n_nodes = max(100, round(n_edges / per_node))
    k = max(1, n_nodes // 50)
    return generate_planted_partition(n_nodes, k, 0.3, min(0.299, 3.0 / n_nodes), seed)[0]


def linear_fit(xs, ys) -> dict:
    """Least-squares line through (xs, ys) with its R²."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


def scale_bench(algo, base_edges, sizes, reps, seed, args) -> tuple[list[dict], dict | None]:
    rows = []
    for mult in sizes:
        stream = scale_stream(base_edges * mult, seed)
        n = _sample_size(args, stream.node_count)
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            _run(algo, stream, n, seed, args)
            times.append(time.perf_counter() - t0)
        rows.append({"multiplier": mult, "events": len(stream), "nodes": stream.node_count,
                     "n": n, "median_seconds": statistics.median(times), "times": times})
    if len({r["events"] for r in rows}) < 2:
        log.warning("only one stream size; skipping the linear fit")
        return rows, None
    fit = linear_fit([r["events"] for r in rows], [r["median_seconds"] for r in rows])
    fit["vs_nodes"] = linear_fit([r["nodes"] for r in rows], [r["median_seconds"] for r in rows])
    by_mult = {r["multiplier"]: r["median_seconds"] for r in rows}
    if 1 in by_mult and 2 in by_mult and by_mult[1] > 0:
        fit["ratio_2x"] = by_mult[2] / by_mult[1]
    return rows, fit


def cmd_scale_bench(args) -> int:
    if args.reps < 1 or args.base_edges < 1 or not args.sizes or min(args.sizes) < 1:
        raise UsageError("--reps, --base-edges and --sizes must be positive")
    if args.reps < 3:
        log.warning("fewer than 3 repetitions; medians will be noisy")
    seed = _seeds(args)[0]
    rows, fit = scale_bench(args.algo, args.base_edges, args.sizes, args.reps, seed, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = run_config(args)
    _csv_with_config(out / "scale.csv", ["multiplier", "events", "nodes", "n", "median_seconds"],
                     [[r["multiplier"], r["events"], r["nodes"], r["n"], r["median_seconds"]]
                      for r in rows], config)
    _write_json(out / "scale_fit.json", {"rows": rows, "fit": fit, "invocation": config})
    if fit:
        print(f"R^2 = {fit['r2']:.4f}" + (f", 2x ratio = {fit['ratio_2x']:.3f}" if "ratio_2x" in fit else ""))
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "sample": cmd_sample,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "perturb-study": cmd_perturb_study,
    "scale-bench": cmd_scale_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return 3
    except (StreamFormatError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
