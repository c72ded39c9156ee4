"""Edge streams: loading, generation, reordering and label files."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple


class StreamFormatError(ValueError):
    """Raised for unreadable edge or label files."""


class EdgeEvent(NamedTuple):
    u: int
    v: int
    t: int


@dataclass
class EdgeStream:
    events: list[EdgeEvent]
    node_count: int | None = None
    dropped_self_loops: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.node_count is None:
            self.node_count = len(self.nodes())

    def __iter__(self) -> Iterator[EdgeEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def nodes(self) -> set[int]:
        seen = set()
        for u, v, _ in self.events:
            seen.add(u)
            seen.add(v)
        return seen

    def pairs(self) -> list[tuple[int, int]]:
        return [(e.u, e.v) for e in self.events]

    @classmethod
    def from_pairs(cls, pairs, node_count=None, **metadata) -> "EdgeStream":
        """Build a stream from (u, v) pairs, dropping self-loops."""
        events = []
        dropped = 0
        for u, v in pairs:
            if u == v:
                dropped += 1
                continue
            events.append(EdgeEvent(int(u), int(v), len(events)))
        return cls(events, node_count, dropped, dict(metadata))


def load_edge_stream(path, format: str = "plain") -> EdgeStream:
    """Read an edge file with one ``u v`` or ``u v t`` record per line.

    Lines starting with ``#`` are comments. With ``format="timestamped"`` the
    third column orders the events; ties keep their line order (stable sort).
    Self-loops are dropped and counted in ``dropped_self_loops``.
    """
    if format not in ("plain", "timestamped"):
        raise ValueError(f"unknown stream format {format!r}")
    records = []
    dropped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3) or (format == "timestamped" and len(parts) != 3):
                raise StreamFormatError(f"{path}:{lineno}: expected 'u v' or 'u v t', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
                ts = float(parts[2]) if len(parts) == 3 else None
            except ValueError:
                raise StreamFormatError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
            if u < 0 or v < 0:
                raise StreamFormatError(f"{path}:{lineno}: negative node identifier")
            if u == v:
                dropped += 1
                continue
            records.append((ts, u, v))
    if not records:
        raise StreamFormatError(f"{path}: empty edge stream")
    if format == "timestamped":
        records.sort(key=lambda r: r[0])
    events = [EdgeEvent(u, v, t) for t, (_, u, v) in enumerate(records)]
    meta = {"source": str(path), "format": format, "tie_break": "line_order"}
    return EdgeStream(events, None, dropped, meta)


def write_edge_file(path, pairs, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for u, v in pairs:
            fh.write(f"{u} {v}\n")


def load_labels(path) -> dict[int, int]:
    labels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise StreamFormatError(f"{path}:{lineno}: expected 'node community'")
            try:
                labels[int(parts[0])] = int(parts[1])
            except ValueError:
                raise StreamFormatError(f"{path}:{lineno}: non-integer field") from None
    return labels


def write_labels(path, labels: dict, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for node in sorted(labels):
            fh.write(f"{node} {labels[node]}\n")


def check_labels(labels: dict, stream: EdgeStream) -> None:
    missing = set(labels) - stream.nodes()
    if missing:
        raise StreamFormatError(f"{len(missing)} labeled nodes never appear in the stream")


def _retimed(events) -> list[EdgeEvent]:
    return [EdgeEvent(e.u, e.v, t) for t, e in enumerate(events)]


def randomize_order(stream: EdgeStream, seed: int) -> EdgeStream:
    if not stream.events:
        raise ValueError("cannot reorder an empty stream")
    events = list(stream.events)
    random.Random(seed).shuffle(events)
    meta = dict(stream.metadata, order_seed=seed)
    return EdgeStream(_retimed(events), stream.node_count, stream.dropped_self_loops, meta)


def perturb_order(stream: EdgeStream, y: float, seed: int) -> EdgeStream:
    """Apply ``floor(y * |S|)`` swaps of two uniformly chosen positions."""
    if not 0.0 <= y <= 1.0:
        raise ValueError("y must lie in [0, 1]")
    events = list(stream.events)
    rng = random.Random(seed)
    n = len(events)
    swaps = math.floor(y * n)
    if n >= 2:
        for _ in range(swaps):
            i, j = rng.sample(range(n), 2)
            events[i], events[j] = events[j], events[i]
    meta = dict(stream.metadata, perturb_y=y, perturb_seed=seed, swaps=swaps)
    return EdgeStream(_retimed(events), stream.node_count, stream.dropped_self_loops, meta)


def block_sizes(n_nodes: int, k_comms: int) -> list[int]:
    base, extra = divmod(n_nodes, k_comms)
    return [base + 1 if i < extra else base for i in range(k_comms)]


def _bernoulli_pairs(n: int, p: float, rng: random.Random):
    """Yield each pair ``(a, b)``, ``a < b < n``, independently with probability p.

    Geometric skipping keeps the cost proportional to the number of hits.
    """
    if p <= 0 or n < 2:
        return
    if p >= 1:
        for b in range(1, n):
            for a in range(b):
                yield a, b
        return
    log_q = math.log(1.0 - p)
    b, a = 1, -1
    while b < n:
        a += 1 + int(math.log(1.0 - rng.random()) / log_q)
        while a >= b and b < n:
            a -= b
            b += 1
        if b < n:
            yield a, b


def generate_planted_partition(n_nodes: int, k_comms: int, p_in: float, p_out: float,
                               seed: int) -> tuple[EdgeStream, dict[int, int]]:
    """Planted-partition graph streamed in random order.

    Nodes ``0..n_nodes-1`` are cut into ``k_comms`` blocks whose sizes differ
    by at most one; block membership is assigned through a seeded random
    permutation of the ids.
    """
    if not n_nodes >= k_comms >= 1:
        raise ValueError("need n_nodes >= k_comms >= 1")
    if not 0.0 <= p_out < p_in <= 1.0:
        raise ValueError("need 0 <= p_out < p_in <= 1")
    labels = {}
    start = 0
    for block, size in enumerate(block_sizes(n_nodes, k_comms)):
        for x in range(start, start + size):
            labels[x] = block
        start += size
    intra_pairs = sum(s * (s - 1) // 2 for s in block_sizes(n_nodes, k_comms))
    inter_pairs = n_nodes * (n_nodes - 1) // 2 - intra_pairs
    if intra_pairs * p_in + inter_pairs * p_out == 0:
        raise ValueError("degenerate parameters: expected edge count is zero")

    rng = random.Random(seed)
    pairs = []
    start = 0
    for size in block_sizes(n_nodes, k_comms):
        pairs.extend((start + a, start + b) for a, b in _bernoulli_pairs(size, p_in, rng))
        start += size
    # outcomes of intra-block pairs in this pass are ignored; they were drawn above
    pairs.extend((a, b) for a, b in _bernoulli_pairs(n_nodes, p_out, rng) if labels[a] != labels[b])
    if not pairs:
        raise ValueError("degenerate parameters: no edges were drawn")
    rng.shuffle(pairs)
    # random node ids, so that id order carries no block information
    ids = list(range(n_nodes))
    rng.shuffle(ids)
    pairs = [(ids[a], ids[b]) for a, b in pairs]
    labels = {ids[x]: c for x, c in labels.items()}
    stream = EdgeStream.from_pairs(pairs, generator="planted_partition",
                                   n_nodes=n_nodes, k_comms=k_comms, p_in=p_in, p_out=p_out,
                                   seed=seed)
    # isolated nodes never arrive, so they carry no label
    present = stream.nodes()
    return stream, {x: c for x, c in labels.items() if x in present}
