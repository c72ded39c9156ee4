"""Modularity arithmetic and the community maintenance rules of the sampler.

All ΔQ values are evaluated from an exact integer numerator
``4*M*Δm - Δ(ΣD_c^2)`` divided once by ``4*M^2``, so their sign is never a
rounding artifact.
"""

from __future__ import annotations

import random
from collections import defaultdict, deque
from dataclasses import dataclass, field

from .graph_state import Partition, SampleGraph

FRESH = object()  # stands for a brand-new, empty community


def modularity(graph: SampleGraph, partition) -> float:
    """Modularity of ``partition`` on ``graph`` recounted from the adjacency.

    ``partition`` may be a :class:`Partition` or a plain node -> label dict.
    """
    M = graph.n_edges
    if M == 0:
        raise ValueError("modularity is undefined for a graph without edges")
    label = partition.comm if isinstance(partition, Partition) else partition
    m = defaultdict(int)
    D = defaultdict(int)
    for x, nb in graph.adj.items():
        c = label[x]
        D[c] += len(nb)
        for y in nb:
            if x < y and label[y] == c:
                m[c] += 1
    num = 4 * M * sum(m.values()) - sum(d * d for d in D.values())
    return num / (4.0 * M * M)


def _delta_numerator(graph: SampleGraph, part: Partition, block, target) -> int:
    comm = part.comm
    adj = graph.adj
    dm = 0
    dD = defaultdict(int)
    for s in block:
        src = comm[s]
        nb = adj[s]
        dD[src] -= len(nb)
        dD[target] += len(nb)
        for y in nb:
            if y in block:
                if s < y:
                    if comm[y] == src:
                        dm -= 1
                    dm += 1
                continue
            cy = comm[y]
            if cy == src:
                dm -= 1
            if cy == target:
                dm += 1
    sq = 0
    for c, delta in dD.items():
        if delta:
            d0 = 0 if c is FRESH else part.total_degree.get(c, 0)
            sq += (d0 + delta) ** 2 - d0 * d0
    return 4 * part.n_edges * dm - sq


def _neighbour_gains(graph: SampleGraph, part: Partition, block, own) -> dict:
    """ΔQ numerators for moving ``block`` (wholly inside ``own``) to each adjacent community.

    Single pass: with l_c the edges from the block to community c and vol the
    block's degree sum, the numerator is
    ``4M(l_c - l_own) - 2 vol (D_c - D_own + vol)``.
    """
    comm = part.comm
    adj = graph.adj
    links = defaultdict(int)
    vol = 0
    for s in block:
        nb = adj[s]
        vol += len(nb)
        for y in nb:
            if y not in block:
                links[comm[y]] += 1
    l_own = links.pop(own, 0)
    four_m = 4 * part.n_edges
    D = part.total_degree
    d_own = D[own]
    return {c: four_m * (l - l_own) - 2 * vol * (D[c] - d_own + vol) for c, l in links.items()}


def _best_target(gains: dict):
    best, best_num = None, 0
    for c in sorted(gains):
        if gains[c] > best_num:
            best, best_num = c, gains[c]
    return best, best_num


def delta_q_block(graph: SampleGraph, part: Partition, nodes, target=FRESH) -> float:
    """ΔQ of moving every node in ``nodes`` into ``target`` (FRESH = new community)."""
    M = part.n_edges
    if M == 0:
        raise ValueError("modularity is undefined for a graph without edges")
    if target is not FRESH and target not in part.members:
        raise KeyError(f"unknown community {target}")
    block = nodes if isinstance(nodes, (set, frozenset)) else set(nodes)
    return _delta_numerator(graph, part, block, target) / (4.0 * M * M)


def delta_q_node_move(graph, part, u, target=FRESH) -> float:
    if u not in part.comm:
        raise KeyError(f"node {u} not in partition")
    return delta_q_block(graph, part, {u}, target)


def delta_q_pair_new_community(graph, part, u, v) -> float:
    if not graph.has_edge(u, v):
        raise KeyError(f"edge ({u}, {v}) not in sample")
    return delta_q_block(graph, part, {u, v}, FRESH)


@dataclass
class MoveProposal:
    subject: tuple
    sources: tuple
    target: object
    delta_q: float


@dataclass
class MutationReport:
    changed: bool = False
    moves: list[MoveProposal] = field(default_factory=list)

    @property
    def delta_q(self) -> float:
        return sum(m.delta_q for m in self.moves)


def _apply(graph, part, proposal: MoveProposal, report: MutationReport) -> None:
    if proposal.target is FRESH:
        proposal.target = part.detach(graph, proposal.subject)
    else:
        part.move(graph, proposal.subject, proposal.target)
    report.changed = True
    report.moves.append(proposal)


def best_node_move(graph, part, t):
    """Best strictly improving move of t into a neighbouring community, or None."""
    own = part.comm[t]
    best, best_num = _best_target(_neighbour_gains(graph, part, {t}, own))
    if best is None:
        return None
    M = part.n_edges
    return MoveProposal((t,), (own,), best, best_num / (4.0 * M * M))


def both_in_sample(graph: SampleGraph, part: Partition, u, v) -> MutationReport:
    """Re-place u and v after edge (u, v) entered the sample.

    The caller has already inserted the edge into ``graph`` and ``part``.
    An intra-community edge leaves the partition alone. For an inter-community
    edge the three candidates u->C(v), v->C(u) and {u,v}->new are scored; if
    none is non-negative nothing happens, otherwise the best is applied
    (ties resolved in that order) and the neighbours of every moved node get
    to make their own best move, wave after wave, until a wave moves nobody.
    Each node moves at most once per call.
    """
    if u not in part.comm or v not in part.comm:
        raise KeyError("both endpoints must be in the sample")
    report = MutationReport()
    cu, cv = part.comm[u], part.comm[v]
    if cu == cv:
        return report
    M = part.n_edges
    scale = 4.0 * M * M
    candidates = [
        MoveProposal((u,), (cu,), cv, _delta_numerator(graph, part, {u}, cv) / scale),
        MoveProposal((v,), (cv,), cu, _delta_numerator(graph, part, {v}, cu) / scale),
        MoveProposal((u, v), (cu, cv), FRESH, _delta_numerator(graph, part, {u, v}, FRESH) / scale),
    ]
    if all(c.delta_q < 0 for c in candidates):
        return report
    chosen = candidates[0]
    for c in candidates[1:]:
        if c.delta_q > chosen.delta_q:
            chosen = c
    _apply(graph, part, chosen, report)

    moved = set(chosen.subject)
    frontier = list(chosen.subject)
    waves = 0
    while frontier and waves < len(graph):
        waves += 1
        nxt = []
        ring = set()
        for w in frontier:
            ring |= graph.adj[w]
        ring -= moved
        for t in sorted(ring):
            prop = best_node_move(graph, part, t)
            if prop is not None:
                _apply(graph, part, prop, report)
                moved.add(t)
                nxt.append(t)
        frontier = nxt
    return report


def percolate(graph: SampleGraph, members: set, seed) -> set:
    """Nodes of every triangle reachable from ``seed`` by rolling a 3-clique.

    Only the subgraph induced by ``members`` is used. Two triangles are
    adjacent when they share an edge. Returns an empty set if ``seed`` lies
    on no triangle.
    """
    adj = graph.adj
    local = {}

    def nb(x):
        s = local.get(x)
        if s is None:
            s = local[x] = adj[x] & members
        return s

    found = set()
    seen = set()
    queue = deque()
    for w in nb(seed):
        e = (seed, w) if seed < w else (w, seed)
        seen.add(e)
        queue.append(e)
    while queue:
        x, y = queue.popleft()
        common = nb(x) & nb(y)
        if not common:
            continue
        found.add(x)
        found.add(y)
        for z in common:
            found.add(z)
            for a in (x, y):
                e = (a, z) if a < z else (z, a)
                if e not in seen:
                    seen.add(e)
                    queue.append(e)
    return found


def _components(graph: SampleGraph, nodes: set) -> list[set]:
    left = set(nodes)
    comps = []
    for start in sorted(nodes):
        if start not in left:
            continue
        left.discard(start)
        comp = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in graph.adj[x]:
                if y in left:
                    left.discard(y)
                    comp.add(y)
                    stack.append(y)
        comps.append(comp)
    return comps


def split_after_removal(graph: SampleGraph, part: Partition, removed_neighbors,
                        old_community) -> list[set]:
    """Cut what is left of ``old_community`` into fragments.

    Former neighbours of the removed node are visited in ascending order; each
    one not yet placed seeds a 3-clique percolation inside the community, and
    the discovered (still unplaced) nodes form a fragment, or just ``{v}`` if
    v sits on no triangle. Members reached from no neighbour are grouped by
    connectivity among themselves, so every member lands in one fragment.
    """
    members = part.members.get(old_community)
    if not members:
        return []
    members = set(members)
    fragments = []
    placed = set()
    for v in sorted(y for y in set(removed_neighbors) if y in members):
        if v in placed:
            continue
        frag = percolate(graph, members, v) - placed
        if not frag:
            frag = {v}
        fragments.append(frag)
        placed |= frag
    rest = members - placed
    if rest:
        fragments.extend(_components(graph, rest))
    return fragments


def merge_fragments(graph: SampleGraph, part: Partition, fragments) -> MutationReport:
    """Give each fragment its own community, then let it join its best neighbour.

    Fragments go largest first (ties by smallest node). The largest keeps the
    old community id. A fragment moves as a block into the adjacent community
    with the largest positive ΔQ, or stays on its own. Single pass.
    """
    report = MutationReport()
    if not fragments:
        return report
    order = sorted((set(f) for f in fragments), key=lambda f: (-len(f), min(f)))
    if len(order) > 1:
        for frag in order[1:]:
            part.detach(graph, frag)
        report.changed = True
    M = part.n_edges
    if M == 0:
        return report
    scale = 4.0 * M * M
    comm = part.comm
    for frag in order:
        own = comm[next(iter(frag))]
        if any(comm[x] != own for x in frag):
            options = {comm[y] for x in frag for y in graph.adj[x] if y not in frag}
            options.discard(own)
            gains = {c: _delta_numerator(graph, part, frag, c) for c in options}
        else:
            gains = _neighbour_gains(graph, part, frag, own)
        best, best_num = _best_target(gains)
        if best is not None:
            _apply(graph, part, MoveProposal(tuple(sorted(frag)), (own,), best, best_num / scale), report)
    return report


def louvain(graph: SampleGraph, seed: int = 0, max_levels: int = 64) -> Partition:
    """Two-phase Louvain (local moves, then aggregation) with seeded visit order."""
    if graph.n_edges == 0:
        raise ValueError("Louvain needs at least one edge")
    rng = random.Random(seed)
    nodes = sorted(graph.nodes())
    index = {x: i for i, x in enumerate(nodes)}
    # level graph: neighbour weights (self-loops stored under the node itself)
    wadj = [dict() for _ in nodes]
    for u, v in graph.edges():
        i, j = index[u], index[v]
        wadj[i][j] = 1
        wadj[j][i] = 1
    membership = list(range(len(nodes)))
    m2 = 2.0 * graph.n_edges

    for _ in range(max_levels):
        n = len(wadj)
        k = [sum(w for j, w in nb.items()) + nb.get(i, 0) for i, nb in enumerate(wadj)]
        comm = list(range(n))
        tot = list(k)
        order = list(range(n))
        rng.shuffle(order)
        moved_any = False
        while True:
            moves = 0
            for i in order:
                ci = comm[i]
                ki = k[i]
                links = defaultdict(float)
                for j, w in wadj[i].items():
                    if j != i:
                        links[comm[j]] += w
                tot[ci] -= ki
                best, best_gain = ci, links.get(ci, 0.0) - tot[ci] * ki / m2
                for c, w in links.items():
                    gain = w - tot[c] * ki / m2
                    if gain > best_gain + 1e-12:
                        best, best_gain = c, gain
                tot[best] += ki
                if best != ci:
                    comm[i] = best
                    moves += 1
            if moves == 0:
                break
            moved_any = True
        if not moved_any:
            break
        relabel = {}
        for c in comm:
            if c not in relabel:
                relabel[c] = len(relabel)
        membership = [relabel[comm[m]] for m in membership]
        new = [defaultdict(float) for _ in relabel]
        for i, nb in enumerate(wadj):
            ci = relabel[comm[i]]
            for j, w in nb.items():
                cj = relabel[comm[j]]
                if i == j:
                    new[ci][ci] += w
                elif ci == cj:
                    # each internal edge is seen from both ends; stored once as a self-loop weight
                    new[ci][ci] += w / 2.0
                else:
                    new[ci][cj] += w
        wadj = [dict(d) for d in new]
        if len(wadj) == 1:
            break
    return Partition.from_assignment(graph, {x: membership[index[x]] for x in nodes})
