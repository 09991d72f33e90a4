"""Network and stance metrics.

Modularity, clustering and path length use the undirected, unweighted
projection of the follow graph; density counts directed edges.
"""

from __future__ import annotations

import random
import statistics
from collections import deque
from dataclasses import asdict, dataclass
from typing import Mapping, Optional, Sequence

from .graph import SocialGraph


class Undefined(ValueError):
    """The metric has no value for this graph (too few nodes/edges/labels)."""


def undirected_adjacency(graph: SocialGraph) -> list[set[int]]:
    adj = [set() for _ in range(graph.n)]
    for s, t in graph.edges():
        adj[s].add(t)
        adj[t].add(s)
    return adj


def _as_adj(graph) -> list[set[int]]:
    return graph if isinstance(graph, list) else undirected_adjacency(graph)


def density(graph: SocialGraph) -> float:
    n = graph.n
    if n < 2:
        raise Undefined("density needs at least two users")
    return graph.num_edges / (n * (n - 1))


# ---------------------------------------------------------------------------
# modularity and community detection
# ---------------------------------------------------------------------------

def modularity_of(graph, partition: Sequence[int] | Mapping[int, int]) -> float:
    """Newman Q = sum_c (e_cc / m - (d_c / 2m)^2) on the undirected projection."""
    adj = _as_adj(graph)
    part = [partition[i] for i in range(len(adj))]
    m = sum(len(a) for a in adj) / 2
    if m == 0:
        raise Undefined("modularity of an edgeless graph")
    inside: dict[int, int] = {}
    degree: dict[int, int] = {}
    for u, nbrs in enumerate(adj):
        c = part[u]
        degree[c] = degree.get(c, 0) + len(nbrs)
        inside[c] = inside.get(c, 0) + sum(1 for v in nbrs if part[v] == c)
    # each internal edge was counted from both ends
    return sum(inside[c] / (2 * m) - (degree[c] / (2 * m)) ** 2 for c in degree)


def relabel(labels: Sequence[int]) -> list[int]:
    """Contiguous community indices in order of first appearance."""
    seen: dict[int, int] = {}
    return [seen.setdefault(c, len(seen)) for c in labels]


def connected_components(graph) -> list[int]:
    adj = _as_adj(graph)
    comp = [-1] * len(adj)
    c = 0
    for s in range(len(adj)):
        if comp[s] >= 0:
            continue
        comp[s] = c
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if comp[v] < 0:
                    comp[v] = c
                    queue.append(v)
        c += 1
    return comp


def _local_moves(nbrs: list[dict[int, float]], loops: list[float], comm: list[int],
                 rng: random.Random) -> bool:
    """One Louvain local phase on a weighted graph; mutates ``comm``."""
    n = len(nbrs)
    k = [sum(nbrs[u].values()) + 2 * loops[u] for u in range(n)]
    m2 = sum(k)
    tot: dict[int, float] = {}
    for u in range(n):
        tot[comm[u]] = tot.get(comm[u], 0.0) + k[u]
    moved_any = False
    improved = True
    while improved:
        improved = False
        for u in range(n):
            cu = comm[u]
            links: dict[int, float] = {}
            for v, w in nbrs[u].items():
                links[comm[v]] = links.get(comm[v], 0.0) + w
            tot[cu] -= k[u]
            stay = links.get(cu, 0.0) - tot[cu] * k[u] / m2
            best_gain, best = stay, [cu]
            for c in sorted(links):
                if c == cu:
                    continue
                gain = links[c] - tot[c] * k[u] / m2
                if gain > best_gain + 1e-12:
                    best_gain, best = gain, [c]
                elif abs(gain - best_gain) <= 1e-12 and cu not in best:
                    best.append(c)
            target = best[0] if len(best) == 1 else best[rng.randrange(len(best))]
            tot[target] = tot.get(target, 0.0) + k[u]
            if target != cu:
                comm[u] = target
                improved = moved_any = True
    return moved_any


def _louvain(adj: list[set[int]], start: list[int], rng: random.Random) -> list[int]:
    n = len(adj)
    nbrs = [{v: 1.0 for v in adj[u]} for u in range(n)]
    loops = [0.0] * n
    membership = list(range(n))
    comm = list(start)
    while True:
        moved = _local_moves(nbrs, loops, comm, rng)
        comm = relabel(comm)
        membership = [comm[c] for c in membership]
        size = max(comm) + 1
        if not moved or size == len(nbrs):
            break
        new_nbrs = [dict() for _ in range(size)]
        new_loops = [0.0] * size
        for u in range(len(nbrs)):
            cu = comm[u]
            new_loops[cu] += loops[u]
            for v, w in nbrs[u].items():
                cv = comm[v]
                if cu == cv:
                    new_loops[cu] += w / 2  # seen from both ends
                else:
                    new_nbrs[cu][cv] = new_nbrs[cu].get(cv, 0.0) + w
        nbrs, loops = new_nbrs, new_loops
        comm = list(range(size))
    return relabel(membership)


def detect_communities(graph, rng: Optional[random.Random] = None) -> list[int]:
    """Louvain-style greedy modularity ascent.

    Nodes are swept in ascending id order; ``rng`` only breaks exact ties
    between equally good moves. The result is never worse than the
    connected-components partition.
    """
    adj = _as_adj(graph)
    if sum(len(a) for a in adj) == 0:
        raise Undefined("community detection on an edgeless graph")
    rng = rng if rng is not None else random.Random(0)
    part = _louvain(adj, list(range(len(adj))), rng)
    comps = relabel(connected_components(adj))
    if modularity_of(adj, comps) > modularity_of(adj, part):
        part = _louvain(adj, comps, rng)
    return part


# ---------------------------------------------------------------------------
# clustering and paths
# ---------------------------------------------------------------------------

def local_clustering(graph) -> list[float]:
    adj = _as_adj(graph)
    out = []
    for u, nbrs in enumerate(adj):
        d = len(nbrs)
        if d < 2:
            out.append(0.0)
            continue
        links = sum(len(adj[v] & nbrs) for v in nbrs) / 2
        out.append(links / (d * (d - 1) / 2))
    return out


def clustering_coefficient(graph) -> float:
    vals = local_clustering(graph)
    if not vals:
        raise Undefined("clustering of an empty graph")
    return sum(vals) / len(vals)


def _bfs(adj: list[set[int]], s: int) -> dict[int, int]:
    dist = {s: 0}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def largest_component(graph) -> list[int]:
    adj = _as_adj(graph)
    comp = connected_components(adj)
    sizes: dict[int, int] = {}
    for c in comp:
        sizes[c] = sizes.get(c, 0) + 1
    # component labels follow the smallest member id, so ties go to the lowest
    best = max(sizes, key=lambda c: (sizes[c], -c))
    return [u for u, c in enumerate(comp) if c == best]


def average_path_length(graph) -> float:
    adj = _as_adj(graph)
    if len(adj) < 2:
        raise Undefined("path length needs at least two users")
    nodes = largest_component(adj)
    if len(nodes) < 2:
        raise Undefined("largest component is a single user")
    total = 0
    for s in nodes:
        total += sum(_bfs(adj, s).values())
    pairs = len(nodes) * (len(nodes) - 1)
    return total / pairs


# ---------------------------------------------------------------------------
# stance
# ---------------------------------------------------------------------------

def discretize(opinion: float, thresholds: tuple[float, float] = (-1 / 3, 1 / 3)) -> str:
    lo, hi = thresholds
    if opinion >= hi:
        return "favor"
    if opinion <= lo:
        return "oppose"
    return "neutral"


def stance_accuracy(graph: SocialGraph, ground_truth: Mapping[int, str],
                    thresholds: tuple[float, float] = (-1 / 3, 1 / 3)) -> float:
    labelled = [(u, lab) for u, lab in ground_truth.items() if lab is not None and u < graph.n]
    if not labelled:
        raise Undefined("no labelled users")
    hits = sum(discretize(graph.users[u].opinion, thresholds) == lab for u, lab in labelled)
    return hits / len(labelled)


def ground_truth_of(graph: SocialGraph) -> dict[int, str]:
    return {u.id: u.ground_truth_stance for u in graph.users if u.ground_truth_stance}


def community_opinion_spread(graph: SocialGraph, partition: Sequence[int]) -> float:
    """Mean population std of opinions over communities with >= 2 members."""
    groups: dict[int, list[float]] = {}
    for u, c in enumerate(partition):
        groups.setdefault(c, []).append(graph.users[u].opinion)
    spreads = [statistics.pstdev(v) for v in groups.values() if len(v) >= 2]
    return sum(spreads) / len(spreads) if spreads else 0.0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

METRIC_FIELDS = ("modularity", "clustering", "path_length", "density", "stance_accuracy")


@dataclass
class MetricsReport:
    step: int
    modularity: Optional[float]
    clustering: Optional[float]
    path_length: Optional[float]
    density: Optional[float]
    stance_accuracy: Optional[float] = None
    communities: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _maybe(fn, *args):
    try:
        return fn(*args)
    except Undefined:
        return None


def compute_metrics(graph: SocialGraph, step: int, seed: int = 0,
                    ground_truth: Optional[Mapping[int, str]] = None) -> MetricsReport:
    adj = undirected_adjacency(graph)
    part = _maybe(detect_communities, adj, random.Random(seed))
    labels = ground_truth if ground_truth is not None else ground_truth_of(graph)
    return MetricsReport(
        step=step,
        modularity=modularity_of(adj, part) if part is not None else None,
        clustering=_maybe(clustering_coefficient, adj),
        path_length=_maybe(average_path_length, adj),
        density=_maybe(density, graph),
        stance_accuracy=_maybe(stance_accuracy, graph, labels) if labels else None,
        communities=max(part) + 1 if part is not None else None,
    )
