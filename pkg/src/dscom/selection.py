"""Centrality measures and budgeted per-community seed selection.

Strategies are named by their centrality: degree (D-D), k-core (D-K),
PageRank (D-PR), closeness (D-C).  Scores are always computed on the
community-induced subgraph; ties break by higher global degree, then lower
node id, so selection is reproducible.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ValidationError
from .graph import AttributedGraph, induced_subgraph
from .community import Partition

MEASURES = ("degree", "kcore", "pagerank", "closeness")

STRATEGY_MEASURES = {
    "D-D": "degree",
    "D-K": "kcore",
    "D-PR": "pagerank",
    "D-C": "closeness",
}


@dataclass
class CentralityScores:
    measure: str
    scores: np.ndarray


@dataclass
class SeedSet:
    nodes: np.ndarray  # sorted node ids
    provenance: dict = field(default_factory=dict)  # node -> (community, rank, score)
    shortfall: list = field(default_factory=list)  # communities short on nodes

    def __post_init__(self):
        self.nodes = np.unique(np.asarray(self.nodes, dtype=np.int64))

    def __len__(self):
        return int(self.nodes.size)


def save_seed_set(seeds: SeedSet, path):
    rows = sorted(
        ((node, *info) for node, info in seeds.provenance.items()),
        key=lambda r: (r[1], r[2]),
    )
    with open(path, "w", encoding="utf-8") as fh:
        if rows:
            for node, comm, rank, score in rows:
                fh.write(f"{node} {comm} {rank} {score:.9g}\n")
        else:
            for node in seeds.nodes:
                fh.write(f"{node} -1 0 0\n")


def load_seed_set(path) -> SeedSet:
    from .graph import _tokenize

    nodes = []
    prov = {}
    for lineno, toks in _tokenize(path):
        if len(toks) != 4:
            raise ValidationError(
                f"{path}:{lineno}: expected 'node community rank score'"
            )
        node = int(toks[0])
        nodes.append(node)
        prov[node] = (int(toks[1]), int(toks[2]), float(toks[3]))
    return SeedSet(np.asarray(nodes, dtype=np.int64), prov)


# ------------------------------------------------------------- centralities


def _degree_scores(graph: AttributedGraph) -> np.ndarray:
    return (graph.out_degree() + graph.in_degree()).astype(np.float64)


def _undirected_neighbors(graph: AttributedGraph):
    nbrs = [set() for _ in range(graph.n)]
    for u, v in graph.edges:
        nbrs[int(u)].add(int(v))
        nbrs[int(v)].add(int(u))
    return nbrs


def _coreness(graph: AttributedGraph) -> np.ndarray:
    """Min-degree peeling on the undirected simple view."""
    n = graph.n
    nbrs = _undirected_neighbors(graph)
    core = np.zeros(n, dtype=np.int64)
    cur = np.array([len(s) for s in nbrs], dtype=np.int64)
    removed = [False] * n
    heap = [(int(cur[v]), v) for v in range(n)]
    heapq.heapify(heap)
    maxcore = 0
    while heap:
        d, v = heapq.heappop(heap)
        if removed[v] or d != cur[v]:
            continue
        removed[v] = True
        maxcore = max(maxcore, int(cur[v]))
        core[v] = maxcore
        for u in nbrs[v]:
            if not removed[u] and cur[u] > cur[v]:
                cur[u] -= 1
                heapq.heappush(heap, (int(cur[u]), u))
    return core


def _pagerank(graph: AttributedGraph, damping: float = 0.85,
              tol: float = 1e-10, max_iter: int = 100000) -> np.ndarray:
    n = graph.n
    x = np.full(n, 1.0 / n)
    out_deg = graph.out_degree().astype(np.float64)
    dangling = out_deg == 0
    src = graph.edges[:, 0]
    dst = graph.edges[:, 1]
    inv_out = np.zeros(n)
    inv_out[~dangling] = 1.0 / out_deg[~dangling]
    for _ in range(max_iter):
        contrib = x * inv_out
        nxt = np.zeros(n)
        np.add.at(nxt, dst, contrib[src])
        nxt = (1.0 - damping) / n + damping * (nxt + x[dangling].sum() / n)
        if np.abs(nxt - x).sum() < tol:
            x = nxt
            break
        x = nxt
    return x


def _closeness(graph: AttributedGraph) -> np.ndarray:
    """Reachability-corrected closeness over outgoing shortest paths:
    (r / (n-1)) * (r / sum of distances), 0 for nodes reaching nothing."""
    n = graph.n
    out = graph.out_adj
    scores = np.zeros(n)
    if n <= 1:
        return scores
    for v in range(n):
        dist = {v: 0}
        q = deque([v])
        total = 0
        while q:
            u = q.popleft()
            for w in out[u]:
                w = int(w)
                if w not in dist:
                    dist[w] = dist[u] + 1
                    total += dist[w]
                    q.append(w)
        r = len(dist) - 1
        if r > 0 and total > 0:
            scores[v] = (r / (n - 1)) * (r / total)
    return scores


def centrality(graph: AttributedGraph, measure: str,
               damping: float = 0.85, tol: float = 1e-10) -> CentralityScores:
    if graph.n == 0:
        raise ValidationError("graph is empty")
    if measure == "degree":
        scores = _degree_scores(graph)
    elif measure == "kcore":
        scores = _coreness(graph).astype(np.float64)
    elif measure == "pagerank":
        scores = _pagerank(graph, damping=damping, tol=tol)
    elif measure == "closeness":
        scores = _closeness(graph)
    else:
        raise ParameterError(f"unknown centrality measure {measure!r}")
    return CentralityScores(measure, scores)


# ---------------------------------------------------------------- budgets


def allocate_budget(partition: Partition, k: int) -> np.ndarray:
    """Per-community seed budgets summing to min(k, reachable total).

    k equal to the community count gives one seed each; k above it uses
    largest-remainder apportionment by community size; k below it hands one
    seed to each of the k largest communities.
    """
    if k < 1:
        raise ValidationError("budget k must be >= 1")
    c = partition.k
    sizes = partition.sizes()
    budgets = np.zeros(c, dtype=np.int64)
    if k == c:
        budgets[:] = 1
    elif k < c:
        order = sorted(range(c), key=lambda i: (-sizes[i], i))
        for i in order[:k]:
            budgets[i] = 1
    else:
        total = sizes.sum()
        quota = k * sizes / total
        floors = np.floor(quota).astype(np.int64)
        budgets = floors
        rem = k - floors.sum()
        frac = quota - floors
        order = sorted(range(c), key=lambda i: (-frac[i], -sizes[i], i))
        for i in order[:rem]:
            budgets[i] += 1
    return budgets


def _spreader_scores(sub: AttributedGraph, measure: str) -> np.ndarray:
    # Seeds are ranked by outgoing reach.  PageRank mass flows along edge
    # direction and accumulates on frequently-cited nodes, so the selector
    # scores the reversed subgraph; degree and kcore ignore orientation and
    # closeness already follows outgoing paths.
    if measure == "pagerank":
        sub = AttributedGraph(sub.n, sub.edges[:, ::-1].copy(), sub.features)
    return centrality(sub, measure).scores


def select_seeds(graph: AttributedGraph, partition: Partition, budgets,
                 measure: str) -> SeedSet:
    """Top-budget nodes by subgraph centrality, independently per community.

    Centralities are oriented toward influence: a seed should reach many
    nodes, not be reachable from many.
    """
    budgets = np.asarray(budgets, dtype=np.int64)
    if budgets.shape[0] != partition.k:
        raise ValidationError("one budget per community required")
    if measure not in MEASURES:
        raise ParameterError(f"unknown centrality measure {measure!r}")
    global_degree = _degree_scores(graph)
    chosen = []
    prov = {}
    shortfall = []
    for c in range(partition.k):
        budget = int(budgets[c])
        if budget == 0:
            continue
        members = partition.members(c)
        sub, mapping = induced_subgraph(graph, members)
        scores = _spreader_scores(sub, measure)
        back = {new: old for old, new in mapping.items()}
        take = budget
        if budget > members.size:
            shortfall.append(c)
            take = members.size
        ranked = sorted(
            range(sub.n),
            key=lambda i: (-scores[i], -global_degree[back[i]], back[i]),
        )
        for rank, i in enumerate(ranked[:take]):
            node = back[i]
            chosen.append(node)
            prov[node] = (c, rank, float(scores[i]))
    return SeedSet(np.asarray(chosen, dtype=np.int64), prov, shortfall)
