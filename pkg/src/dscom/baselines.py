"""Comparison selectors: random, CELF lazy greedy, latent-space k-means,
uniform-weight spectral ablation, and reverse-reachable-set greedy.

CELF freezes one pool of live-edge worlds for the whole selection, so every
marginal gain is an exact average over the same sample.  On that pool the
spread function is genuinely submodular, which makes lazy evaluation return
exactly the naive greedy sequence.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass

import numpy as np

from .community import kmeans_pp, spectral_cluster
from .diffusion import DiffusionModel
from .errors import ValidationError
from .graph import AttributedGraph
from .relation import WeightedGraph, uniform_weighted
from .seeding import derive_seed
from .selection import SeedSet, allocate_budget, select_seeds

BASELINE_NAMES = ("random", "celf", "gatk", "spec-pr", "rl-ris")


def random_seeds(graph: AttributedGraph, k: int, rng_seed: int = 0) -> SeedSet:
    if k > graph.n:
        raise ValidationError(f"k={k} exceeds node count {graph.n}")
    rng = random.Random(derive_seed(rng_seed, "random-seeds"))
    picked = sorted(rng.sample(range(graph.n), k))
    prov = {node: (-1, rank, 0.0) for rank, node in enumerate(picked)}
    return SeedSet(np.asarray(picked, dtype=np.int64), prov)


# ------------------------------------------------------------------- CELF


def _sample_worlds(graph: AttributedGraph, model: DiffusionModel, R: int,
                   rng: np.random.Generator):
    """R live-edge worlds as per-world out-adjacency dicts."""
    n, m = graph.n, graph.m
    edges = graph.edges
    worlds = []
    if not model.is_threshold:
        mask = rng.random((R, m)) < model.edge_prob[None, :]
        for r in range(R):
            adj = {}
            for i in np.flatnonzero(mask[r]):
                u, v = int(edges[i, 0]), int(edges[i, 1])
                adj.setdefault(u, []).append(v)
            worlds.append(adj)
    else:
        # LT: each node keeps at most one live in-edge, picked by weight
        in_edges = [[] for _ in range(n)]
        for i, (u, v) in enumerate(edges):
            in_edges[int(v)].append((int(u), float(model.edge_prob[i])))
        draws = rng.random((R, n))
        for r in range(R):
            adj = {}
            for v in range(n):
                acc = 0.0
                x = draws[r, v]
                for u, w in in_edges[v]:
                    acc += w
                    if x < acc:
                        adj.setdefault(u, []).append(v)
                        break
            worlds.append(adj)
    return worlds


def _fresh_reach(adj, act, v):
    """Nodes reachable from v through live edges and not yet activated."""
    seen = {v}
    stack = [v]
    gained = []
    while stack:
        u = stack.pop()
        if u not in act:
            gained.append(u)
        for w in adj.get(u, ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return gained


def celf_greedy(graph: AttributedGraph, model: DiffusionModel = None,
                k: int = 1, R: int = 1000, rng_seed: int = 0,
                lazy: bool = True, influence=None) -> SeedSet:
    """Greedy spread maximization with lazy marginal-gain evaluation.

    Gains come from R frozen live-edge worlds of the ground-truth model, or
    from a caller-supplied ``influence(seed_list) -> float`` oracle.  With
    ``lazy=False`` every candidate is re-evaluated each round; the returned
    sequence is identical either way.
    """
    n = graph.n
    if k > n:
        raise ValidationError(f"k={k} exceeds node count {n}")
    if influence is None:
        if model is None:
            raise ValidationError("celf needs a model or an influence oracle")
        rng = np.random.default_rng(derive_seed(rng_seed, "celf-worlds"))
        worlds = _sample_worlds(graph, model, R, rng)
        act = [set() for _ in range(R)]

        def gain_of(v):
            return sum(len(_fresh_reach(w, a, v))
                       for w, a in zip(worlds, act)) / R

        def commit(v):
            for w, a in zip(worlds, act):
                a.update(_fresh_reach(w, a, v))
    else:
        chosen_list = []
        base = [0.0]

        def gain_of(v):
            return influence(sorted(chosen_list + [v])) - base[0]

        def commit(v):
            chosen_list.append(v)
            base[0] = influence(sorted(chosen_list))

    chosen = []
    prov = {}
    if lazy:
        heap = [(-gain_of(v), v) for v in range(n)]
        heapq.heapify(heap)
        for rank in range(k):
            while True:
                neg, v = heapq.heappop(heap)
                fresh = gain_of(v)
                if -neg <= fresh + 1e-12:
                    # stored key was already current: accept
                    best_next = -heap[0][0] if heap else -math.inf
                    if fresh >= best_next - 1e-12:
                        commit(v)
                        chosen.append(v)
                        prov[v] = (-1, rank, float(fresh))
                        break
                heapq.heappush(heap, (-fresh, v))
    else:
        remaining = set(range(n))
        for rank in range(k):
            best_v, best_g = None, -math.inf
            for v in sorted(remaining):
                g = gain_of(v)
                if g > best_g + 1e-12:
                    best_v, best_g = v, g
            commit(best_v)
            remaining.discard(best_v)
            chosen.append(best_v)
            prov[best_v] = (-1, rank, float(best_g))
    return SeedSet(np.asarray(chosen, dtype=np.int64), prov)


# ------------------------------------------------------------------- GATK


def gatk_select(embeddings, k: int, rng_seed: int = 0) -> SeedSet:
    """k-means++ in the latent space; one seed per cluster, the node
    closest to its centroid (ties to the lowest id)."""
    Z = np.asarray(embeddings, dtype=np.float64)
    part = kmeans_pp(Z, k, rng_seed=derive_seed(rng_seed, "gatk"))
    chosen = []
    prov = {}
    for c in range(part.k):
        members = part.members(c)
        centroid = Z[members].mean(axis=0)
        d = np.linalg.norm(Z[members] - centroid, axis=1)
        node = int(members[int(np.argmin(d))])
        chosen.append(node)
        prov[node] = (c, 0, float(d.min()))
    return SeedSet(np.asarray(chosen, dtype=np.int64), prov)


# ---------------------------------------------------------------- Spec-PR


def spec_pr_select(graph: AttributedGraph, k: int, rng_seed: int = 0) -> SeedSet:
    """Ablation: spectral clustering on uniform edge weights, PageRank
    selection with one seed per community."""
    weighted = uniform_weighted(graph)
    part = spectral_cluster(weighted, k, rng_seed=derive_seed(rng_seed, "spec"))
    budgets = allocate_budget(part, k)
    return select_seeds(graph, part, budgets, "pagerank")


# -------------------------------------------------------------------- RIS


@dataclass
class RRSet:
    root: int
    members: np.ndarray


def _reverse_reachable(in_w, root, rng: random.Random):
    seen = {root}
    stack = [root]
    while stack:
        x = stack.pop()
        for u, w in in_w[x]:
            if u not in seen and rng.random() < w:
                seen.add(u)
                stack.append(u)
    return seen


def _in_weighted(weighted: WeightedGraph):
    g = weighted.graph
    in_w = [[] for _ in range(g.n)]
    for i, (u, v) in enumerate(g.edges):
        in_w[int(v)].append((int(u), float(weighted.weights[i])))
    return in_w


def generate_rr_set(graph: AttributedGraph, weighted: WeightedGraph,
                    rng_seed: int = 0) -> RRSet:
    """One reverse-reachable set: uniform root, reverse BFS where each
    in-edge is live with its weight as an IC probability."""
    if weighted.weights.size and (
        weighted.weights.min() < 0 or weighted.weights.max() > 1
    ):
        raise ValidationError("RR sampling needs weights in [0, 1]")
    rng = random.Random(derive_seed(rng_seed, "rr"))
    root = rng.randrange(graph.n)
    members = _reverse_reachable(_in_weighted(weighted), root, rng)
    return RRSet(root, np.asarray(sorted(members), dtype=np.int64))


def _rr_pool(graph, weighted, theta, rng):
    in_w = _in_weighted(weighted)
    return [
        _reverse_reachable(in_w, rng.randrange(graph.n), rng)
        for _ in range(theta)
    ]


def default_theta(n: int) -> int:
    return max(1, int(20 * n * math.log(max(2, n))))


def rl_ris_select(graph: AttributedGraph, learned_weights: WeightedGraph,
                  k: int, theta: int = None, rng_seed: int = 0,
                  max_theta: int = 500000) -> SeedSet:
    """Greedy max coverage over theta RR sets sampled under the learned
    weights, the fixed-budget stand-in for adaptive sketch selectors."""
    if k > graph.n:
        raise ValidationError(f"k={k} exceeds node count {graph.n}")
    if theta is None:
        theta = min(default_theta(graph.n), max_theta)
    if theta < 1:
        raise ValidationError("theta must be >= 1")
    rng = random.Random(derive_seed(rng_seed, "ris"))
    pool = _rr_pool(graph, weighted=learned_weights, theta=theta, rng=rng)
    owner = [[] for _ in range(graph.n)]  # node -> RR set ids containing it
    for i, members in enumerate(pool):
        for u in members:
            owner[u].append(i)
    covered = np.zeros(theta, dtype=bool)
    chosen = []
    prov = {}
    for rank in range(k):
        counts = np.zeros(graph.n, dtype=np.int64)
        for i in np.flatnonzero(~covered):
            for u in pool[i]:
                counts[u] += 1
        best = int(np.argmax(counts))  # ties: lowest id
        for i in owner[best]:
            covered[i] = True
        chosen.append(best)
        prov[best] = (-1, rank, float(counts[best]))
    return SeedSet(np.asarray(chosen, dtype=np.int64), prov)


def ris_influence_estimate(graph: AttributedGraph, weighted: WeightedGraph,
                           seeds, theta: int = 10000,
                           rng_seed: int = 0) -> float:
    """n times the fraction of RR sets hit by the seed set."""
    seed_set = set(int(s) for s in np.asarray(seeds).ravel())
    rng = random.Random(derive_seed(rng_seed, "ris-est"))
    pool = _rr_pool(graph, weighted, theta, rng)
    hit = sum(1 for members in pool if members & seed_set)
    return graph.n * hit / theta
