"""Cascade simulation, dataset generation, MC estimation, exact oracles.

Simulators run synchronous rounds.  Under IC each newly activated node gets
one attempt per still-inactive out-neighbor; attempts within a round are
processed in ascending activator id and the first success claims the
(activator, activated) pair.  Under LT every node draws its threshold once
per run and activates when the incoming active weight reaches it; the
recorded activator is the highest-weight active in-neighbor (ties go to the
lowest id).

The exact oracle enumerates live-edge worlds and is the ground truth the
Monte-Carlo estimator is tested against.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import SizeLimitError, ValidationError
from .graph import AttributedGraph, DiffusionDataset, as_node_set
from .diffusion import DiffusionModel
from .seeding import derive_seed


@dataclass
class CascadeTrace:
    activated: np.ndarray  # sorted node ids
    pairs: list  # (activator, activated) in activation order
    rounds: int
    seeds: np.ndarray


@dataclass
class InfluenceEstimate:
    mean: float
    std: float
    replications: int
    repeats: int
    batch_means: list = field(default_factory=list)


class _SimContext:
    """Per-(graph, model) adjacency tables for the hot simulation loop."""

    def __init__(self, graph: AttributedGraph, model: DiffusionModel):
        if model.n != graph.n:
            raise ValidationError("model and graph disagree on node count")
        if model.edges.shape != graph.edges.shape or not np.array_equal(
            model.edges, graph.edges
        ):
            raise ValidationError("model edges do not match the graph")
        self.n = graph.n
        self.threshold = model.is_threshold
        prob = model.edge_prob
        # out_(u) -> list of (v, p) ascending by v
        self.out = [[] for _ in range(graph.n)]
        for i, (u, v) in enumerate(graph.edges):
            self.out[int(u)].append((int(v), float(prob[i])))
        if self.threshold:
            # in-neighbors by descending weight then ascending id, for
            # activator attribution
            self.in_sorted = [[] for _ in range(graph.n)]
            for i, (u, v) in enumerate(graph.edges):
                self.in_sorted[int(v)].append((float(prob[i]), int(u)))
            for v in range(graph.n):
                self.in_sorted[v].sort(key=lambda t: (-t[0], t[1]))


def _prepare(graph, model) -> _SimContext:
    cache = getattr(model, "_sim_cache", None)
    if cache is not None and cache[0] is graph:
        return cache[1]
    ctx = _SimContext(graph, model)
    model._sim_cache = (graph, ctx)
    return ctx


def _run_ic(ctx: _SimContext, seeds, rng: random.Random):
    active = [False] * ctx.n
    for s in seeds:
        active[s] = True
    frontier = sorted(seeds)
    pairs = []
    rounds = 0
    out = ctx.out
    rand = rng.random
    while frontier:
        nxt = []
        for u in frontier:
            for v, p in out[u]:
                if not active[v] and rand() < p:
                    active[v] = True
                    pairs.append((u, v))
                    nxt.append(v)
        if nxt:
            rounds += 1
        frontier = sorted(nxt)
    return active, pairs, rounds


def simulate_cascade(graph: AttributedGraph, model: DiffusionModel,
                     seeds, rng_seed: int) -> CascadeTrace:
    """Run one cascade; identical rng_seed gives an identical trace."""
    seed_arr = as_node_set(seeds, graph.n)
    if seed_arr.size == 0:
        raise ValidationError("seed set must be nonempty")
    ctx = _prepare(graph, model)
    rng = random.Random(rng_seed)
    seed_list = [int(s) for s in seed_arr]
    if ctx.threshold:
        active, pairs, rounds = _run_lt_impl(ctx, seed_list, rng)
    else:
        active, pairs, rounds = _run_ic(ctx, seed_list, rng)
    activated = np.flatnonzero(active).astype(np.int64)
    return CascadeTrace(activated, pairs, rounds, seed_arr)


def _run_lt_impl(ctx: _SimContext, seeds, rng: random.Random):
    theta = [rng.random() for _ in range(ctx.n)]
    active = [False] * ctx.n
    for s in seeds:
        active[s] = True
    incoming = [0.0] * ctx.n
    pairs = []
    rounds = 0
    frontier = sorted(seeds)
    out = ctx.out
    while frontier:
        dirty = set()
        for u in frontier:
            for v, w in out[u]:
                if not active[v]:
                    incoming[v] += w
                    dirty.add(v)
        nxt = [v for v in sorted(dirty) if incoming[v] >= theta[v]]
        # activators are read from the pre-round active set
        for v in nxt:
            activator = next(
                u for _, u in ctx.in_sorted[v] if active[u]
            )
            pairs.append((activator, v))
        for v in nxt:
            active[v] = True
        if nxt:
            rounds += 1
        frontier = nxt
    return active, pairs, rounds


def generate_dataset(graph: AttributedGraph, model: DiffusionModel,
                     N: int, seed_fraction: float = 0.01,
                     rng_seed: int = 0, max_cascades=None) -> DiffusionDataset:
    """Simulate cascades from random seed sets until N pairs are collected.

    Each cascade samples ceil(seed_fraction * n) uniform seeds, runs one
    simulation, and contributes its recorded pairs under a fresh cascade
    id.  The result is truncated to exactly N pairs.  If the model never
    diffuses, generation stops at the cascade cap and the dataset comes
    back short with ``incomplete=True``.
    """
    if N < 1:
        raise ValidationError("pair budget N must be >= 1")
    if not (0.0 < seed_fraction <= 1.0):
        raise ValidationError("seed_fraction must lie in (0, 1]")
    if max_cascades is None:
        max_cascades = max(1000, 20 * N)
    n_seeds = max(1, math.ceil(seed_fraction * graph.n))
    picker = random.Random(derive_seed(rng_seed, "dataset-seeds"))
    ids = list(range(graph.n))
    pairs = []
    cids = []
    idx = 0
    while len(pairs) < N and idx < max_cascades:
        seeds = picker.sample(ids, n_seeds)
        trace = simulate_cascade(
            graph, model, seeds, derive_seed(rng_seed, "cascade", idx)
        )
        cid = f"c{idx}"
        for pair in trace.pairs:
            pairs.append(pair)
            cids.append(cid)
        idx += 1
    incomplete = len(pairs) < N
    return DiffusionDataset(pairs[:N], cids[:N], incomplete=incomplete)


def estimate_influence(graph: AttributedGraph, model: DiffusionModel,
                       seeds, R: int = 1000, repeats: int = 10,
                       rng_seed: int = 0) -> InfluenceEstimate:
    """Monte-Carlo influence: repeats batches of R simulations each.

    The mean is the grand mean of activated-set sizes over all
    repeats * R runs; the std is taken across the batch means.
    Replication i uses an independently derived seed, so batches are
    embarrassingly parallel in principle and deterministic in practice.
    """
    if R < 1 or repeats < 1:
        raise ValidationError("R and repeats must be >= 1")
    seed_arr = as_node_set(seeds, graph.n)
    if seed_arr.size == 0:
        raise ValidationError("seed set must be nonempty")
    ctx = _prepare(graph, model)
    seed_list = [int(s) for s in seed_arr]
    run = _run_lt_impl if ctx.threshold else _run_ic
    batch_means = []
    total = 0.0
    i = 0
    for _ in range(repeats):
        acc = 0
        for _ in range(R):
            rng = random.Random(derive_seed(rng_seed, i))
            active, _, _ = run(ctx, seed_list, rng)
            acc += sum(active)
            i += 1
        batch_means.append(acc / R)
        total += acc
    mean = total / (R * repeats)
    if repeats > 1:
        bm = np.asarray(batch_means)
        std = float(bm.std(ddof=1))
    else:
        std = 0.0
    return InfluenceEstimate(float(mean), std, R, repeats, batch_means)


def _reachable_size(n, out_live, seeds):
    seen = [False] * n
    stack = list(seeds)
    for s in seeds:
        seen[s] = True
    count = len(stack)
    while stack:
        u = stack.pop()
        for v in out_live[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count


def exact_influence_oracle(graph: AttributedGraph, model: DiffusionModel,
                           seeds) -> float:
    """Exact expected spread by live-edge enumeration (tiny instances).

    IC/PIC: all 2^|E| edge subsets, each weighted by its Bernoulli
    product.  LT/PLT: every node independently keeps at most one live
    in-edge, edge (u, v) with probability w(u, v) and none with the
    remaining mass; the enumeration cap is 2^20 combinations.
    """
    seed_arr = as_node_set(seeds, graph.n)
    if seed_arr.size == 0:
        raise ValidationError("seed set must be nonempty")
    seed_list = [int(s) for s in seed_arr]
    n, m = graph.n, graph.m
    edges = [(int(u), int(v)) for u, v in graph.edges]
    prob = model.edge_prob

    if not model.is_threshold:
        if m > 20:
            raise SizeLimitError(f"IC oracle caps at 20 edges, got {m}")
        total = 0.0
        for mask in range(1 << m):
            w = 1.0
            out_live = [[] for _ in range(n)]
            for i in range(m):
                if mask >> i & 1:
                    w *= prob[i]
                    out_live[edges[i][0]].append(edges[i][1])
                else:
                    w *= 1.0 - prob[i]
            if w > 0.0:
                total += w * _reachable_size(n, out_live, seed_list)
        return total

    # LT: per-node choice of one live in-edge or none
    in_options = [[] for _ in range(n)]
    for i, (u, v) in enumerate(edges):
        in_options[v].append((u, float(prob[i])))
    combos = 1
    for v in range(n):
        combos *= len(in_options[v]) + 1
        if combos > 1 << 20:
            raise SizeLimitError("LT oracle enumeration exceeds 2^20 worlds")
    total = 0.0

    def recurse(v, weight, out_live):
        nonlocal total
        if weight == 0.0:
            return
        if v == n:
            total += weight * _reachable_size(n, out_live, seed_list)
            return
        rest = 1.0 - sum(p for _, p in in_options[v])
        recurse(v + 1, weight * rest, out_live)
        for u, p in in_options[v]:
            out_live[u].append(v)
            recurse(v + 1, weight * p, out_live)
            out_live[u].pop()

    recurse(0, 1.0, [[] for _ in range(n)])
    return total
