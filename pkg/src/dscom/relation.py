"""Edge-closeness learning: multi-head graph attention trained with a
skip-gram negative-sampling objective over diffusion chains.

The network follows the usual attention recipe.  For node i and candidate
j in in-neighbors(i) plus i itself,

    e_ij = LeakyReLU(a' [W h_i ; W h_j])
    alpha_ij = softmax_j(e_ij)
    h_i' = sum_j alpha_ij W h_j

Hidden layers concatenate heads and pass through ELU; the final layer
averages heads and stays linear.  Forward and backward passes are written
directly in numpy; gradients are exact and checked against finite
differences in the test suite.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DimensionError, NumericError, ParameterError, ValidationError
from .graph import AttributedGraph, DiffusionDataset
from .seeding import derive_seed


# --------------------------------------------------------------- candidates


class Candidates:
    """Attention candidate pairs: one per edge plus one self-loop per node.

    Candidate c means "target tgt[c] attends to source src[c]".  Sorted by
    (tgt, src) so each target owns one contiguous segment; every segment is
    nonempty thanks to the self-loop.
    """

    def __init__(self, graph: AttributedGraph):
        n, m = graph.n, graph.m
        tgt = np.concatenate([graph.edges[:, 1], np.arange(n, dtype=np.int64)])
        src = np.concatenate([graph.edges[:, 0], np.arange(n, dtype=np.int64)])
        edge_id = np.concatenate(
            [np.arange(m, dtype=np.int64), np.full(n, -1, dtype=np.int64)]
        )
        order = np.lexsort((src, tgt))
        self.tgt = tgt[order]
        self.src = src[order]
        self.edge_id = edge_id[order]
        self.n = n
        self.size = self.tgt.shape[0]
        self.seg_start = np.searchsorted(self.tgt, np.arange(n))
        # scatter position of each stored edge inside the candidate arrays
        self.pos_of_edge = np.empty(m, dtype=np.int64)
        keep = self.edge_id >= 0
        self.pos_of_edge[self.edge_id[keep]] = np.flatnonzero(keep)
        self.pos_of_self = np.flatnonzero(self.edge_id < 0)[
            np.argsort(self.tgt[self.edge_id < 0])
        ]


def _segment_softmax(e, cand: Candidates):
    mx = np.maximum.reduceat(e, cand.seg_start)
    ex = np.exp(e - mx[cand.tgt])
    denom = np.add.reduceat(ex, cand.seg_start)
    return ex / denom[cand.tgt]


def _elu(x):
    # expm1 only sees the non-positive branch, so it cannot overflow
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


# -------------------------------------------------------------------- model


class AttentionModel:
    """Stacked attention layers; per layer and head a projection W of shape
    (F_out, F_in) and an attention vector a of length 2 F_out."""

    def __init__(self, layers, leaky_slope: float = 0.2):
        self.layers = layers  # [{"combine": str, "heads": [{"W","a"}...]}]
        self.leaky_slope = float(leaky_slope)
        for spec in layers:
            if spec["combine"] not in ("concat", "average"):
                raise ParameterError(f"bad combine mode {spec['combine']!r}")
            for head in spec["heads"]:
                head["W"] = np.asarray(head["W"], dtype=np.float64)
                head["a"] = np.asarray(head["a"], dtype=np.float64).reshape(-1)
                if head["a"].shape[0] != 2 * head["W"].shape[0]:
                    raise DimensionError("attention vector must have length 2 F_out")

    @property
    def input_dim(self) -> int:
        return self.layers[0]["heads"][0]["W"].shape[1]

    @property
    def output_dim(self) -> int:
        last = self.layers[-1]
        out = last["heads"][0]["W"].shape[0]
        return out * len(last["heads"]) if last["combine"] == "concat" else out

    def parameters(self):
        """Yield (layer_idx, head_idx, name, array) over all parameters."""
        for li, spec in enumerate(self.layers):
            for hi, head in enumerate(spec["heads"]):
                yield li, hi, "W", head["W"]
                yield li, hi, "a", head["a"]

    def copy(self) -> "AttentionModel":
        layers = [
            {
                "combine": spec["combine"],
                "heads": [
                    {"W": head["W"].copy(), "a": head["a"].copy()}
                    for head in spec["heads"]
                ],
            }
            for spec in self.layers
        ]
        return AttentionModel(layers, self.leaky_slope)


def init_attention_model(input_dim: int, hidden_dim: int = 8,
                         out_dim: int = 8, layers: int = 2, heads: int = 4,
                         final_heads: int = 1, leaky_slope: float = 0.2,
                         rng_seed: int = 0) -> AttentionModel:
    """Glorot-uniform initialization, deterministic in rng_seed."""
    if layers < 1:
        raise ParameterError("need at least one layer")
    rng = np.random.default_rng(derive_seed(rng_seed, "init"))

    def glorot(fan_out, fan_in):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-s, s, size=(fan_out, fan_in))

    specs = []
    dim = input_dim
    for li in range(layers):
        last = li == layers - 1
        h = final_heads if last else heads
        f_out = out_dim if last else hidden_dim
        heads_list = []
        for _ in range(h):
            W = glorot(f_out, dim)
            a = rng.uniform(
                -np.sqrt(6.0 / (2 * f_out + 1)),
                np.sqrt(6.0 / (2 * f_out + 1)),
                size=2 * f_out,
            )
            heads_list.append({"W": W, "a": a})
        specs.append(
            {"combine": "average" if last else "concat", "heads": heads_list}
        )
        dim = f_out if last else f_out * h
    return AttentionModel(specs, leaky_slope)


def save_attention_model(model: AttentionModel, path):
    doc = {
        "leaky_slope": model.leaky_slope,
        "layers": [
            {
                "combine": spec["combine"],
                "heads": [
                    {"W": head["W"].tolist(), "a": head["a"].tolist()}
                    for head in spec["heads"]
                ],
            }
            for spec in model.layers
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_attention_model(path) -> AttentionModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return AttentionModel(doc["layers"], doc["leaky_slope"])


# ------------------------------------------------------------ forward/back


def _forward(model: AttentionModel, cand: Candidates, X):
    """Full forward pass; returns (Z, attention per layer, caches)."""
    if X.shape[1] != model.input_dim:
        raise DimensionError(
            f"feature dim {X.shape[1]} != model input dim {model.input_dim}"
        )
    slope = model.leaky_slope
    H = np.asarray(X, dtype=np.float64)
    attns = []
    caches = []
    for li, spec in enumerate(model.layers):
        last = li == len(model.layers) - 1
        head_outs = []
        head_caches = []
        layer_alpha = []
        for head in spec["heads"]:
            W, a = head["W"], head["a"]
            f_out = W.shape[0]
            Hp = H @ W.T
            z = Hp[cand.tgt] @ a[:f_out] + Hp[cand.src] @ a[f_out:]
            e = np.where(z > 0, z, slope * z)
            alpha = _segment_softmax(e, cand)
            agg = np.zeros((cand.n, f_out))
            np.add.at(agg, cand.tgt, alpha[:, None] * Hp[cand.src])
            head_outs.append(agg)
            layer_alpha.append(alpha)
            head_caches.append({"Hp": Hp, "z": z, "alpha": alpha})
        if spec["combine"] == "concat":
            combined = np.concatenate(head_outs, axis=1)
        else:
            combined = np.mean(head_outs, axis=0)
        if not last:
            out = _elu(combined)
        else:
            out = combined
        caches.append(
            {"input": H, "heads": head_caches, "pre": combined, "last": last}
        )
        attns.append(np.stack(layer_alpha))
        H = out
    return H, attns, caches


def _zero_grads(model: AttentionModel):
    return [
        [
            {"W": np.zeros_like(head["W"]), "a": np.zeros_like(head["a"])}
            for head in spec["heads"]
        ]
        for spec in model.layers
    ]


def _backward(model: AttentionModel, cand: Candidates, caches, dZ):
    """Exact reverse pass; returns parameter gradients shaped like the model."""
    slope = model.leaky_slope
    grads = _zero_grads(model)
    dH = np.asarray(dZ, dtype=np.float64)
    for li in range(len(model.layers) - 1, -1, -1):
        spec = model.layers[li]
        cache = caches[li]
        H_in = cache["input"]
        if not cache["last"]:
            pre = cache["pre"]
            dH = dH * np.where(pre > 0, 1.0, np.exp(np.minimum(pre, 0.0)))
        nheads = len(spec["heads"])
        dH_next = np.zeros_like(H_in)
        for hi, head in enumerate(spec["heads"]):
            W, a = head["W"], head["a"]
            f_out = W.shape[0]
            hc = cache["heads"][hi]
            Hp, z, alpha = hc["Hp"], hc["z"], hc["alpha"]
            if spec["combine"] == "concat":
                dAgg = dH[:, hi * f_out:(hi + 1) * f_out]
            else:
                dAgg = dH / nheads
            # aggregation: agg[t] = sum alpha_c Hp[src_c]
            dAlpha = np.einsum("cf,cf->c", dAgg[cand.tgt], Hp[cand.src])
            dHp = np.zeros_like(Hp)
            np.add.at(dHp, cand.src, alpha[:, None] * dAgg[cand.tgt])
            # softmax
            sdot = np.add.reduceat(alpha * dAlpha, cand.seg_start)
            de = alpha * (dAlpha - sdot[cand.tgt])
            dz = de * np.where(z > 0, 1.0, slope)
            # logits: z_c = a1.Hp[tgt] + a2.Hp[src]
            a1, a2 = a[:f_out], a[f_out:]
            grads[li][hi]["a"][:f_out] += dz @ Hp[cand.tgt]
            grads[li][hi]["a"][f_out:] += dz @ Hp[cand.src]
            np.add.at(dHp, cand.tgt, dz[:, None] * a1[None, :])
            np.add.at(dHp, cand.src, dz[:, None] * a2[None, :])
            grads[li][hi]["W"] += dHp.T @ H_in
            dH_next += dHp @ W
        dH = dH_next
    return grads


def gat_forward(model: AttentionModel, graph: AttributedGraph, X=None):
    """Run the network; returns (embeddings, attention arrays per layer).

    Each attention array has shape (heads, candidates); candidate order
    comes from ``Candidates(graph)``.
    """
    if X is None:
        X = graph.features
    cand = Candidates(graph)
    Z, attns, _ = _forward(model, cand, np.asarray(X, dtype=np.float64))
    return Z, attns


# ----------------------------------------------------------------- corpus


@dataclass
class ChainCorpus:
    chains: list
    window: int


def build_chains(dataset: DiffusionDataset, walks_per_pair: int = 1,
                 max_len: int = 8, rng_seed: int = 0) -> ChainCorpus:
    """Diffusion chains: every recorded pair plus weighted walks from it.

    Pairs form a directed multigraph (multiplicity = weight).  Each pair
    occurrence contributes its own 2-chain and ``walks_per_pair`` random
    walks from the pair's source, following outgoing pairs with probability
    proportional to multiplicity, stopping at ``max_len`` or a sink.
    """
    if dataset.size == 0:
        raise ValidationError("cannot build chains from an empty dataset")
    uniq, counts = dataset.multiplicities()
    succ = {}
    for (u, v), c in zip(uniq, counts):
        succ.setdefault(int(u), []).append((int(v), int(c)))
    rng = random.Random(derive_seed(rng_seed, "walks"))
    chains = []
    for u, v in dataset.pairs:
        u, v = int(u), int(v)
        chains.append([u, v])
        for _ in range(walks_per_pair):
            walk = [u]
            node = u
            while len(walk) < max_len and node in succ:
                options = succ[node]
                total = sum(c for _, c in options)
                r = rng.random() * total
                acc = 0.0
                for nxt, c in options:
                    acc += c
                    if r < acc:
                        break
                walk.append(nxt)
                node = nxt
            if len(walk) >= 2:
                chains.append(walk)
    return ChainCorpus(chains, window=2)


def window_positives(corpus: ChainCorpus, window=None) -> np.ndarray:
    """(center, context) pairs within the window, both directions."""
    w = corpus.window if window is None else window
    pairs = []
    for chain in corpus.chains:
        L = len(chain)
        for i in range(L):
            for j in range(max(0, i - w), min(L, i + w + 1)):
                if j != i:
                    pairs.append((chain[i], chain[j]))
    if not pairs:
        raise ValidationError("corpus produced no training pairs")
    return np.asarray(pairs, dtype=np.int64)


# -------------------------------------------------------------- objective


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _skipgram_loss_grad(Z, positives, negatives):
    """Mean skip-gram NS loss over positives and its gradient w.r.t. Z.

    negatives has shape (P, K): row i holds the negative nodes for
    positives[i].
    """
    Z = np.asarray(Z, dtype=np.float64)
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 2)
    negatives = np.asarray(negatives, dtype=np.int64)
    P = positives.shape[0]
    if negatives.shape[0] != P:
        raise DimensionError("one negative row per positive required")
    u, v = positives[:, 0], positives[:, 1]
    pos_dot = np.einsum("pf,pf->p", Z[u], Z[v])
    neg_dot = np.einsum("pf,pkf->pk", Z[u], Z[negatives])
    loss = -(_log_sigmoid(pos_dot).sum() + _log_sigmoid(-neg_dot).sum()) / P
    dZ = np.zeros_like(Z)
    pos_coef = -(1.0 - expit(pos_dot)) / P  # d/d(dot) of -log sigmoid(dot)
    np.add.at(dZ, u, pos_coef[:, None] * Z[v])
    np.add.at(dZ, v, pos_coef[:, None] * Z[u])
    neg_coef = expit(neg_dot) / P
    np.add.at(dZ, u, np.einsum("pk,pkf->pf", neg_coef, Z[negatives]))
    np.add.at(dZ, negatives, neg_coef[:, :, None] * Z[u][:, None, :])
    return float(loss), dZ


def sample_negatives(n, positives, K, rng):
    """Uniform negatives from [0, n), resampled to dodge each context node."""
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 2)
    neg = rng.integers(0, n, size=(positives.shape[0], K))
    ctx = positives[:, 1][:, None]
    for _ in range(64):
        clash = neg == ctx
        if not clash.any():
            break
        neg[clash] = rng.integers(0, n, size=int(clash.sum()))
    return neg


def skipgram_objective(Z, positives, negatives_per_positive: int = 5,
                       rng_seed: int = 0):
    """Sample negatives, then return (mean loss, gradient w.r.t. Z)."""
    if negatives_per_positive < 1:
        raise ParameterError("need at least one negative per positive")
    rng = np.random.default_rng(derive_seed(rng_seed, "negatives"))
    Z = np.asarray(Z, dtype=np.float64)
    negatives = sample_negatives(Z.shape[0], positives,
                                 negatives_per_positive, rng)
    return _skipgram_loss_grad(Z, positives, negatives)


def loss_and_param_grads(model: AttentionModel, graph: AttributedGraph, X,
                         positives, negatives):
    """End-to-end loss and exact parameter gradients for fixed negatives."""
    cand = Candidates(graph)
    Z, _, caches = _forward(model, cand, np.asarray(X, dtype=np.float64))
    loss, dZ = _skipgram_loss_grad(Z, positives, negatives)
    grads = _backward(model, cand, caches, dZ)
    return loss, grads


# --------------------------------------------------------------- training


@dataclass
class TrainConfig:
    layers: int = 2
    heads: int = 4
    final_heads: int = 1
    hidden_dim: int = 8
    out_dim: int = 8
    leaky_slope: float = 0.2
    epochs: int = 500
    lr: float = 0.03
    momentum: float = 0.95
    negatives: int = 5
    window: int = 1
    walks_per_pair: int = 1
    max_walk_len: int = 8
    batch_size: int = 0  # 0 takes every positive in one batch per epoch
    rng_seed: int = 0

    def __post_init__(self):
        if self.negatives < 1:
            raise ParameterError("negatives per positive must be >= 1")
        if self.window < 1:
            raise ParameterError("window must be >= 1")
        if self.epochs < 0 or self.lr <= 0 or self.batch_size < 0:
            raise ParameterError("bad training hyperparameters")


def train_relation_model(graph: AttributedGraph, dataset: DiffusionDataset,
                         config: TrainConfig = None):
    """SGD with momentum on the skip-gram objective through the network.

    Returns (model, per-epoch mean loss history).  epochs=0 returns the
    seeded initialization untouched.
    """
    if config is None:
        config = TrainConfig()
    model = init_attention_model(
        graph.feature_dim, config.hidden_dim, config.out_dim, config.layers,
        config.heads, config.final_heads, config.leaky_slope,
        rng_seed=config.rng_seed,
    )
    if config.epochs == 0:
        return model, []
    corpus = build_chains(
        dataset, config.walks_per_pair, config.max_walk_len,
        rng_seed=derive_seed(config.rng_seed, "chains"),
    )
    positives = window_positives(corpus, config.window)
    cand = Candidates(graph)
    X = graph.features
    rng = np.random.default_rng(derive_seed(config.rng_seed, "sgd"))
    velocity = _zero_grads(model)
    history = []
    P = positives.shape[0]
    step = config.batch_size if config.batch_size > 0 else P
    for epoch in range(config.epochs):
        order = rng.permutation(P)
        losses = []
        for lo in range(0, P, step):
            batch = positives[order[lo:lo + step]]
            negatives = sample_negatives(graph.n, batch, config.negatives, rng)
            Z, _, caches = _forward(model, cand, X)
            loss, dZ = _skipgram_loss_grad(Z, batch, negatives)
            grads = _backward(model, cand, caches, dZ)
            for li, spec in enumerate(model.layers):
                for hi, head in enumerate(spec["heads"]):
                    for name in ("W", "a"):
                        vel = velocity[li][hi][name]
                        vel *= config.momentum
                        vel -= config.lr * grads[li][hi][name]
                        head[name] += vel
            losses.append(loss)
        mean_loss = float(np.mean(losses))
        if not np.isfinite(mean_loss):
            raise NumericError(f"training diverged at epoch {epoch}")
        history.append(mean_loss)
    return model, history


# ------------------------------------------------------------- extraction


class WeightedGraph:
    """A graph plus one weight per directed edge (and optional self mass)."""

    def __init__(self, graph: AttributedGraph, weights, self_mass=None):
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if weights.shape[0] != graph.m:
            raise DimensionError("need exactly one weight per edge")
        self.graph = graph
        self.weights = weights
        self.self_mass = (
            None if self_mass is None
            else np.asarray(self_mass, dtype=np.float64).reshape(-1)
        )

    def weight(self, u, v) -> float:
        return float(self.weights[self.graph.edge_id(u, v)])

    def __repr__(self):
        return f"WeightedGraph(n={self.graph.n}, m={self.graph.m})"


def extract_edge_weights(model: AttentionModel, graph: AttributedGraph,
                         X=None) -> WeightedGraph:
    """Edge weight for (u, v) = final-layer attention of target v on source
    u, averaged over heads.  Weights per target plus the target's
    self-attention mass sum to 1 up to 1e-6, which is checked here."""
    if X is None:
        X = graph.features
    cand = Candidates(graph)
    _, attns, _ = _forward(model, cand, np.asarray(X, dtype=np.float64))
    final = attns[-1].mean(axis=0)  # (C,)
    weights = final[cand.pos_of_edge]
    self_mass = final[cand.pos_of_self]
    sums = self_mass.copy()
    if graph.m:
        np.add.at(sums, graph.edges[:, 1], weights)
    if np.abs(sums - 1.0).max() > 1e-6:
        raise NumericError("attention mass per target does not sum to 1")
    return WeightedGraph(graph, weights, self_mass)


def save_weighted_graph(weighted: WeightedGraph, path):
    with open(path, "w", encoding="utf-8") as fh:
        for (u, v), w in zip(weighted.graph.edges, weighted.weights):
            fh.write(f"{u} {v} {w:.9g}\n")


def load_weighted_graph(path, graph: AttributedGraph) -> WeightedGraph:
    weights = np.zeros(graph.m)
    seen = np.zeros(graph.m, dtype=bool)
    from .graph import _tokenize

    for lineno, toks in _tokenize(path):
        if len(toks) != 3:
            raise ValidationError(f"{path}:{lineno}: expected 'src dst weight'")
        u, v, w = int(toks[0]), int(toks[1]), float(toks[2])
        idx = graph.edge_id(u, v)
        weights[idx] = w
        seen[idx] = True
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        u, v = graph.edges[missing]
        raise ValidationError(f"{path}: missing weight for edge ({u}, {v})")
    return WeightedGraph(graph, weights)


def uniform_weighted(graph: AttributedGraph) -> WeightedGraph:
    """Every edge weight 1; the no-learning ablation input."""
    return WeightedGraph(graph, np.ones(graph.m))
