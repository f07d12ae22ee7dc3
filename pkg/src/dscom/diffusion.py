"""Ground-truth diffusion models: IC, LT, and feature-conditioned variants.

Every model precomputes one activation probability (IC/PIC) or incoming
weight (LT/PLT) per stored edge, so simulators can do table lookups.  The
feature-conditioned kinds score an edge (u, v) as

    p = sigmoid(a * v' tanh(W [X_u ; X_v]) + b)

with (a, b) calibrated so the mean edge probability hits a target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ParameterError, ValidationError
from .graph import AttributedGraph

KINDS = ("IC", "LT", "PIC", "PLT")


@dataclass
class PICParams:
    W: np.ndarray  # (d, 2F)
    v: np.ndarray  # (d,)
    a: float
    b: float

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64).reshape(-1)
        if self.W.ndim != 2 or self.W.shape[0] != self.v.shape[0]:
            raise ParameterError("W must be (d, 2F) with v of length d")
        if not (np.isfinite(self.W).all() and np.isfinite(self.v).all()):
            raise ParameterError("non-finite score parameters")

    @property
    def d(self) -> int:
        return self.W.shape[0]

    def scores(self, X_src, X_dst):
        """v' tanh(W [X_u ; X_v]) for stacked feature rows."""
        cat = np.concatenate(
            [np.atleast_2d(X_src), np.atleast_2d(X_dst)], axis=1
        )
        return np.tanh(cat @ self.W.T) @ self.v


def _sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class DiffusionModel:
    """Tagged union over the four model kinds.

    ``edge_prob[i]`` is the activation probability (IC/PIC) or the incoming
    weight (LT/PLT) of ``edges[i]``.  Threshold kinds keep per-target sums
    at or below one.
    """

    def __init__(self, kind, edges, edge_prob, n, params=None,
                 calibration=None, rng_seed=None):
        kind = str(kind).upper()
        if kind not in KINDS:
            raise ParameterError(f"unknown model kind {kind!r}")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        edge_prob = np.asarray(edge_prob, dtype=np.float64).reshape(-1)
        if edge_prob.shape[0] != edges.shape[0]:
            raise ParameterError("one probability per edge required")
        if edge_prob.size and (edge_prob.min() < 0 or edge_prob.max() > 1):
            raise ParameterError("edge probabilities must lie in [0, 1]")
        self.kind = kind
        self.edges = edges
        self.edge_prob = edge_prob
        self.n = int(n)
        self.params = params
        self.calibration = calibration
        self.rng_seed = rng_seed
        self._index = {
            (int(u), int(v)): i for i, (u, v) in enumerate(edges)
        }
        if kind in ("LT", "PLT"):
            sums = np.zeros(self.n)
            np.add.at(sums, edges[:, 1], edge_prob)
            if sums.size and sums.max() > 1.0 + 1e-9:
                raise ParameterError(
                    "incoming LT weights exceed 1 at some node"
                )

    @property
    def is_threshold(self) -> bool:
        return self.kind in ("LT", "PLT")

    def lookup(self, u, v) -> float:
        try:
            return float(self.edge_prob[self._index[(int(u), int(v))]])
        except KeyError:
            raise ValidationError(f"({u}, {v}) is not a model edge") from None

    def __repr__(self):
        return f"DiffusionModel(kind={self.kind}, n={self.n}, m={len(self.edge_prob)})"


def _pic_all_edge_probs(params: PICParams, edges, X, a=None, b=None):
    a = params.a if a is None else a
    b = params.b if b is None else b
    s = params.scores(X[edges[:, 0]], X[edges[:, 1]])
    return _sigmoid(a * s + b)


def _fit_offset(params, edges, X, calibration, tol=1e-3):
    """Bisect b (a fixed at 1) until mean edge probability hits target."""
    lo, hi = -1.0, 1.0
    for _ in range(80):
        if _pic_all_edge_probs(params, edges, X, a=1.0, b=lo).mean() < calibration:
            break
        lo *= 2.0
    for _ in range(80):
        if _pic_all_edge_probs(params, edges, X, a=1.0, b=hi).mean() > calibration:
            break
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        mean = _pic_all_edge_probs(params, edges, X, a=1.0, b=mid).mean()
        if abs(mean - calibration) <= tol * 0.1:
            return mid
        if mean < calibration:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    mean = _pic_all_edge_probs(params, edges, X, a=1.0, b=mid).mean()
    if abs(mean - calibration) > tol:
        raise NumericError(
            f"calibration failed: mean {mean:.6f} vs target {calibration}"
        )
    return mid


def _normalize_thresholds(edges, raw, n):
    """Divide each target's incoming weights by max(1, their sum)."""
    sums = np.zeros(n)
    np.add.at(sums, edges[:, 1], raw)
    denom = np.maximum(1.0, sums)
    return raw / denom[edges[:, 1]]


def make_model(kind, graph: AttributedGraph, rng_seed: int,
               calibration: float = 0.1, score_dim: int = 8) -> DiffusionModel:
    """Build a diffusion model over the graph's edges.

    IC draws each probability uniform(0, 2*calibration) clipped to [0, 1];
    PIC draws score parameters standard normal then fits the offset b by
    bisection (a = 1) so the mean edge probability equals the calibration
    target within 1e-3.  LT/PLT take the corresponding raw values and
    normalize per target node.
    """
    kind = str(kind).upper()
    if kind not in KINDS:
        raise ParameterError(f"unknown model kind {kind!r}")
    if not (0.0 < calibration < 1.0):
        raise ParameterError("calibration must lie strictly inside (0, 1)")
    if graph.m == 0:
        raise ValidationError("model needs a graph with at least one edge")
    rng = np.random.default_rng(rng_seed)
    edges = graph.edges
    params = None
    if kind in ("IC", "LT"):
        raw = np.clip(rng.uniform(0.0, 2.0 * calibration, size=graph.m), 0.0, 1.0)
    else:
        F = graph.feature_dim
        params = PICParams(
            W=rng.standard_normal((score_dim, 2 * F)),
            v=rng.standard_normal(score_dim),
            a=1.0,
            b=0.0,
        )
        params.b = float(_fit_offset(params, edges, graph.features, calibration))
        raw = _pic_all_edge_probs(params, edges, graph.features)
    if kind in ("LT", "PLT"):
        table = _normalize_thresholds(edges, raw, graph.n)
    else:
        table = raw
    return DiffusionModel(
        kind, edges, table, graph.n, params=params,
        calibration=calibration, rng_seed=rng_seed,
    )


def edge_probability(model: DiffusionModel, u, v, X=None) -> float:
    """Activation probability / weight of the edge (u, v).

    IC/LT/PLT read the stored table; PIC recomputes from features, which
    must be supplied.
    """
    if model.kind == "PIC":
        if X is None:
            raise ParameterError("PIC probability needs the feature matrix")
        if (int(u), int(v)) not in model._index:
            raise ValidationError(f"({u}, {v}) is not a model edge")
        p = model.params
        s = float(p.scores(X[int(u)], X[int(v)])[0])
        return float(_sigmoid(np.asarray([p.a * s + p.b]))[0])
    return model.lookup(u, v)


def save_model(model: DiffusionModel, path):
    doc = {
        "kind": model.kind,
        "n": model.n,
        "rng_seed": model.rng_seed,
        "calibration": model.calibration,
        "edges": model.edges.tolist(),
        "edge_prob": model.edge_prob.tolist(),
    }
    if model.params is not None:
        doc["pic"] = {
            "W": model.params.W.tolist(),
            "v": model.params.v.tolist(),
            "a": model.params.a,
            "b": model.params.b,
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> DiffusionModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    params = None
    if "pic" in doc:
        p = doc["pic"]
        params = PICParams(W=p["W"], v=p["v"], a=p["a"], b=p["b"])
    return DiffusionModel(
        doc["kind"],
        doc["edges"],
        doc["edge_prob"],
        doc["n"],
        params=params,
        calibration=doc.get("calibration"),
        rng_seed=doc.get("rng_seed"),
    )
