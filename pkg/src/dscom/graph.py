"""Attributed directed graph container, file loaders, and subgraph tools.

The graph is immutable after construction: node ids are dense integers in
[0, n), edges are stored as an (m, 2) int64 array with no duplicates and no
self-loops, and every node carries a real-valued feature row.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParseError, ValidationError


class AttributedGraph:
    """Directed graph with an n x F feature matrix.

    Adjacency is exposed as ``out_adj[u]`` / ``in_adj[v]`` (int64 arrays of
    neighbor ids, ascending) plus ``out_edge_ids[u]`` / ``in_edge_ids[v]``
    giving the matching row indices into ``edges``.
    """

    def __init__(self, n, edges, features, labels=None):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if n <= 0:
            raise ValidationError("graph needs at least one node")
        if features.shape[0] != n:
            raise DimensionError(
                f"feature rows {features.shape[0]} != node count {n}"
            )
        if features.shape[1] < 1:
            raise DimensionError("feature matrix needs at least one column")
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise ValidationError(
                    f"edge endpoint out of range [0, {n})"
                )
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValidationError("self-loops are not allowed")
        # canonical order: by (src, dst); also detects duplicates
        if edges.size:
            order = np.lexsort((edges[:, 1], edges[:, 0]))
            edges = edges[order]
            dup = np.all(edges[1:] == edges[:-1], axis=1)
            if np.any(dup):
                u, v = edges[1:][dup][0]
                raise ValidationError(f"duplicate edge ({u}, {v})")

        self.n = int(n)
        self.edges = edges
        self.features = features
        self.labels = labels  # original node labels, index = node id
        self.m = edges.shape[0]

        self.out_adj = [None] * self.n
        self.in_adj = [None] * self.n
        self.out_edge_ids = [None] * self.n
        self.in_edge_ids = [None] * self.n
        src = edges[:, 0]
        dst = edges[:, 1]
        eid = np.arange(self.m, dtype=np.int64)
        for node in range(self.n):
            mask = src == node
            self.out_adj[node] = dst[mask]
            self.out_edge_ids[node] = eid[mask]
        in_order = np.lexsort((src, dst))
        src_i, dst_i, eid_i = src[in_order], dst[in_order], eid[in_order]
        for node in range(self.n):
            mask = dst_i == node
            self.in_adj[node] = src_i[mask]
            self.in_edge_ids[node] = eid_i[mask]
        self._edge_index = {
            (int(u), int(v)): int(i) for i, (u, v) in enumerate(edges)
        }

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def has_edge(self, u, v) -> bool:
        return (int(u), int(v)) in self._edge_index

    def edge_id(self, u, v) -> int:
        try:
            return self._edge_index[(int(u), int(v))]
        except KeyError:
            raise ValidationError(f"({u}, {v}) is not an edge") from None

    def out_degree(self):
        deg = np.zeros(self.n, dtype=np.int64)
        if self.m:
            np.add.at(deg, self.edges[:, 0], 1)
        return deg

    def in_degree(self):
        deg = np.zeros(self.n, dtype=np.int64)
        if self.m:
            np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def __repr__(self):
        return (
            f"AttributedGraph(n={self.n}, m={self.m}, F={self.feature_dim})"
        )


class DiffusionDataset:
    """Multiset of (influencer, influenced) pairs grouped by cascade.

    ``pairs`` is an (N, 2) int64 array with repetition; ``cascade_ids`` is a
    parallel list of string labels.  ``incomplete`` flags a generation run
    that gave up before reaching its pair budget.
    """

    def __init__(self, pairs, cascade_ids=None, incomplete=False):
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        self.pairs = pairs
        self.size = pairs.shape[0]
        if cascade_ids is None:
            cascade_ids = ["c0"] * self.size
        if len(cascade_ids) != self.size:
            raise DimensionError("cascade id count != pair count")
        self.cascade_ids = list(cascade_ids)
        self.incomplete = bool(incomplete)

    def multiplicities(self):
        """Return (unique_pairs, counts) with unique_pairs sorted."""
        if self.size == 0:
            return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64)
        uniq, counts = np.unique(self.pairs, axis=0, return_counts=True)
        return uniq, counts

    def __len__(self):
        return self.size

    def __repr__(self):
        ncasc = len(set(self.cascade_ids))
        return f"DiffusionDataset(N={self.size}, cascades={ncasc})"


def as_node_set(nodes, n) -> np.ndarray:
    """Validate and sort a collection of node ids for a graph of size n."""
    arr = np.unique(np.asarray(list(nodes), dtype=np.int64))
    if arr.size and (arr[0] < 0 or arr[-1] >= n):
        raise ValidationError(f"node id out of range [0, {n})")
    return arr


def _tokenize(path):
    """Yield (lineno, tokens) for non-blank, non-comment lines."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            yield lineno, line.split()


def load_attributed_graph(edge_path, feature_path=None, undirected=False):
    """Load a graph from a "src dst" edge list, one edge per line.

    Integer labels are used literally (n = max id + 1); any non-integer
    label gets a dense id by first appearance, recorded in ``graph.labels``.
    With ``undirected=True`` every input line yields both directions.
    When ``feature_path`` is None a single normalized-degree feature column
    is synthesized.
    """
    raw_edges = []
    labels_seen = {}
    all_int = True
    for lineno, toks in _tokenize(edge_path):
        if len(toks) != 2:
            raise ParseError(
                edge_path, lineno, f"expected 'src dst', got {len(toks)} fields"
            )
        for t in toks:
            if all_int:
                try:
                    int(t)
                except ValueError:
                    all_int = False
            if t not in labels_seen:
                labels_seen[t] = len(labels_seen)
        raw_edges.append((lineno, toks[0], toks[1]))
    if not raw_edges:
        raise ParseError(edge_path, 0, "edge file has no edges")

    if all_int:
        ids = {lab: int(lab) for lab in labels_seen}
        n = max(ids.values()) + 1
        if min(ids.values()) < 0:
            first = min(labels_seen, key=lambda lab: int(lab))
            raise ValidationError(f"negative node id {first} in {edge_path}")
        labels = [str(i) for i in range(n)]
    else:
        ids = labels_seen
        n = len(ids)
        labels = [None] * n
        for lab, i in ids.items():
            labels[i] = lab

    seen = set()
    edges = []
    for lineno, a, b in raw_edges:
        u, v = ids[a], ids[b]
        directions = [(u, v), (v, u)] if undirected else [(u, v)]
        for s, d in directions:
            if s == d:
                raise ParseError(edge_path, lineno, f"self-loop on node {a}")
            if (s, d) in seen:
                if undirected:
                    continue  # both orientations of the same undirected edge
                raise ParseError(edge_path, lineno, f"duplicate edge {a} {b}")
            seen.add((s, d))
            edges.append((s, d))

    if feature_path is not None:
        features = _load_features(feature_path, n)
    else:
        edges_arr = np.asarray(edges, dtype=np.int64)
        deg = np.zeros(n, dtype=np.float64)
        np.add.at(deg, edges_arr[:, 0], 1.0)
        np.add.at(deg, edges_arr[:, 1], 1.0)
        top = deg.max() if deg.size else 0.0
        features = (deg / top if top > 0 else deg).reshape(-1, 1)

    return AttributedGraph(n, edges, features, labels=labels)


def _load_features(path, n):
    rows = []
    width = None
    for lineno, toks in _tokenize(path):
        vals = " ".join(toks).replace(",", " ").split()
        try:
            row = [float(t) for t in vals]
        except ValueError as exc:
            raise ParseError(path, lineno, f"bad feature value: {exc}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(
                path, lineno, f"row has {len(row)} values, expected {width}"
            )
        rows.append(row)
    if len(rows) != n:
        raise DimensionError(
            f"{path}: {len(rows)} feature rows for {n} nodes"
        )
    return np.asarray(rows, dtype=np.float64)


def save_attributed_graph(graph: AttributedGraph, edge_path, feature_path=None):
    """Write the edge list (and optionally features) back to disk."""
    with open(edge_path, "w", encoding="utf-8") as fh:
        for u, v in graph.edges:
            fh.write(f"{u} {v}\n")
    if feature_path is not None:
        with open(feature_path, "w", encoding="utf-8") as fh:
            for row in graph.features:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")


def load_diffusion_dataset(path, graph: AttributedGraph) -> DiffusionDataset:
    """Load "cascade_id u v" lines; every (u, v) must be a graph edge."""
    pairs = []
    cids = []
    for lineno, toks in _tokenize(path):
        if len(toks) != 3:
            raise ParseError(
                path, lineno, f"expected 'cascade_id u v', got {len(toks)} fields"
            )
        cid = toks[0]
        try:
            u, v = int(toks[1]), int(toks[2])
        except ValueError:
            raise ParseError(path, lineno, "node ids must be integers") from None
        if not (0 <= u < graph.n and 0 <= v < graph.n):
            raise ValidationError(
                f"{path}:{lineno}: node out of range in pair ({u}, {v})"
            )
        if not graph.has_edge(u, v):
            raise ValidationError(
                f"{path}:{lineno}: pair ({u}, {v}) is not a graph edge"
            )
        pairs.append((u, v))
        cids.append(cid)
    if not pairs:
        raise ValidationError(f"{path}: dataset is empty")
    return DiffusionDataset(pairs, cids)


def save_diffusion_dataset(dataset: DiffusionDataset, path):
    with open(path, "w", encoding="utf-8") as fh:
        for cid, (u, v) in zip(dataset.cascade_ids, dataset.pairs):
            fh.write(f"{cid} {u} {v}\n")


def induced_subgraph(graph: AttributedGraph, nodes):
    """Subgraph on ``nodes``; returns (subgraph, old-to-new id dict)."""
    keep = as_node_set(nodes, graph.n)
    if keep.size == 0:
        raise ValidationError("cannot induce on an empty node set")
    old_to_new = {int(old): new for new, old in enumerate(keep)}
    sub_edges = []
    for u, v in graph.edges:
        iu, iv = old_to_new.get(int(u)), old_to_new.get(int(v))
        if iu is not None and iv is not None:
            sub_edges.append((iu, iv))
    sub_edges = (
        np.asarray(sub_edges, dtype=np.int64)
        if sub_edges
        else np.zeros((0, 2), dtype=np.int64)
    )
    labels = None
    if graph.labels is not None:
        labels = [graph.labels[int(old)] for old in keep]
    sub = AttributedGraph(
        keep.size, sub_edges, graph.features[keep], labels=labels
    )
    return sub, old_to_new


def random_attributed_graph(n, mean_out_degree=4.0, feature_dim=4, rng_seed=0):
    """Synthetic directed graph with heavy-tailed out-degrees.

    Out-degree quotas come from a Pareto(2.5) draw scaled to the requested
    mean (so a few hubs exist, as in social graphs); targets are uniform
    without self-loops or duplicates.  Features are iid standard normal.
    """
    if n < 2:
        raise ValidationError("need n >= 2")
    rng = np.random.default_rng(rng_seed)
    raw = rng.pareto(2.5, size=n) + 1.0
    quota = raw * (mean_out_degree / raw.mean())
    quota = np.minimum(np.round(quota).astype(np.int64), n - 1)
    quota = np.maximum(quota, 1)
    edges = []
    for u in range(n):
        want = int(quota[u])
        picked = set()
        # sample until the quota is met; duplicates rejected
        while len(picked) < want:
            batch = rng.integers(0, n, size=want * 2 + 4)
            for v in batch:
                v = int(v)
                if v != u and v not in picked:
                    picked.add(v)
                    if len(picked) == want:
                        break
        edges.extend((u, v) for v in sorted(picked))
    features = rng.standard_normal((n, feature_dim))
    return AttributedGraph(n, edges, features)
