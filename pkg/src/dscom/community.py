"""Normalized-cut spectral clustering of the attention-weighted graph.

The directed edge weights are symmetrized into a sparse affinity matrix,
embedded through the symmetric normalized Laplacian, and clustered with
k-means++ on the row-normalized eigenvector matrix.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import NumericError, ValidationError
from .relation import WeightedGraph
from .seeding import derive_seed

_DENSE_EIG_LIMIT = 512


class Partition:
    """Community assignment: node -> id in [0, k), every community nonempty."""

    def __init__(self, assignment, k=None):
        assignment = np.asarray(assignment, dtype=np.int64).reshape(-1)
        if assignment.size == 0:
            raise ValidationError("empty partition")
        if k is None:
            k = int(assignment.max()) + 1
        if assignment.min() < 0 or assignment.max() >= k:
            raise ValidationError("community id out of range")
        counts = np.bincount(assignment, minlength=k)
        if (counts == 0).any():
            raise ValidationError("every community must be nonempty")
        self.assignment = assignment
        self.k = int(k)
        self.n = assignment.size

    def members(self, c) -> np.ndarray:
        return np.flatnonzero(self.assignment == c)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def __repr__(self):
        return f"Partition(n={self.n}, k={self.k})"


def save_partition(partition: Partition, path):
    with open(path, "w", encoding="utf-8") as fh:
        for node, comm in enumerate(partition.assignment):
            fh.write(f"{node} {comm}\n")


def load_partition(path, n=None) -> Partition:
    from .graph import _tokenize

    rows = {}
    for lineno, toks in _tokenize(path):
        if len(toks) != 2:
            raise ValidationError(f"{path}:{lineno}: expected 'node community'")
        rows[int(toks[0])] = int(toks[1])
    if n is None:
        n = max(rows) + 1 if rows else 0
    assignment = np.full(n, -1, dtype=np.int64)
    for node, comm in rows.items():
        assignment[node] = comm
    if (assignment < 0).any():
        raise ValidationError(f"{path}: node missing from partition")
    return Partition(assignment)


def symmetrized_similarity(weighted: WeightedGraph) -> scipy.sparse.csr_matrix:
    """S[u, v] = (w(u->v) + w(v->u)) / 2, zero diagonal, symmetric."""
    g = weighted.graph
    w = weighted.weights
    if w.size and w.min() < 0:
        raise ValidationError("edge weights must be nonnegative")
    rows = np.concatenate([g.edges[:, 0], g.edges[:, 1]])
    cols = np.concatenate([g.edges[:, 1], g.edges[:, 0]])
    vals = np.concatenate([w, w]) * 0.5
    S = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(g.n, g.n))
    S.sum_duplicates()
    return S


def normalized_laplacian(S) -> scipy.sparse.csr_matrix:
    """L = I - D^{-1/2} S D^{-1/2}; isolated nodes get an identity row."""
    S = scipy.sparse.csr_matrix(S)
    deg = np.asarray(S.sum(axis=1)).ravel()
    inv_sqrt = np.zeros_like(deg)
    pos = deg > 0
    inv_sqrt[pos] = 1.0 / np.sqrt(deg[pos])
    Dhalf = scipy.sparse.diags(inv_sqrt)
    L = scipy.sparse.identity(S.shape[0], format="csr") - Dhalf @ S @ Dhalf
    return scipy.sparse.csr_matrix(L)


def spectral_embedding(L, k: int) -> np.ndarray:
    """Rows of the k smallest eigenvectors, each normalized to unit length."""
    n = L.shape[0]
    if not (1 <= k <= n):
        raise ValidationError(f"k={k} out of range for n={n}")
    # ARPACK needs k < n and loses its edge once k is a sizable fraction
    # of n, so small or nearly-full problems go through dense eigh
    if n <= _DENSE_EIG_LIMIT or k > n // 4:
        dense = L.toarray() if scipy.sparse.issparse(L) else np.asarray(L)
        dense = 0.5 * (dense + dense.T)
        vals, vecs = scipy.linalg.eigh(dense)
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        vals, vecs = scipy.sparse.linalg.eigsh(
            scipy.sparse.csr_matrix(L), k=k, which="SA", tol=1e-12,
            maxiter=5000,
        )
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    resid = L @ vecs - vecs * vals[None, :]
    worst = np.linalg.norm(resid, axis=0).max()
    if worst > 1e-8:
        raise NumericError(f"eigensolver residual {worst:.2e} exceeds 1e-8")
    norms = np.linalg.norm(vecs, axis=1)
    out = vecs.copy()
    nz = norms > 1e-300
    out[nz] /= norms[nz, None]
    out[~nz] = 0.0
    return out


def kmeans_pp(points, k: int, rng_seed: int = 0, restarts: int = 10) -> Partition:
    """k-means++ seeding plus Lloyd iterations, best of `restarts` by WCSS."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < k:
        raise ValidationError(f"cannot make {k} clusters from {n} points")
    best = None
    best_wcss = np.inf
    for r in range(restarts):
        rng = np.random.default_rng(derive_seed(rng_seed, "kmeans", r))
        assign, wcss = _kmeans_once(points, k, rng)
        if wcss < best_wcss - 1e-15:
            best, best_wcss = assign, wcss
    return Partition(best, k)


def _kmeans_once(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[c] = points[rng.integers(n)]
        else:
            centers[c] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centers[c]) ** 2, axis=1))
    assign = None
    for _ in range(300):
        dist = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = dist.argmin(axis=1)
        # repair empty clusters with far points from the largest cluster
        counts = np.bincount(assign, minlength=k)
        for c in np.flatnonzero(counts == 0):
            big = counts.argmax()
            cand = np.flatnonzero(assign == big)
            far = cand[dist[cand, big].argmax()]
            assign[far] = c
            counts = np.bincount(assign, minlength=k)
        new_centers = np.empty_like(centers)
        for c in range(k):
            new_centers[c] = points[assign == c].mean(axis=0)
        shift = np.linalg.norm(new_centers - centers, axis=1).max()
        centers = new_centers
        if shift < 1e-9:
            break
    dist = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    wcss = dist[np.arange(n), assign].sum()
    return assign, wcss


def ncut_score(S, partition: Partition) -> float:
    """Sum over communities of cut(A, complement) / vol(A).

    Zero-volume communities contribute 0.
    """
    S = scipy.sparse.csr_matrix(S)
    deg = np.asarray(S.sum(axis=1)).ravel()
    total = 0.0
    for c in range(partition.k):
        members = partition.members(c)
        vol = deg[members].sum()
        if vol <= 0:
            continue
        internal = S[members][:, members].sum()
        cut = vol - internal
        total += cut / vol
    return float(total)


def merge_tiny_communities(S, partition: Partition, min_size: int,
                           min_communities: int = 1) -> Partition:
    """Fold communities below min_size into their strongest neighbor.

    The target is the community with the largest total connecting weight.
    Stops when nothing is tiny or when another merge would drop the count
    below ``min_communities``; a tiny community may survive in that case.
    """
    S = scipy.sparse.csr_matrix(S)
    assign = partition.assignment.copy()
    while True:
        ids, counts = np.unique(assign, return_counts=True)
        if len(ids) <= min_communities:
            break
        tiny_order = np.argsort(counts)
        tiny = [ids[i] for i in tiny_order if counts[i] < min_size]
        if not tiny:
            break
        c = tiny[0]
        members = np.flatnonzero(assign == c)
        link = np.zeros(int(assign.max()) + 1)
        block = S[members].tocoo()
        for _, col, val in zip(block.row, block.col, block.data):
            other = assign[col]
            if other != c:
                link[other] += val
        if link.sum() <= 0:
            # disconnected tiny community: fold into the largest
            target = ids[counts.argmax()]
            if target == c:
                break
        else:
            target = link.argmax()
        assign[members] = target
    # compact ids
    ids = np.unique(assign)
    remap = {int(old): new for new, old in enumerate(ids)}
    assign = np.asarray([remap[int(a)] for a in assign], dtype=np.int64)
    return Partition(assign, len(ids))


def spectral_cluster(weighted: WeightedGraph, k: int, rng_seed: int = 0,
                     restarts: int = 10, min_size=None,
                     min_communities=None) -> Partition:
    """Symmetrize, embed, cluster; returns exactly k nonempty communities.

    With ``min_size`` set, communities below that size are merged afterwards
    (the count may then drop below k but never below ``min_communities``).
    """
    n = weighted.graph.n
    if k > n:
        raise ValidationError(f"k={k} exceeds node count {n}")
    S = symmetrized_similarity(weighted)
    L = normalized_laplacian(S)
    emb = spectral_embedding(L, k)
    part = kmeans_pp(emb, k, rng_seed=derive_seed(rng_seed, "cluster"),
                     restarts=restarts)
    if min_size is not None and min_size > 1:
        floor = 1 if min_communities is None else min_communities
        part = merge_tiny_communities(S, part, min_size, floor)
    return part
