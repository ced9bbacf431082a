"""Shared fixtures and independent reference implementations.

Everything here is deliberately naive (double loops, dense matrices): the
point is to disagree with the package when the package is wrong, so none of
it may call into mvghash beyond constructing input objects.
"""

import math

import hypothesis
import numpy as np

from mvghash.model import MultiViewGraphDataset, SparseAdjacency, View

hypothesis.settings.register_profile(
    "default", deadline=None, max_examples=40, derandomize=True
)
hypothesis.settings.load_profile("default")


def random_adjacency(rng, n, density=0.2, weighted=True):
    """Symmetric random adjacency, no self-loops."""
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < density
    iu, ju = iu[keep], ju[keep]
    w = rng.uniform(0.5, 2.0, size=iu.size) if weighted else np.ones(iu.size)
    row = np.concatenate([iu, ju])
    col = np.concatenate([ju, iu])
    return SparseAdjacency.from_entries(n, row, col, np.concatenate([w, w]))


def adjacency_dense(adj):
    a = np.zeros((adj.n, adj.n))
    a[adj.row, adj.col] = adj.weight
    return a


def dense_smooth(a_dense, x, s, m):
    """(I - s L)^m X, fully dense, L built from A + I."""
    n = a_dense.shape[0]
    at = a_dense + np.eye(n)
    dinv = 1.0 / np.sqrt(at.sum(axis=1))
    lap = np.eye(n) - dinv[:, None] * at * dinv[None, :]
    return np.linalg.matrix_power(np.eye(n) - s * lap, m) @ x


def naive_knn(features, k):
    """O(N^2) cosine top-k; ties by ascending index, rows sorted ascending."""
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    norms = np.linalg.norm(x, axis=1)
    unit = np.zeros_like(x)
    nz = norms > 0
    unit[nz] = x[nz] / norms[nz, None]
    kk = min(k, n - 1)
    out = np.empty((n, kk), dtype=np.int64)
    for i in range(n):
        scored = [(-float(unit[i] @ unit[j]), j) for j in range(n) if j != i]
        scored.sort()
        out[i] = sorted(j for _, j in scored[:kk])
    return out


def naive_contrastive_terms(u, nbrs, tau, sim_kind="dot"):
    """Per-anchor loss terms by explicit loops over candidates."""
    u = np.asarray(u, dtype=np.float64)
    n = u.shape[0]
    rows = u
    if sim_kind == "cosine":
        rows = u / np.linalg.norm(u, axis=1, keepdims=True)
    terms = np.zeros(n)
    for i in range(n):
        others = [p for p in range(n) if p != i]
        z = np.array([float(rows[i] @ rows[p]) for p in others]) / tau
        hi = z.max()
        lse = hi + math.log(np.exp(z - hi).sum())
        for j in nbrs[i]:
            terms[i] += lse - float(rows[i] @ rows[j]) / tau
    return terms


def naive_contrastive(u, nbrs, tau, sim_kind="dot"):
    return float(naive_contrastive_terms(u, nbrs, tau, sim_kind).sum())


def naive_map(signs, labels):
    """mAP@all over (Hamming, ascending id) rankings, one query at a time."""
    signs = np.asarray(signs)
    labels = np.asarray(labels)
    n = signs.shape[0]
    aps = []
    for q in range(n):
        rel = [j for j in range(n) if j != q and labels[j] == labels[q]]
        if not rel:
            continue
        order = sorted(
            (int(np.sum(signs[q] != signs[j])), j) for j in range(n) if j != q
        )
        hits = 0
        ap = 0.0
        for rank, (_, j) in enumerate(order, start=1):
            if labels[j] == labels[q]:
                hits += 1
                ap += hits / rank
        aps.append(ap / len(rel))
    if not aps:
        raise ValueError("no evaluable queries")
    return sum(aps) / len(aps)


def naive_precision_at(signs, labels, r):
    signs = np.asarray(signs)
    labels = np.asarray(labels)
    n = signs.shape[0]
    total = 0.0
    for q in range(n):
        order = sorted(
            (int(np.sum(signs[q] != signs[j])), j) for j in range(n) if j != q
        )
        top = [j for _, j in order[:r]]
        total += sum(1 for j in top if labels[j] == labels[q]) / r
    return total / n


def central_fd(fn, u, h=1e-5):
    """Central finite differences of a scalar function of a matrix."""
    g = np.zeros_like(u)
    for idx in np.ndindex(*u.shape):
        up = u.copy()
        dn = u.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (fn(up) - fn(dn)) / (2.0 * h)
    return g


def fd_agreement(analytic, numeric, floor=1e-8):
    """Max relative disagreement, with a floor so near-zero entries do not
    blow up the ratio."""
    denom = np.maximum(np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def random_neighbors(rng, n, k):
    """A valid (n, k) neighbor table: distinct, non-self, sorted rows."""
    out = np.empty((n, k), dtype=np.int64)
    pool = np.arange(n)
    for i in range(n):
        choices = np.delete(pool, i)
        out[i] = np.sort(rng.choice(choices, size=k, replace=False))
    return out


def tiny_dataset(seed=0, n=12, n_views=2, dim=5, n_classes=3, density=0.3):
    """Small labeled dataset for plumbing tests; every class is non-empty."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n, dtype=np.int64) % n_classes
    views = []
    for _ in range(n_views):
        adj = random_adjacency(rng, n, density=density)
        x = rng.standard_normal((n, dim))
        views.append(View(attributes=x, adjacency=adj))
    return MultiViewGraphDataset(n_nodes=n, views=views, labels=labels, name="tiny")
