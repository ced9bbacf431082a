"""Exact k-nearest-neighbor sets over filtered attributes.

Positives for the contrastive loss come from cosine kNN in each view's
smoothed feature space. Sets are computed once before training and stay
fixed. Work is blocked over anchors with a thread-count-independent block
size so results are bitwise reproducible.
"""

from __future__ import annotations

import numpy as np
from threadpoolctl import threadpool_limits

from .parallel import map_blocks

ANCHOR_BLOCK = 512


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    # zero rows have no direction; similarity 0 against everything
    safe = np.where(norms == 0.0, 1.0, norms)
    return x / safe


def build_knn(features: np.ndarray, k: int, threads: int | None = None) -> np.ndarray:
    """Indices of the k most cosine-similar other nodes, per node.

    Returns an (N, min(k, N-1)) int64 array; each row is sorted ascending.
    Ties in similarity break toward the smaller index. Self matches are
    excluded.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-d feature matrix, got shape {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 nodes to form neighbor sets, got {n}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not np.isfinite(x).all():
        raise ValueError("features contain non-finite values")
    kk = min(k, n - 1)
    unit = _unit_rows(x)

    def block_top(span):
        lo, hi = span
        sims = unit[lo:hi] @ unit.T
        sims[np.arange(lo, hi) - lo, np.arange(lo, hi)] = -np.inf
        # stable sort on negated sims: equal similarities keep index order
        order = np.argsort(-sims, axis=1, kind="stable")[:, :kk]
        return np.sort(order, axis=1)

    with threadpool_limits(limits=1):
        parts = list(map_blocks(block_top, n, ANCHOR_BLOCK, threads))
    return np.vstack(parts).astype(np.int64)


def build_neighbor_sets(
    features_per_view: list[np.ndarray], k: int, threads: int | None = None
) -> list[np.ndarray]:
    """Per-view kNN tables over a shared node set."""
    if not features_per_view:
        raise ValueError("no views given")
    counts = {np.asarray(f).shape[0] for f in features_per_view}
    if len(counts) != 1:
        raise ValueError(f"views disagree on node count: {sorted(counts)}")
    return [build_knn(f, k, threads) for f in features_per_view]
