"""Planted-community synthetic data: SBM graphs plus block-mean Gaussian
attributes.

The attribute noise is deliberately large relative to the mean separation,
so raw-feature neighbors are near chance and recovery has to come from the
graph structure. Used as a recoverability oracle in tests and runnable
through scripts/make_dataset.py.
"""

from __future__ import annotations

import numpy as np

from .model import MultiViewGraphDataset, SparseAdjacency, View


def sbm_adjacency(
    rng: np.random.Generator,
    labels: np.ndarray,
    p_intra: float,
    p_inter: float,
) -> SparseAdjacency:
    """Undirected unweighted stochastic block model; no self-loops."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    if not (0 <= p_inter <= 1 and 0 <= p_intra <= 1):
        raise ValueError("edge probabilities must lie in [0, 1]")
    prob = np.where(labels[:, None] == labels[None, :], p_intra, p_inter)
    draw = rng.random((n, n)) < prob
    upper = np.triu(draw, k=1)
    r, c = np.nonzero(upper)
    row = np.concatenate([r, c])
    col = np.concatenate([c, r])
    return SparseAdjacency.from_entries(n, row, col)


def make_block_dataset(
    seed: int = 0,
    blocks: tuple[int, ...] = (50, 50, 50),
    n_views: int = 2,
    p_intra: float = 0.3,
    p_inter: float = 0.02,
    dim: int = 8,
    sigma_ratio: float = 1.5,
    name: str = "synthetic-blocks",
) -> MultiViewGraphDataset:
    """Blocks of nodes with orthonormal-basis mean vectors and Gaussian noise
    of sigma_ratio times the mean separation (sqrt(2) for unit basis means).

    Each view draws its own graph and its own noise around the shared means.
    Labels are the block ids.
    """
    if len(blocks) < 2:
        raise ValueError("need at least 2 blocks")
    if dim < len(blocks):
        raise ValueError(f"dim {dim} cannot hold {len(blocks)} basis means")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(blocks), dtype=np.int64), blocks)
    n = int(labels.shape[0])
    means = np.zeros((len(blocks), dim))
    means[np.arange(len(blocks)), np.arange(len(blocks))] = 1.0
    sigma = sigma_ratio * np.sqrt(2.0)
    views = []
    for _ in range(n_views):
        adj = sbm_adjacency(rng, labels, p_intra, p_inter)
        x = means[labels] + sigma * rng.standard_normal((n, dim))
        views.append(View(attributes=x, adjacency=adj))
    return MultiViewGraphDataset(n_nodes=n, views=views, labels=labels, name=name)
