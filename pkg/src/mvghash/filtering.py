"""Low-pass graph filtering of node attributes.

The filter is (I - s L)^m applied to the attribute matrix, with L the
symmetric normalized Laplacian of the self-loop-augmented graph. Applied
iteratively as y <- y - s*(L @ y), so the sparse operator is never
densified or powered explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import MultiViewGraphDataset, SparseAdjacency


@dataclass
class NormalizedLaplacian:
    """L = I - D~^{-1/2} A~ D~^{-1/2} with A~ = A + I, as CSR.

    Eigenvalues lie in [0, 2); with s <= 1 the filter response 1 - s*lam
    stays in (-1, 1] so repeated application shrinks high-frequency
    components instead of amplifying them.
    """

    n: int
    matrix: sp.csr_matrix


def build_laplacian(adj: SparseAdjacency) -> NormalizedLaplacian:
    if (adj.weight < 0).any():
        i = int(np.argmax(adj.weight < 0))
        raise ValueError(
            f"negative weight {adj.weight[i]} at "
            f"({int(adj.row[i])}, {int(adj.col[i])}); Laplacian needs w >= 0"
        )
    n = adj.n
    # A~ = A + I; the self-loop also guarantees deg >= 1, so no zero-degree
    # special case exists.
    deg = np.ones(n, dtype=np.float64)
    np.add.at(deg, adj.row, adj.weight)
    loop = np.zeros(n, dtype=np.float64)
    on_diag = adj.row == adj.col
    np.add.at(loop, adj.row[on_diag], adj.weight[on_diag])
    dinv = 1.0 / np.sqrt(deg)

    off = ~on_diag
    row = np.concatenate([adj.row[off], np.arange(n, dtype=np.int64)])
    col = np.concatenate([adj.col[off], np.arange(n, dtype=np.int64)])
    # off-diagonal: -w * dinv_i * dinv_j ; diagonal: 1 - (loop_i + 1) * dinv_i^2.
    # dinv_i * dinv_j is computed first so mirror entries round identically
    # and L stays bitwise symmetric.
    scale = dinv[adj.row[off]] * dinv[adj.col[off]]
    val = np.concatenate(
        [
            -adj.weight[off] * scale,
            1.0 - (loop + 1.0) * dinv * dinv,
        ]
    )
    mat = sp.csr_matrix((val, (row, col)), shape=(n, n))
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return NormalizedLaplacian(n=n, matrix=mat)


def smooth(x: np.ndarray, lap: NormalizedLaplacian, s: float, m: int) -> np.ndarray:
    """(I - s L)^m @ x without forming the dense power."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-d attribute matrix, got shape {x.shape}")
    if x.shape[0] != lap.n:
        raise ValueError(f"attribute rows {x.shape[0]} ≠ Laplacian size {lap.n}")
    if m < 0 or int(m) != m:
        raise ValueError(f"filter order must be a nonnegative integer, got {m}")
    if not s > 0:
        raise ValueError(f"filter strength must be positive, got {s}")
    y = x.copy()
    for _ in range(int(m)):
        y = y - s * (lap.matrix @ y)
    return y


def smooth_views(
    ds: MultiViewGraphDataset, m: int, s: float
) -> list[np.ndarray]:
    """Filter every view's attributes over its own graph.

    Views sharing one adjacency object (common when a manifest points several
    views at the same edge file) share one Laplacian build.
    """
    cache: dict[int, NormalizedLaplacian] = {}
    out = []
    for view in ds.views:
        key = id(view.adjacency)
        lap = cache.get(key)
        if lap is None:
            lap = build_laplacian(view.adjacency)
            cache[key] = lap
        out.append(smooth(np.asarray(view.attributes, dtype=np.float64), lap, s, m))
    return out
