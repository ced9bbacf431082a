"""Core data model: multi-view graph datasets, hyperparameters, train state,
and bit-packed binary codes.

All internal arithmetic is float64; loaders widen 32-bit inputs. A dataset is
one node set described by several views, each pairing an attribute matrix
with a (possibly shared) adjacency.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
import scipy.sparse as sp

WORD_BITS = 64

SIM_KINDS = ("dot", "cosine")


def _group_reduce(row, col, weight, how="sum"):
    """Collapse duplicate (row, col) pairs and sort entries by (row, col)."""
    order = np.lexsort((col, row))
    row, col, weight = row[order], col[order], weight[order]
    if row.size == 0:
        return row, col, weight
    starts = np.empty(row.size, dtype=bool)
    starts[0] = True
    starts[1:] = (row[1:] != row[:-1]) | (col[1:] != col[:-1])
    if starts.all():
        return row, col, weight
    idx = np.flatnonzero(starts)
    if how == "sum":
        merged = np.add.reduceat(weight, idx)
    elif how == "max":
        merged = np.maximum.reduceat(weight, idx)
    else:
        raise ValueError(f"unknown reduction {how!r}")
    return row[idx], col[idx], merged


@dataclass(frozen=True)
class SparseAdjacency:
    """Weighted adjacency in canonical COO form.

    Entries are sorted by (row, col) with duplicates summed at construction.
    Self-loops are allowed and kept as ordinary entries; Laplacian
    construction adds its own. The ``symmetric`` flag is a promise checked by
    :func:`validate_dataset`, not enforced here, so that invalid instances
    can still be built and reported on.
    """

    n: int
    row: np.ndarray
    col: np.ndarray
    weight: np.ndarray
    symmetric: bool = True

    @classmethod
    def from_entries(cls, n, row, col, weight=None, symmetric=True):
        row = np.asarray(row, dtype=np.int64).ravel()
        col = np.asarray(col, dtype=np.int64).ravel()
        if weight is None:
            weight = np.ones(row.size, dtype=np.float64)
        weight = np.asarray(weight, dtype=np.float64).ravel()
        if not (row.size == col.size == weight.size):
            raise ValueError(
                f"entry arrays disagree in length: {row.size}, {col.size}, {weight.size}"
            )
        row, col, weight = _group_reduce(row, col, weight, how="sum")
        return cls(n=int(n), row=row, col=col, weight=weight, symmetric=symmetric)

    @property
    def nnz(self) -> int:
        return int(self.row.size)

    def maximum_symmetrized(self) -> "SparseAdjacency":
        """A <- max(A, A^T): directed inputs become undirected."""
        row = np.concatenate([self.row, self.col])
        col = np.concatenate([self.col, self.row])
        weight = np.concatenate([self.weight, self.weight])
        row, col, weight = _group_reduce(row, col, weight, how="max")
        return SparseAdjacency(n=self.n, row=row, col=col, weight=weight, symmetric=True)

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.weight, (self.row, self.col)), shape=(self.n, self.n)
        )

    def pattern_violations(self) -> list[str]:
        """Invariant report: index range, weight sign, duplicates, symmetry."""
        out = []
        bad = (self.row < 0) | (self.row >= self.n) | (self.col < 0) | (self.col >= self.n)
        if bad.any():
            i = int(np.argmax(bad))
            out.append(
                f"index out of range: entry ({int(self.row[i])}, {int(self.col[i])}) with n {self.n}"
            )
        neg = self.weight < 0
        if neg.any():
            i = int(np.argmax(neg))
            out.append(
                f"negative weight {self.weight[i]} at ({int(self.row[i])}, {int(self.col[i])})"
            )
        if self.row.size > 1:
            dup = (self.row[1:] == self.row[:-1]) & (self.col[1:] == self.col[:-1])
            if dup.any():
                out.append("duplicate (row, col) entries after canonicalization")
        if self.symmetric and not bad.any():
            r2, c2, w2 = _group_reduce(
                self.col.copy(), self.row.copy(), self.weight.copy(), how="sum"
            )
            same = (
                r2.size == self.row.size
                and np.array_equal(r2, self.row)
                and np.array_equal(c2, self.col)
                and np.array_equal(w2, self.weight)
            )
            if not same:
                out.append("flagged symmetric but entries are not mirror-equal")
        return out


@dataclass
class View:
    """One (attribute matrix, adjacency) pairing over the shared node set."""

    attributes: np.ndarray
    adjacency: SparseAdjacency


@dataclass
class MultiViewGraphDataset:
    n_nodes: int
    views: list[View]
    labels: Optional[np.ndarray] = None
    name: str = ""

    @property
    def n_views(self) -> int:
        return len(self.views)


def validate_dataset(ds: MultiViewGraphDataset) -> list[str]:
    """Report every invariant violation; an empty list means the dataset is
    consistent. Never raises: loaders reject on a non-empty report."""
    report: list[str] = []
    try:
        n = int(ds.n_nodes)
    except (TypeError, ValueError):
        return [f"n_nodes is not an integer: {ds.n_nodes!r}"]
    if n < 1:
        report.append(f"n_nodes must be >= 1, got {n}")
    if not ds.views:
        report.append("dataset has no views")
        return report
    for v, view in enumerate(ds.views):
        try:
            x = np.asarray(view.attributes, dtype=np.float64)
            if x.ndim != 2:
                report.append(f"view {v}: attributes are not a 2-d matrix")
            else:
                if x.shape[0] != n:
                    report.append(f"view {v}: attribute rows {x.shape[0]} ≠ N {n}")
                if not np.isfinite(x).all():
                    report.append(f"view {v}: attributes contain non-finite values")
        except (TypeError, ValueError) as exc:
            report.append(f"view {v}: attributes unreadable ({exc})")
        adj = view.adjacency
        try:
            if adj.n != n:
                report.append(f"view {v}: adjacency size {adj.n} ≠ N {n}")
            report.extend(f"view {v}: {msg}" for msg in adj.pattern_violations())
        except AttributeError as exc:
            report.append(f"view {v}: adjacency unreadable ({exc})")
    if ds.labels is not None:
        try:
            labels = np.asarray(ds.labels)
            if labels.ndim != 1:
                report.append("labels are not a flat list")
            elif labels.shape[0] != n:
                report.append(f"labels count mismatch: {labels.shape[0]} ≠ N {n}")
            elif not np.issubdtype(labels.dtype, np.integer):
                report.append("labels are not integers")
            elif (labels < 0).any():
                report.append("labels contain negative class ids")
        except (TypeError, ValueError) as exc:
            report.append(f"labels unreadable ({exc})")
    return report


@dataclass(frozen=True)
class HyperParams:
    """Training hyperparameters with the defaults used throughout.

    m, s       filter order and strength
    k          neighbor count for contrastive positives
    tau        softmax temperature
    gamma, eta view-weight smoothing exponent and regularizer weight
    alpha, beta quantization and bit-balance weights
    bits       code length K
    """

    m: int = 2
    s: float = 0.5
    k: int = 10
    tau: float = 0.2
    gamma: float = -4.0
    eta: float = 1.0
    alpha: float = 0.1
    beta: float = 0.1
    bits: int = 16
    sim_kind: str = "cosine"
    epochs_max: int = 500
    tol: float = 1e-5
    lr: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if self.m < 0 or int(self.m) != self.m:
            raise ValueError(f"m must be a nonnegative integer, got {self.m}")
        if not self.s > 0:
            raise ValueError(f"s must be positive, got {self.s}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.gamma == 1:
            raise ValueError("gamma must differ from 1 (weight update divides by gamma - 1)")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if self.bits < 1:
            raise ValueError(f"bits must be >= 1, got {self.bits}")
        if self.sim_kind not in SIM_KINDS:
            raise ValueError(f"sim_kind must be one of {SIM_KINDS}, got {self.sim_kind!r}")
        if self.epochs_max < 1:
            raise ValueError(f"epochs_max must be >= 1, got {self.epochs_max}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LossBreakdown:
    """Per-epoch objective record.

    weighted_total = sum_v w_v * l_c[v] + eta * sum_v w_v**gamma
                     + alpha * l_q + beta * l_bb
    with w_v the view weights in effect when the epoch's gradient was taken.
    """

    l_c_per_view: tuple[float, ...]
    l_q: float
    l_bb: float
    weighted_total: float
    view_weights: tuple[float, ...]


@dataclass
class TrainState:
    u: np.ndarray
    view_weights: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray
    step: int = 0
    history: list[LossBreakdown] = field(default_factory=list)


def words_per_code(bits: int) -> int:
    return (bits + WORD_BITS - 1) // WORD_BITS


@dataclass
class BinaryCodes:
    """Bit-packed sign matrix: bit b of a node's words is set iff column b
    is +1. Word w covers columns [64w, 64w+64); trailing bits stay zero."""

    n: int
    bits: int
    words: np.ndarray
    metadata: dict = field(default_factory=dict)


def pack_codes(b, metadata: Optional[dict] = None) -> BinaryCodes:
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2:
        raise ValueError(f"expected a 2-d sign matrix, got shape {b.shape}")
    valid = (b == 1.0) | (b == -1.0)
    if not valid.all():
        i, j = np.argwhere(~valid)[0]
        raise ValueError(
            f"entry at ({int(i)}, {int(j)}) is {b[i, j]!r}, expected -1 or +1"
        )
    n, bits = b.shape
    words = np.zeros((n, words_per_code(bits)), dtype=np.uint64)
    plus = b > 0
    for j in range(bits):
        w, off = divmod(j, WORD_BITS)
        words[:, w] |= plus[:, j].astype(np.uint64) << np.uint64(off)
    return BinaryCodes(n=n, bits=bits, words=words, metadata=dict(metadata or {}))


def unpack_codes(codes: BinaryCodes) -> np.ndarray:
    out = np.empty((codes.n, codes.bits), dtype=np.float64)
    for j in range(codes.bits):
        w, off = divmod(j, WORD_BITS)
        bit = (codes.words[:, w] >> np.uint64(off)) & np.uint64(1)
        out[:, j] = np.where(bit.astype(bool), 1.0, -1.0)
    return out


def sign_pm1(u) -> np.ndarray:
    """sign with sign(0) = +1, the binarization used everywhere."""
    return np.where(np.asarray(u, dtype=np.float64) >= 0, 1.0, -1.0)


def binarize(u, metadata: Optional[dict] = None) -> BinaryCodes:
    return pack_codes(sign_pm1(u), metadata=metadata)
