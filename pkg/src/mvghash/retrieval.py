"""Hamming-space ranking and retrieval quality metrics.

Every node queries the full code table (itself excluded). Candidates are
ordered by Hamming distance, ties broken toward the smaller node id. mAP is
the mean of per-query average precision over queries that have at least one
same-label candidate; queries without one are skipped and counted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .model import BinaryCodes
from .parallel import map_blocks

QUERY_BLOCK = 512


def hamming(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamming distance between packed codes, reduced over the word axis.

    Broadcasts like xor: (n, w) against (w,) gives n distances.
    """
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(
            f"code widths differ: {a.shape[-1]} words vs {b.shape[-1]} words"
        )
    return np.bitwise_count(a ^ b).sum(axis=-1).astype(np.int64)


@dataclass
class RetrievalResult:
    query: int
    ids: np.ndarray
    distances: np.ndarray


def rank_all(codes: BinaryCodes, query: int) -> RetrievalResult:
    """All other nodes ordered by (Hamming distance, node id)."""
    if not 0 <= query < codes.n:
        raise ValueError(f"query {query} out of range for {codes.n} codes")
    dist = hamming(codes.words, codes.words[query])
    ids = np.delete(np.arange(codes.n, dtype=np.int64), query)
    dist = np.delete(dist, query)
    order = np.argsort(dist, kind="stable")
    return RetrievalResult(query=query, ids=ids[order], distances=dist[order])


def _check_labels(codes: BinaryCodes, labels) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != codes.n:
        raise ValueError(
            f"labels must be a flat array of length {codes.n}, got shape {labels.shape}"
        )
    return labels


def _block_metrics(codes: BinaryCodes, labels: np.ndarray, ranks, threads):
    """Per-query AP and top-r hits, reduced over fixed query blocks in order.

    Returns (ap_sum, evaluated, skipped, hits_per_rank).
    """
    n = codes.n
    words = codes.words
    positions = np.arange(1, n, dtype=np.float64)

    def work(span):
        lo, hi = span
        ap_sum = 0.0
        evaluated = 0
        skipped = 0
        hits = [0.0 for _ in ranks]
        for q in range(lo, hi):
            dist = hamming(words, words[q])
            ids = np.delete(np.arange(n, dtype=np.int64), q)
            d = np.delete(dist, q)
            order = np.argsort(d, kind="stable")
            rel = labels[ids[order]] == labels[q]
            total_rel = int(rel.sum())
            for i, r in enumerate(ranks):
                hits[i] += float(rel[:r].sum()) / r
            if total_rel == 0:
                skipped += 1
                continue
            cum = np.cumsum(rel)
            ap = float((cum[rel] / positions[rel]).sum()) / total_rel
            ap_sum += ap
            evaluated += 1
        return ap_sum, evaluated, skipped, hits

    ap_sum = 0.0
    evaluated = 0
    skipped = 0
    hit_sums = [0.0 for _ in ranks]
    with threadpool_limits(limits=1):
        for a, e, s, h in map_blocks(work, n, QUERY_BLOCK, threads):
            ap_sum += a
            evaluated += e
            skipped += s
            for i, v in enumerate(h):
                hit_sums[i] += v
    return ap_sum, evaluated, skipped, hit_sums


def map_at_all(codes: BinaryCodes, labels, threads: int | None = None) -> float:
    """Mean average precision over full rankings."""
    labels = _check_labels(codes, labels)
    ap_sum, evaluated, _, _ = _block_metrics(codes, labels, (), threads)
    if evaluated == 0:
        raise ValueError("every query was skipped: no label occurs twice")
    return ap_sum / evaluated


def precision_at(
    codes: BinaryCodes, labels, r: int, threads: int | None = None
) -> float:
    """Mean fraction of same-label nodes in the top r, over all queries."""
    labels = _check_labels(codes, labels)
    if not 1 <= r <= codes.n - 1:
        raise ValueError(f"r must be in [1, {codes.n - 1}], got {r}")
    _, _, _, hits = _block_metrics(codes, labels, (r,), threads)
    return hits[0] / codes.n


def evaluation_report(
    codes: BinaryCodes,
    labels,
    ranks=(10, 100, 1000),
    threads: int | None = None,
) -> dict:
    """Retrieval quality summary; ranks beyond N-1 are dropped."""
    labels = _check_labels(codes, labels)
    usable = tuple(r for r in ranks if 1 <= r <= codes.n - 1)
    ap_sum, evaluated, skipped, hits = _block_metrics(codes, labels, usable, threads)
    if evaluated == 0:
        raise ValueError("every query was skipped: no label occurs twice")
    return {
        "map_at_all": ap_sum / evaluated,
        "precision_at": {str(r): hits[i] / codes.n for i, r in enumerate(usable)},
        "skipped_queries": skipped,
        "bits": codes.bits,
        "n": codes.n,
        "tie_break": "ascending_id",
    }
