"""Objective terms and their analytic gradients.

Three pieces: a per-view neighbor-contrastive loss over the embedding U, a
quantization penalty pulling entries toward {-1, +1}, and a bit-balance
penalty pushing column means toward zero. View weights combine the
contrastive terms; their closed-form update lives here too.

Contrastive loss for one view with neighbor sets N_i:

    L_C = - sum_i sum_{j in N_i} log( exp(s_ij / tau) / sum_{p != i} exp(s_ip / tau) )

The denominator runs over every other node, positives included. Two
similarity kernels: "dot" (s = U_i . U_j) and "cosine" (s on row-normalized
U). Gradients come in two flavors:

  exact        differentiates every appearance of U_x, including its role
               as a contrast term in other anchors' denominators
  anchor_only  differentiates only the terms anchored at x

With D_ab = dL/ds_ab = (|N_a| * P_ab - [b in N_a]) / tau for a != b (P the
row softmax excluding self), exact is (D + D^T) driving the kernel chain
rule and anchor_only keeps just D.

Everything is blocked over anchors with a fixed block size and reduced in
block order on the calling thread, so results do not depend on the worker
count. BLAS is pinned to one thread for the same reason.
"""

from __future__ import annotations

import numpy as np
from threadpoolctl import threadpool_limits

from .model import LossBreakdown, SIM_KINDS, sign_pm1
from .parallel import map_blocks

ANCHOR_BLOCK = 512

GRAD_MODES = ("exact", "anchor_only")


def _check_embedding(u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2:
        raise ValueError(f"expected a 2-d embedding, got shape {u.shape}")
    if u.shape[0] < 2:
        raise ValueError(f"need at least 2 nodes, got {u.shape[0]}")
    return u


def _check_neighbors(nbrs, n: int) -> np.ndarray:
    nbrs = np.asarray(nbrs)
    if nbrs.ndim != 2 or nbrs.shape[0] != n:
        raise ValueError(
            f"neighbor table must be (N, k) with N {n}, got shape {nbrs.shape}"
        )
    if nbrs.shape[1] < 1:
        raise ValueError("neighbor table has zero columns")
    if not np.issubdtype(nbrs.dtype, np.integer):
        raise ValueError(f"neighbor indices must be integers, got {nbrs.dtype}")
    if (nbrs < 0).any() or (nbrs >= n).any():
        raise ValueError("neighbor index out of range")
    if (nbrs == np.arange(n)[:, None]).any():
        bad = int(np.argmax((nbrs == np.arange(n)[:, None]).any(axis=1)))
        raise ValueError(f"node {bad} lists itself as a neighbor")
    srt = np.sort(nbrs, axis=1)
    if nbrs.shape[1] > 1 and (srt[:, 1:] == srt[:, :-1]).any():
        bad = int(np.argmax((srt[:, 1:] == srt[:, :-1]).any(axis=1)))
        raise ValueError(f"node {bad} lists a neighbor twice")
    return nbrs.astype(np.int64, copy=False)


def _rows_and_norms(u: np.ndarray, sim_kind: str):
    """Similarity-space rows: U itself for dot, unit rows for cosine."""
    if sim_kind == "dot":
        return u, None
    norms = np.linalg.norm(u, axis=1)
    if (norms == 0.0).any():
        bad = int(np.argmax(norms == 0.0))
        raise ValueError(
            f"node {bad} has a zero embedding row; cosine similarity is undefined"
        )
    return u / norms[:, None], norms


def _contrastive(
    u: np.ndarray,
    nbrs: np.ndarray,
    tau: float,
    sim_kind: str,
    need_grad: bool,
    grad_mode: str = "exact",
    threads: int | None = None,
):
    """Loss and (optionally) gradient for one view, blocked over anchors."""
    u = _check_embedding(u)
    n, dim = u.shape
    nbrs = _check_neighbors(nbrs, n)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if sim_kind not in SIM_KINDS:
        raise ValueError(f"sim_kind must be one of {SIM_KINDS}, got {sim_kind!r}")
    if grad_mode not in GRAD_MODES:
        raise ValueError(f"grad_mode must be one of {GRAD_MODES}, got {grad_mode!r}")
    if not np.isfinite(u).all():
        i, j = np.argwhere(~np.isfinite(u))[0]
        raise ValueError(f"embedding entry ({int(i)}, {int(j)}) is not finite")
    rows, norms = _rows_and_norms(u, sim_kind)
    kk = nbrs.shape[1]
    transpose_part = need_grad and grad_mode == "exact"

    def work(span):
        lo, hi = span
        b = hi - lo
        local = np.arange(b)
        sims = rows[lo:hi] @ rows.T
        if not np.isfinite(sims).all():
            r, c = np.argwhere(~np.isfinite(sims))[0]
            raise ValueError(
                f"similarity between nodes {int(lo + r)} and {int(c)} is not finite"
            )
        z = sims / tau
        z[local, lo + local] = -np.inf
        zmax = z.max(axis=1)
        lse = zmax + np.log(np.exp(z - zmax[:, None]).sum(axis=1))
        pos = z[local[:, None], nbrs[lo:hi]].sum()
        loss = float(kk * lse.sum() - pos)
        if not need_grad:
            return lo, hi, loss, None
        d = np.exp(z - lse[:, None])
        d *= kk
        d[local[:, None], nbrs[lo:hi]] -= 1.0
        d /= tau
        if sim_kind == "dot":
            anchor = d @ u
            other = d.T @ u[lo:hi] if transpose_part else None
            return lo, hi, loss, (anchor, other)
        # cosine: accumulate t = M @ unit and c_x = sum_y M_xy * s_xy, with
        # M = D + D^T (exact) or D (anchor_only); the block contributes its
        # D rows and, for exact, the matching D^T columns
        t_anchor = d @ rows
        c_anchor = (d * sims).sum(axis=1)
        if transpose_part:
            t_other = d.T @ rows[lo:hi]
            c_other = (d * sims).sum(axis=0)
        else:
            t_other = c_other = None
        return lo, hi, loss, (t_anchor, c_anchor, t_other, c_other)

    loss_total = 0.0
    grad = np.zeros_like(u) if need_grad else None
    t_acc = np.zeros_like(u) if (need_grad and sim_kind == "cosine") else None
    c_acc = np.zeros(n) if (need_grad and sim_kind == "cosine") else None
    with threadpool_limits(limits=1):
        for lo, hi, loss_blk, grads_blk in map_blocks(work, n, ANCHOR_BLOCK, threads):
            loss_total += loss_blk
            if not need_grad:
                continue
            if sim_kind == "dot":
                anchor, other = grads_blk
                grad[lo:hi] += anchor
                if other is not None:
                    grad += other
            else:
                t_anchor, c_anchor, t_other, c_other = grads_blk
                t_acc[lo:hi] += t_anchor
                c_acc[lo:hi] += c_anchor
                if t_other is not None:
                    t_acc += t_other
                    c_acc += c_other
    if need_grad and sim_kind == "cosine":
        grad = (t_acc - c_acc[:, None] * rows) / norms[:, None]
    return loss_total, grad


def contrastive_loss(
    u, nbrs, tau: float, sim_kind: str = "cosine", threads: int | None = None
) -> float:
    loss, _ = _contrastive(u, nbrs, tau, sim_kind, need_grad=False, threads=threads)
    return loss


def contrastive_grad(
    u,
    nbrs,
    tau: float,
    sim_kind: str = "cosine",
    grad_mode: str = "exact",
    threads: int | None = None,
):
    """Returns (loss, gradient); the loss is free given the softmax pass."""
    return _contrastive(
        u, nbrs, tau, sim_kind, need_grad=True, grad_mode=grad_mode, threads=threads
    )


def quantization_loss(u) -> float:
    """Mean squared gap to the nearest code, (1/NK) * ||U - sign(U)||_F^2."""
    u = _check_embedding(u)
    r = u - sign_pm1(u)
    return float((r * r).mean())


def quantization_grad(u) -> np.ndarray:
    # sign(U) is piecewise constant, so d/dU treats it as fixed
    u = _check_embedding(u)
    return (2.0 / u.size) * (u - sign_pm1(u))


def bit_balance_loss(u) -> float:
    """Mean squared column mean: (1/K) * sum_k ( (1/N) sum_i U_ik )^2."""
    u = _check_embedding(u)
    col_means = u.mean(axis=0)
    return float((col_means * col_means).mean())


def bit_balance_grad(u) -> np.ndarray:
    u = _check_embedding(u)
    n, k = u.shape
    col_means = u.mean(axis=0)
    return np.broadcast_to((2.0 / (n * k)) * col_means, u.shape).copy()


def update_view_weights(l_c_per_view, eta: float, gamma: float) -> np.ndarray:
    """Closed-form weights minimizing sum_v w_v * L_v + eta * sum_v w_v^gamma
    at fixed losses: w_v = (-L_v / (eta * gamma)) ** (1 / (gamma - 1)).

    Requires -L_v / (eta * gamma) > 0, i.e. losses and gamma on opposite
    signs; gamma < 0 with positive losses is the intended regime.
    """
    losses = np.asarray(l_c_per_view, dtype=np.float64).ravel()
    if losses.size == 0:
        raise ValueError("no per-view losses given")
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if gamma == 1:
        raise ValueError("gamma must differ from 1")
    base = -losses / (eta * gamma)
    if (base <= 0).any():
        bad = int(np.argmax(base <= 0))
        raise ValueError(
            f"view weight update undefined: view {bad} has loss {losses[bad]} "
            f"with gamma {gamma}; -loss/(eta*gamma) must be positive"
        )
    return base ** (1.0 / (gamma - 1.0))


def regularizer_value(weights, eta: float, gamma: float) -> float:
    w = np.asarray(weights, dtype=np.float64)
    return float(eta * np.sum(w**gamma))


def total_objective(
    u,
    neighbor_sets,
    weights,
    tau: float,
    eta: float,
    gamma: float,
    alpha: float,
    beta: float,
    sim_kind: str = "cosine",
    threads: int | None = None,
) -> LossBreakdown:
    """Full objective at fixed view weights, as a structured record."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(neighbor_sets),):
        raise ValueError(
            f"got {w.size} view weights for {len(neighbor_sets)} neighbor tables"
        )
    l_c = [
        contrastive_loss(u, nbrs, tau, sim_kind, threads=threads)
        for nbrs in neighbor_sets
    ]
    l_q = quantization_loss(u)
    l_bb = bit_balance_loss(u)
    total = (
        float(np.dot(w, l_c))
        + regularizer_value(w, eta, gamma)
        + alpha * l_q
        + beta * l_bb
    )
    return LossBreakdown(
        l_c_per_view=tuple(float(v) for v in l_c),
        l_q=l_q,
        l_bb=l_bb,
        weighted_total=total,
        view_weights=tuple(float(v) for v in w),
    )


def total_grad(
    u,
    neighbor_sets,
    weights,
    tau: float,
    alpha: float,
    beta: float,
    sim_kind: str = "cosine",
    grad_mode: str = "exact",
    threads: int | None = None,
) -> np.ndarray:
    """Gradient of the full objective in U at fixed view weights (the weight
    regularizer contributes nothing here)."""
    _, grad = objective_and_grad(
        u,
        neighbor_sets,
        weights,
        tau=tau,
        eta=1.0,
        gamma=-1.0,
        alpha=alpha,
        beta=beta,
        sim_kind=sim_kind,
        grad_mode=grad_mode,
        threads=threads,
    )
    return grad


def objective_and_grad(
    u,
    neighbor_sets,
    weights,
    tau: float,
    eta: float,
    gamma: float,
    alpha: float,
    beta: float,
    sim_kind: str = "cosine",
    grad_mode: str = "exact",
    threads: int | None = None,
):
    """One fused pass: LossBreakdown plus the gradient of the objective in U
    with the view weights held fixed."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(neighbor_sets),):
        raise ValueError(
            f"got {w.size} view weights for {len(neighbor_sets)} neighbor tables"
        )
    u = _check_embedding(u)
    grad = np.zeros_like(u)
    l_c = []
    for w_v, nbrs in zip(w, neighbor_sets):
        loss_v, grad_v = contrastive_grad(
            u, nbrs, tau, sim_kind, grad_mode=grad_mode, threads=threads
        )
        l_c.append(loss_v)
        grad += w_v * grad_v
    l_q = quantization_loss(u)
    l_bb = bit_balance_loss(u)
    grad += alpha * quantization_grad(u) + beta * bit_balance_grad(u)
    total = (
        float(np.dot(w, l_c))
        + regularizer_value(w, eta, gamma)
        + alpha * l_q
        + beta * l_bb
    )
    breakdown = LossBreakdown(
        l_c_per_view=tuple(float(v) for v in l_c),
        l_q=l_q,
        l_bb=l_bb,
        weighted_total=total,
        view_weights=tuple(float(v) for v in w),
    )
    return breakdown, grad
