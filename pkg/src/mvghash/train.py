"""Alternating optimization: Adam on the embedding, closed-form view weights.

One epoch evaluates the full objective and its gradient at the current
embedding and weights, takes one Adam step on the embedding, then refreshes
the view weights from the per-view losses just computed. Training stops when
the relative objective change drops below tol or at epochs_max. The final
codes are the sign pattern of the embedding.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .filtering import smooth_views
from .losses import GRAD_MODES, objective_and_grad, update_view_weights
from .model import (
    BinaryCodes,
    HyperParams,
    MultiViewGraphDataset,
    TrainState,
    binarize,
    validate_dataset,
)
from .neighbors import build_neighbor_sets


class DivergenceError(RuntimeError):
    """Objective or embedding left the finite range during training."""


@dataclass(frozen=True)
class AdamConfig:
    # lr = 0 is allowed here (freezes U, useful for isolating the weight
    # update); the CLI-facing HyperParams.lr stays strictly positive
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError(f"lr must be nonnegative, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")


@dataclass(frozen=True)
class TrainConfig:
    """hp carries the model hyperparameters; adam defaults to hp.lr with
    standard moment decay. init_scale defaults to 1/sqrt(bits) so initial
    rows have roughly unit norm."""

    hp: HyperParams = field(default_factory=HyperParams)
    adam: Optional[AdamConfig] = None
    lambda_update_every: int = 1
    init_scale: Optional[float] = None
    grad_mode: str = "exact"
    threads: Optional[int] = None

    def __post_init__(self):
        if self.grad_mode not in GRAD_MODES:
            raise ValueError(
                f"grad_mode must be one of {GRAD_MODES}, got {self.grad_mode!r}"
            )
        if self.lambda_update_every < 1:
            raise ValueError(
                f"lambda_update_every must be >= 1, got {self.lambda_update_every}"
            )
        if self.init_scale is not None and not self.init_scale > 0:
            raise ValueError(f"init_scale must be positive, got {self.init_scale}")

    def resolved_adam(self) -> AdamConfig:
        return self.adam if self.adam is not None else AdamConfig(lr=self.hp.lr)

    def resolved_init_scale(self) -> float:
        if self.init_scale is not None:
            return float(self.init_scale)
        return 1.0 / np.sqrt(self.hp.bits)


def init_state(
    n: int, n_views: int, bits: int, seed: int, init_scale: float
) -> TrainState:
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    rng = np.random.default_rng(seed)
    u = rng.normal(0.0, init_scale, size=(n, bits))
    return TrainState(
        u=u,
        view_weights=np.ones(n_views, dtype=np.float64),
        adam_m=np.zeros_like(u),
        adam_v=np.zeros_like(u),
    )


def _adam_step(state: TrainState, grad: np.ndarray, cfg: AdamConfig) -> None:
    state.step += 1
    t = state.step
    state.adam_m = cfg.beta1 * state.adam_m + (1.0 - cfg.beta1) * grad
    state.adam_v = cfg.beta2 * state.adam_v + (1.0 - cfg.beta2) * (grad * grad)
    m_hat = state.adam_m / (1.0 - cfg.beta1**t)
    v_hat = state.adam_v / (1.0 - cfg.beta2**t)
    state.u = state.u - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


def train(
    ds: MultiViewGraphDataset,
    cfg: Optional[TrainConfig] = None,
    neighbor_sets: Optional[list[np.ndarray]] = None,
    log_file=None,
    skip_filter: bool = False,
) -> tuple[TrainState, BinaryCodes]:
    """Fit binary codes for every node of the dataset.

    neighbor_sets, when given, skip the filter+kNN stage entirely (they are
    assumed to come from build_neighbor_sets). skip_filter keeps the kNN
    stage but runs it on raw attributes.

    Returns the final TrainState (embedding, weights, loss history) and the
    packed codes sign(U).
    """
    cfg = cfg or TrainConfig()
    hp = cfg.hp
    problems = validate_dataset(ds)
    if problems:
        raise ValueError("invalid dataset: " + "; ".join(problems))
    if neighbor_sets is None:
        if skip_filter:
            features = [np.asarray(v.attributes, dtype=np.float64) for v in ds.views]
        else:
            features = smooth_views(ds, hp.m, hp.s)
        neighbor_sets = build_neighbor_sets(features, hp.k, cfg.threads)
    if len(neighbor_sets) != ds.n_views:
        raise ValueError(
            f"{len(neighbor_sets)} neighbor tables for {ds.n_views} views"
        )

    adam = cfg.resolved_adam()
    state = init_state(
        ds.n_nodes, ds.n_views, hp.bits, hp.seed, cfg.resolved_init_scale()
    )

    log_fh = None
    own_log = False
    if log_file is not None:
        if isinstance(log_file, (str, Path)):
            log_fh = open(log_file, "w", encoding="utf-8")
            own_log = True
        else:
            log_fh = log_file
    try:
        prev_total = None
        for epoch in range(1, hp.epochs_max + 1):
            t0 = time.perf_counter()
            breakdown, grad = objective_and_grad(
                state.u,
                neighbor_sets,
                state.view_weights,
                tau=hp.tau,
                eta=hp.eta,
                gamma=hp.gamma,
                alpha=hp.alpha,
                beta=hp.beta,
                sim_kind=hp.sim_kind,
                grad_mode=cfg.grad_mode,
                threads=cfg.threads,
            )
            if not np.isfinite(breakdown.weighted_total) or not np.isfinite(grad).all():
                last = epoch - 1
                detail = (
                    f"last finite epoch was {last} with objective {prev_total}"
                    if last >= 1
                    else "no epoch completed with a finite objective"
                )
                raise DivergenceError(
                    f"objective became non-finite at epoch {epoch}; {detail}"
                )
            _adam_step(state, grad, adam)
            if not np.isfinite(state.u).all():
                raise DivergenceError(
                    f"embedding became non-finite after the update at epoch {epoch}; "
                    f"objective there was {breakdown.weighted_total}"
                )
            if epoch % cfg.lambda_update_every == 0:
                state.view_weights = update_view_weights(
                    breakdown.l_c_per_view, hp.eta, hp.gamma
                )
            state.history.append(breakdown)
            if log_fh is not None:
                wall_ms = (time.perf_counter() - t0) * 1e3
                log_fh.write(
                    json.dumps(
                        {
                            "epoch": epoch,
                            "l_c_per_view": list(breakdown.l_c_per_view),
                            "l_q": breakdown.l_q,
                            "l_bb": breakdown.l_bb,
                            "total": breakdown.weighted_total,
                            "lambda": list(breakdown.view_weights),
                            "wall_ms": wall_ms,
                        }
                    )
                    + "\n"
                )
            total = breakdown.weighted_total
            if prev_total is not None:
                rel = abs(total - prev_total) / max(abs(prev_total), 1.0)
                if rel < hp.tol:
                    break
            prev_total = total
    finally:
        if own_log and log_fh is not None:
            log_fh.close()

    codes = binarize(
        state.u,
        metadata={
            "dataset": ds.name,
            "n": ds.n_nodes,
            "bits": hp.bits,
            "seed": hp.seed,
            "epochs_run": len(state.history),
            "hyperparams": hp.to_dict(),
            "final_total": state.history[-1].weighted_total,
        },
    )
    return state, codes


ABLATION_VARIANTS = ("full", "no_filter", "no_quant", "no_balance")


def ablate(
    ds: MultiViewGraphDataset,
    cfg: Optional[TrainConfig] = None,
    variant: str = "full",
    log_file=None,
) -> tuple[TrainState, BinaryCodes]:
    """Train with one pipeline stage removed.

    no_filter   kNN on raw attributes (no graph smoothing)
    no_quant    alpha forced to 0
    no_balance  beta forced to 0
    """
    if variant not in ABLATION_VARIANTS:
        raise ValueError(f"variant must be one of {ABLATION_VARIANTS}, got {variant!r}")
    cfg = cfg or TrainConfig()
    skip_filter = variant == "no_filter"
    if variant == "no_quant":
        cfg = dataclasses.replace(cfg, hp=dataclasses.replace(cfg.hp, alpha=0.0))
    elif variant == "no_balance":
        cfg = dataclasses.replace(cfg, hp=dataclasses.replace(cfg.hp, beta=0.0))
    return train(ds, cfg, log_file=log_file, skip_filter=skip_filter)
