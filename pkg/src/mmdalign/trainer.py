"""Stochastic MMD^2 minimization over the mapping matrix.

Each step samples unpaired source/target minibatches, takes an Adam step on
the analytic gradient, then pulls W back toward the orthogonal manifold with
the retraction W := (1+beta) W - beta (W W^T) W. Model selection across
epochs uses an unsupervised criterion callback; the best checkpoint wins.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .embeddings import EmbeddingSpace
from .mmd import KernelSpec, Projector, compress, mmd2_batch, mmd2_gradient

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """The MMD^2 objective became non-finite."""


@dataclass
class TrainConfig:
    batch_size: int = 1280
    beta: float = 0.01
    lr0: float = 0.0003
    max_epochs: int = 20
    sample_vocab: int = 20000
    seed: int = 0
    patience: int = 3

    def __post_init__(self) -> None:
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if not 0.0 < self.beta < 0.5:
            raise ValueError("beta must lie in (0, 0.5)")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")


@dataclass
class TrainHistory:
    step_mmd2: list[float] = field(default_factory=list)
    epoch_criterion: list[float] = field(default_factory=list)
    epoch_defect: list[float] = field(default_factory=list)
    init_criterion: float = float("nan")
    best_epoch: int = -1  # -1 means the initial mapping was never beaten


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, shape: tuple[int, ...]) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape))


def adam_step(w: np.ndarray, grad: np.ndarray, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[np.ndarray, AdamState]:
    """One standard Adam update; returns the new matrix and state."""
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    w_new = w - lr * m_hat / (np.sqrt(v_hat) + eps)
    return w_new, AdamState(m, v, t)


def orthogonality_retraction(w: np.ndarray, beta: float) -> np.ndarray:
    """W := (1+beta) W - beta (W W^T) W; orthogonal matrices are fixed points."""
    w = np.asarray(w, dtype=np.float64)
    return (1.0 + beta) * w - beta * (w @ w.T) @ w


def lr_at_epoch(lr0: float, epoch: int) -> float:
    """Halving schedule: lr0 * 2^-epoch."""
    return lr0 * 2.0 ** (-epoch)


def orthogonality_defect(w: np.ndarray) -> float:
    d = w.shape[0]
    return float(np.linalg.norm(w.T @ w - np.eye(d)))


def train(src: EmbeddingSpace, tgt: EmbeddingSpace, w0: np.ndarray,
          proj: Projector, spec: KernelSpec, cfg: TrainConfig,
          criterion: Callable[[np.ndarray], float],
          on_epoch: Callable[[int, np.ndarray, float], None] | None = None,
          ) -> tuple[np.ndarray, TrainHistory]:
    """Run the MMD training loop and return the best-criterion checkpoint.

    Batches are drawn uniformly (and independently per side) from the top
    ``sample_vocab`` words. The learning rate at epoch e is lr0 * 2^-e.
    """
    w = np.asarray(w0, dtype=np.float64).copy()
    d = w.shape[0]
    rng = np.random.default_rng(cfg.seed)
    history = TrainHistory()

    pool_src = min(cfg.sample_vocab, len(src))
    pool_tgt = min(cfg.sample_vocab, len(tgt))
    x_pool = src.matrix[:pool_src].astype(np.float64)
    y_pool = tgt.matrix[:pool_tgt].astype(np.float64)
    steps_per_epoch = max(1, math.ceil(pool_src / cfg.batch_size))

    best_crit = criterion(w)
    best_w = w.copy()
    history.init_criterion = best_crit
    state = AdamState.zeros((d, d))
    epochs_since_improvement = 0

    for epoch in range(cfg.max_epochs):
        lr = lr_at_epoch(cfg.lr0, epoch)
        for _ in range(steps_per_epoch):
            xb = x_pool[rng.choice(pool_src, cfg.batch_size,
                                   replace=cfg.batch_size > pool_src)]
            yb = y_pool[rng.choice(pool_tgt, cfg.batch_size,
                                   replace=cfg.batch_size > pool_tgt)]
            val = mmd2_batch(compress(xb @ w, proj), compress(yb, proj), spec)
            if not math.isfinite(val):
                raise TrainingDiverged(
                    f"MMD^2 became non-finite at epoch {epoch} (value {val})")
            grad = mmd2_gradient(w, xb, yb, proj, spec)
            w, state = adam_step(w, grad, state, lr)
            w = orthogonality_retraction(w, cfg.beta)
            history.step_mmd2.append(val)

        defect = orthogonality_defect(w)
        crit = criterion(w)
        history.epoch_defect.append(defect)
        history.epoch_criterion.append(crit)
        log.info("epoch %d: lr=%.2e mmd2=%.4e criterion=%.4f defect=%.2e",
                 epoch, lr, history.step_mmd2[-1], crit, defect)
        if on_epoch is not None:
            on_epoch(epoch, w, crit)

        if crit > best_crit:
            best_crit = crit
            best_w = w.copy()
            history.best_epoch = epoch
            epochs_since_improvement = 0
        else:
            epochs_since_improvement += 1
            if epochs_since_improvement >= cfg.patience:
                log.info("stopping: no criterion improvement for %d epochs",
                         cfg.patience)
                break

    return best_w, history
