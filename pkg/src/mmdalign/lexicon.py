"""CSLS retrieval, dictionary induction, and iterative Procrustes refinement."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingSpace
from .initializer import procrustes

log = logging.getLogger(__name__)


@dataclass
class RetrievalConfig:
    method: str = "csls"  # "nn" or "csls"
    csls_k: int = 10
    dict_vocab: int = 20000
    mutual_nn: bool = True
    refine_iters: int = 5

    def __post_init__(self) -> None:
        if self.method not in ("nn", "csls"):
            raise ValueError(f"unknown retrieval method {self.method!r}")
        if self.csls_k < 1:
            raise ValueError("csls_k must be >= 1")
        if self.refine_iters < 0:
            raise ValueError("refine_iters must be >= 0")


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return mat / norms


def _topk_mean(values: np.ndarray, k: int, axis: int) -> np.ndarray:
    k = min(k, values.shape[axis])
    part = np.partition(values, values.shape[axis] - k, axis=axis)
    idx = [slice(None)] * values.ndim
    idx[axis] = slice(values.shape[axis] - k, None)
    return part[tuple(idx)].mean(axis=axis)


def csls_scores(sim: np.ndarray, k: int) -> np.ndarray:
    """Hubness-corrected scores: 2 sim(i,j) - r_tgt(i) - r_src(j).

    r_tgt(i) is the mean of row i's top-k values; r_src(j) the mean of column
    j's top-k values.
    """
    sim = np.asarray(sim, dtype=np.float64)
    if k > min(sim.shape):
        raise ValueError(f"k={k} exceeds similarity matrix dims {sim.shape}")
    r_tgt = _topk_mean(sim, k, axis=1)
    r_src = _topk_mean(sim, k, axis=0)
    return 2.0 * sim - r_tgt[:, None] - r_src[None, :]


def retrieve_topk(queries: np.ndarray, targets: np.ndarray, k: int,
                  method: str = "nn", csls_k: int = 10,
                  src_context: np.ndarray | None = None) -> np.ndarray:
    """Indices of the k best targets per query row, best first.

    Cosine similarity throughout. For CSLS, the target hub penalty is
    computed against ``src_context`` (defaults to the queries themselves).
    """
    q = _unit_rows(np.asarray(queries, dtype=np.float64))
    t = _unit_rows(np.asarray(targets, dtype=np.float64))
    sim = q @ t.T
    if method == "csls":
        ctx = q if src_context is None else _unit_rows(
            np.asarray(src_context, dtype=np.float64))
        kk = min(csls_k, t.shape[0], ctx.shape[0])
        r_tgt = _topk_mean(sim, kk, axis=1)
        r_src = _topk_mean(ctx @ t.T, kk, axis=0)
        sim = 2.0 * sim - r_tgt[:, None] - r_src[None, :]
    k = min(k, t.shape[0])
    top = np.argpartition(-sim, k - 1, axis=1)[:, :k]
    order = np.take_along_axis(sim, top, axis=1).argsort(axis=1)[:, ::-1]
    return np.take_along_axis(top, order, axis=1)


def induce_dictionary(w: np.ndarray, src: EmbeddingSpace, tgt: EmbeddingSpace,
                      cfg: RetrievalConfig) -> list[tuple[int, int]]:
    """Best-match index pairs over the top ``dict_vocab`` words of each side.

    With ``mutual_nn`` only pairs that are each other's best match survive.
    Result is sorted by source index; empty output signals a degenerate
    mapping and is left to the caller.
    """
    ns = min(cfg.dict_vocab, len(src))
    nt = min(cfg.dict_vocab, len(tgt))
    x = _unit_rows(src.matrix[:ns].astype(np.float64) @ w)
    y = _unit_rows(tgt.matrix[:nt].astype(np.float64))
    sim = x @ y.T
    if cfg.method == "csls":
        sim = csls_scores(sim, min(cfg.csls_k, ns, nt))
    fwd = np.argmax(sim, axis=1)
    if cfg.mutual_nn:
        bwd = np.argmax(sim, axis=0)
        keep = bwd[fwd] == np.arange(ns)
        return [(int(i), int(fwd[i])) for i in np.nonzero(keep)[0]]
    return [(i, int(j)) for i, j in enumerate(fwd)]


def refine(w0: np.ndarray, src: EmbeddingSpace, tgt: EmbeddingSpace,
           cfg: RetrievalConfig) -> np.ndarray:
    """Alternate dictionary induction and Procrustes, starting from w0.

    Exits early when the induced dictionary stops changing; aborts with the
    last valid mapping if induction comes back empty.
    """
    w = np.asarray(w0, dtype=np.float64)
    prev_pairs: list[tuple[int, int]] | None = None
    for it in range(cfg.refine_iters):
        pairs = induce_dictionary(w, src, tgt, cfg)
        if not pairs:
            log.warning("refine: empty induced dictionary at iteration %d; "
                        "keeping previous mapping", it)
            return w
        if pairs == prev_pairs:
            log.info("refine: dictionary unchanged at iteration %d; stopping", it)
            break
        xi = np.array([i for i, _ in pairs])
        yi = np.array([j for _, j in pairs])
        w = procrustes(src.matrix[xi], tgt.matrix[yi])
        prev_pairs = pairs
    return w
