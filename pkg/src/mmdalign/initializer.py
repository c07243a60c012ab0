"""Warm-start mapping from structural similarity of the two spaces.

Each word gets an isometry-invariant signature (its sorted, renormalized row
of the intra-space Gram matrix over the most frequent words). Matching
signatures across languages yields a seed dictionary, and a Procrustes solve
on the matched vectors gives the initial mapping.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingSpace

log = logging.getLogger(__name__)


@dataclass
class InitConfig:
    vocab_cap: int = 4000
    csls_k: int = 10
    use_csls: bool = True

    def __post_init__(self) -> None:
        if self.vocab_cap < 2:
            raise ValueError("vocab_cap must be >= 2")
        if self.csls_k < 1:
            raise ValueError("csls_k must be >= 1")


def similarity_signature(space: EmbeddingSpace, cap: int) -> np.ndarray:
    """Sorted, unit-normalized Gram rows over the top ``cap`` words.

    Invariant under any orthogonal transform of the space, so signatures are
    comparable across languages.
    """
    if cap > len(space):
        raise ValueError(f"cap {cap} exceeds vocabulary size {len(space)}")
    x = space.matrix[:cap].astype(np.float64)
    gram = x @ x.T
    sig = np.sort(gram, axis=1)[:, ::-1]
    norms = np.linalg.norm(sig, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return sig / norms


def match_signatures(sig_x: np.ndarray, sig_y: np.ndarray,
                     use_csls: bool = True, csls_k: int = 10) -> list[tuple[int, int]]:
    """Nearest-target match for every source signature row.

    Signatures of different lengths are zero-padded on the right (rows are
    sorted descending, so padding does not disturb the ordering).
    """
    # imported here to avoid a cycle: lexicon pulls procrustes from this module
    from .lexicon import csls_scores

    cols = max(sig_x.shape[1], sig_y.shape[1])
    if sig_x.shape[1] < cols:
        sig_x = np.pad(sig_x, ((0, 0), (0, cols - sig_x.shape[1])))
    if sig_y.shape[1] < cols:
        sig_y = np.pad(sig_y, ((0, 0), (0, cols - sig_y.shape[1])))

    def unit(m: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(m, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return m / norms

    sim = unit(sig_x) @ unit(sig_y).T
    scores = csls_scores(sim, min(csls_k, sim.shape[0], sim.shape[1])) if use_csls else sim
    best = np.argmax(scores, axis=1)
    return [(i, int(j)) for i, j in enumerate(best)]


def procrustes(x_pairs: np.ndarray, y_pairs: np.ndarray) -> np.ndarray:
    """Orthogonal W minimizing ||xW - y||_F, via SVD of the cross-covariance."""
    x = np.asarray(x_pairs, dtype=np.float64)
    y = np.asarray(y_pairs, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if x.shape[0] < 1:
        raise ValueError("need at least one pair")
    u, s, vt = np.linalg.svd(x.T @ y)
    if s.size and s[-1] < 1e-12:
        log.warning("procrustes: cross-covariance nearly rank deficient "
                    "(sigma_min=%.3e)", s[-1])
    return u @ vt


def build_initial_mapping(src: EmbeddingSpace, tgt: EmbeddingSpace,
                          cfg: InitConfig | None = None) -> np.ndarray:
    """Signature matching -> seed dictionary -> Procrustes -> W0."""
    cfg = cfg or InitConfig()
    cap_x = min(cfg.vocab_cap, len(src))
    cap_y = min(cfg.vocab_cap, len(tgt))
    sig_x = similarity_signature(src, cap_x)
    sig_y = similarity_signature(tgt, cap_y)
    matches = match_signatures(sig_x, sig_y, cfg.use_csls, cfg.csls_k)
    xi = np.array([i for i, _ in matches])
    yi = np.array([j for _, j in matches])
    return procrustes(src.matrix[xi], tgt.matrix[yi])
