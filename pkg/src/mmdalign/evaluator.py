"""Benchmark evaluation: lexicon induction accuracy, cross-lingual word
similarity, the unsupervised validation criterion, and the common/rare
frequency split."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingSpace, Lexicon
from .lexicon import RetrievalConfig, _unit_rows, csls_scores, retrieve_topk

log = logging.getLogger(__name__)

COMMON_WORD_CUTOFF = 20000


@dataclass
class BucketStats:
    p_at_1: float
    p_at_5: float
    n_evaluated: int


@dataclass
class BliReport:
    p_at_1: float
    p_at_5: float
    n_evaluated: int
    n_skipped_oov: int
    buckets: dict[str, BucketStats] = field(default_factory=dict)


@dataclass
class SimilarityReport:
    pearson_r: float
    n_evaluated: int
    n_skipped_oov: int


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Sample Pearson correlation; errors out on degenerate input."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be equal-length 1-d series")
    if a.size < 2:
        raise ValueError("need at least two observations")
    ac = a - a.mean()
    bc = b - b.mean()
    va = np.dot(ac, ac)
    vb = np.dot(bc, bc)
    if va == 0.0 or vb == 0.0:
        raise ValueError("zero variance in input series")
    return float(np.dot(ac, bc) / np.sqrt(va * vb))


def bli_accuracy(w: np.ndarray, src: EmbeddingSpace, tgt: EmbeddingSpace,
                 gold: Lexicon, cfg: RetrievalConfig | None = None,
                 bucket_cutoff: int = COMMON_WORD_CUTOFF) -> BliReport:
    """Precision@1/@5 of translation retrieval over the gold dictionary.

    A hit at rank k means any gold translation of the source word appears in
    the top-k retrieved target words. Gold entries whose source word is OOV
    are skipped and counted; entries are grouped by unique source word.
    """
    cfg = cfg or RetrievalConfig(method="nn")
    if not gold.pairs:
        raise ValueError("empty gold lexicon")

    translations: dict[str, set[str]] = {}
    for s, t in gold.pairs:
        translations.setdefault(s, set()).add(t)

    src_words = [s for s in translations if s in src.vocab]
    n_skipped = len(translations) - len(src_words)
    if not src_words:
        raise ValueError("every gold source word is out of vocabulary")

    src_idx = np.array([src.vocab.index[s] for s in src_words])
    queries = src.matrix[src_idx].astype(np.float64) @ w
    context = src.matrix[:min(cfg.dict_vocab, len(src))].astype(np.float64) @ w
    top5 = retrieve_topk(queries, tgt.matrix, 5, cfg.method, cfg.csls_k,
                         src_context=context)

    hits1 = np.zeros(len(src_words), dtype=bool)
    hits5 = np.zeros(len(src_words), dtype=bool)
    for row, word in enumerate(src_words):
        retrieved = [tgt.vocab.words[j] for j in top5[row]]
        gold_set = translations[word]
        hits1[row] = retrieved[0] in gold_set
        hits5[row] = any(t in gold_set for t in retrieved)

    report = BliReport(
        p_at_1=float(hits1.mean()),
        p_at_5=float(hits5.mean()),
        n_evaluated=len(src_words),
        n_skipped_oov=n_skipped,
    )
    ranks = src_idx
    for name, mask in (("common", ranks < bucket_cutoff),
                       ("rare", ranks >= bucket_cutoff)):
        if np.any(mask):
            report.buckets[name] = BucketStats(
                p_at_1=float(hits1[mask].mean()),
                p_at_5=float(hits5[mask].mean()),
                n_evaluated=int(mask.sum()),
            )
    return report


def frequency_bucket_report(w: np.ndarray, src: EmbeddingSpace,
                            tgt: EmbeddingSpace, gold: Lexicon,
                            cfg: RetrievalConfig | None = None,
                            cutoff: int = COMMON_WORD_CUTOFF) -> dict[str, BucketStats]:
    """Per-bucket accuracy with the gold split at source frequency rank ``cutoff``."""
    return bli_accuracy(w, src, tgt, gold, cfg, bucket_cutoff=cutoff).buckets


def word_similarity(w: np.ndarray, src: EmbeddingSpace, tgt: EmbeddingSpace,
                    pairs: list[tuple[str, str, float]]) -> SimilarityReport:
    """Pearson correlation of mapped cosine similarities with human scores."""
    usable = [(s, t, h) for s, t, h in pairs if s in src.vocab and t in tgt.vocab]
    n_skipped = len(pairs) - len(usable)
    if len(usable) < 2:
        raise ValueError(f"need >= 2 in-vocabulary pairs, got {len(usable)}")
    xs = src.matrix[[src.vocab.index[s] for s, _, _ in usable]].astype(np.float64) @ w
    ys = tgt.matrix[[tgt.vocab.index[t] for _, t, _ in usable]].astype(np.float64)
    xs = _unit_rows(xs)
    ys = _unit_rows(ys)
    predicted = np.sum(xs * ys, axis=1)
    human = np.array([h for _, _, h in usable], dtype=np.float64)
    return SimilarityReport(pearson(predicted, human), len(usable), n_skipped)


def unsupervised_criterion(w: np.ndarray, src: EmbeddingSpace,
                           tgt: EmbeddingSpace, k_words: int = 10000) -> float:
    """Mean cosine of CSLS-retrieved translations over frequent words.

    Needs no gold data; higher is better. Used for stopping and model
    selection.
    """
    ns = min(k_words, len(src))
    nt = min(k_words, len(tgt))
    x = _unit_rows(src.matrix[:ns].astype(np.float64) @ w)
    y = _unit_rows(tgt.matrix[:nt].astype(np.float64))
    sim = x @ y.T
    scores = csls_scores(sim, min(10, ns, nt))
    best = np.argmax(scores, axis=1)
    return float(sim[np.arange(ns), best].mean())
