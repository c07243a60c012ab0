import numpy as np
import pytest

from mmdalign.embeddings import EmbeddingSpace, Lexicon, Vocabulary, normalize


def random_orthogonal(d, rng):
    return np.linalg.qr(rng.normal(size=(d, d)))[0]


def make_synthetic(n=500, d=20, noise=0.0, seed=0, anisotropic=True):
    """Source space, target = shuffled rotated copy plus Gaussian noise.

    Returns (src, tgt, rotation, gold lexicon, permutation). Target row k
    holds the vector of source index perm[k], so the translation of word
    s_{perm[k]} is t_k.
    """
    rng = np.random.default_rng(seed)
    scales = np.exp(rng.normal(size=d)) if anisotropic else np.ones(d)
    x = rng.normal(size=(n, d)) * scales
    rot = random_orthogonal(d, rng)
    y = x @ rot + rng.normal(scale=noise, size=(n, d))
    perm = rng.permutation(n)
    src = normalize(EmbeddingSpace(Vocabulary([f"s{i}" for i in range(n)]), x))
    tgt = normalize(EmbeddingSpace(Vocabulary([f"t{i}" for i in range(n)]), y[perm]))
    gold = Lexicon([(f"s{perm[k]}", f"t{k}") for k in range(n)])
    return src, tgt, rot, gold, perm


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
