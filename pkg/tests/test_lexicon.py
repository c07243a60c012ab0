import numpy as np
import pytest

from mmdalign.lexicon import (RetrievalConfig, csls_scores, induce_dictionary,
                              refine, retrieve_topk)
from mmdalign.trainer import orthogonality_defect
from conftest import make_synthetic, random_orthogonal


def brute_force_csls(sim, k):
    n, m = sim.shape
    out = np.zeros_like(sim)
    for i in range(n):
        r_tgt = np.mean(sorted(sim[i], reverse=True)[:k])
        for j in range(m):
            r_src = np.mean(sorted(sim[:, j], reverse=True)[:k])
            out[i, j] = 2 * sim[i, j] - r_tgt - r_src
    return out


class TestCslsScores:
    def test_constant_matrix_gives_zero(self):
        sim = np.full((5, 7), 0.37)
        assert np.allclose(csls_scores(sim, 3), 0.0)

    def test_full_k_uniform_shift(self, rng):
        # k = n = m with every row and column mean equal to mu: scores are
        # 2 sim - 2 mu, so row argmax matches plain cosine
        raw = rng.normal(size=(6, 6))
        mu = 0.3
        sim = raw - raw.mean(axis=1, keepdims=True) - raw.mean(axis=0) \
            + raw.mean() + mu
        assert np.allclose(sim.mean(axis=1), mu) and np.allclose(sim.mean(axis=0), mu)
        scores = csls_scores(sim, 6)
        assert np.allclose(scores, 2.0 * sim - 2.0 * mu, atol=1e-12)
        assert np.array_equal(np.argmax(scores, axis=1), np.argmax(sim, axis=1))

    def test_three_by_three_hand_case(self):
        sim = np.array([[0.9, 0.1, 0.1], [0.1, 0.8, 0.1], [0.2, 0.1, 0.7]])
        scores = csls_scores(sim, 1)
        assert np.array_equal(np.argmax(scores, axis=1), [0, 1, 2])

    def test_matches_brute_force(self, rng):
        sim = rng.normal(size=(8, 11))
        for k in (1, 3, 8):
            assert np.allclose(csls_scores(sim, k), brute_force_csls(sim, k),
                               atol=1e-12)

    def test_k_too_large(self, rng):
        with pytest.raises(ValueError):
            csls_scores(rng.normal(size=(3, 4)), 4)


class TestRetrieveTopk:
    def test_nn_identity(self, rng):
        x = rng.normal(size=(10, 6))
        top = retrieve_topk(x, x, 3, method="nn")
        assert np.array_equal(top[:, 0], np.arange(10))

    def test_csls_identity(self, rng):
        x = rng.normal(size=(15, 6))
        top = retrieve_topk(x, x, 1, method="csls")
        assert np.array_equal(top[:, 0], np.arange(15))

    def test_ranked_best_first(self, rng):
        q = rng.normal(size=(5, 4))
        t = rng.normal(size=(20, 4))
        top = retrieve_topk(q, t, 4, method="nn")
        qn = q / np.linalg.norm(q, axis=1, keepdims=True)
        tn = t / np.linalg.norm(t, axis=1, keepdims=True)
        sims = qn @ tn.T
        for row in range(5):
            got = list(np.take_along_axis(sims[row], top[row], 0))
            assert got == sorted(got, reverse=True)
            assert np.isclose(got[0], sims[row].max())


class TestInduceDictionary:
    def test_identity_space(self):
        src, _, _, _, _ = make_synthetic(n=100, d=8, seed=1)
        cfg = RetrievalConfig(method="nn", dict_vocab=100)
        pairs = induce_dictionary(np.eye(8), src, src, cfg)
        assert pairs == [(i, i) for i in range(100)]

    def test_exact_rotation(self):
        src, tgt, rot, _, perm = make_synthetic(n=200, d=12, noise=0.0, seed=2)
        cfg = RetrievalConfig(method="csls", dict_vocab=200)
        pairs = induce_dictionary(rot, src, tgt, cfg)
        assert len(pairs) == 200
        assert all(perm[j] == i for i, j in pairs)

    def test_noisy_mostly_correct(self):
        src, tgt, rot, _, perm = make_synthetic(n=200, d=12, noise=0.01, seed=3)
        cfg = RetrievalConfig(method="csls", dict_vocab=200)
        pairs = induce_dictionary(rot, src, tgt, cfg)
        correct = sum(1 for i, j in pairs if perm[j] == i)
        assert correct >= 0.9 * len(pairs) > 0

    def test_mutual_nn_is_intersection_of_best_matches(self, rng):
        src, tgt, rot, _, _ = make_synthetic(n=80, d=10, noise=0.3, seed=4)
        cfg = RetrievalConfig(method="nn", dict_vocab=80, mutual_nn=True)
        pairs = set(induce_dictionary(np.eye(10), src, tgt, cfg))
        x = src.matrix.astype(np.float64)
        y = tgt.matrix.astype(np.float64)
        sim = (x / np.linalg.norm(x, axis=1, keepdims=True)) @ \
              (y / np.linalg.norm(y, axis=1, keepdims=True)).T
        fwd = {(i, int(np.argmax(sim[i]))) for i in range(80)}
        bwd = {(int(np.argmax(sim[:, j])), j) for j in range(80)}
        assert pairs == fwd & bwd

    def test_sorted_by_source_index(self):
        src, tgt, rot, _, _ = make_synthetic(n=50, d=8, noise=0.1, seed=5)
        pairs = induce_dictionary(rot, src, tgt, RetrievalConfig(dict_vocab=50))
        assert [i for i, _ in pairs] == sorted(i for i, _ in pairs)


class TestRefine:
    def test_fixed_point_on_noiseless_rotation(self):
        src, tgt, rot, _, _ = make_synthetic(n=150, d=10, noise=0.0, seed=6)
        cfg = RetrievalConfig(method="csls", dict_vocab=150, refine_iters=5)
        w = refine(rot, src, tgt, cfg)
        assert np.linalg.norm(w - rot) <= 1e-6

    def test_improves_perturbed_start(self, rng):
        src, tgt, rot, _, perm = make_synthetic(n=300, d=16, noise=0.01, seed=7)
        w0 = rot + 0.1 * rng.normal(size=rot.shape)
        cfg = RetrievalConfig(method="csls", dict_vocab=300, refine_iters=5)
        w = refine(w0, src, tgt, cfg)

        def p_at_1(m):
            x = src.matrix @ m
            x /= np.linalg.norm(x, axis=1, keepdims=True)
            best = np.argmax(x @ tgt.matrix.T, axis=1)
            return np.mean(perm[best] == np.arange(len(src)))

        assert p_at_1(w) >= p_at_1(w0)

    def test_zero_iterations_returns_input(self, rng):
        src, tgt, _, _, _ = make_synthetic(n=50, d=6, seed=8)
        w0 = rng.normal(size=(6, 6))
        cfg = RetrievalConfig(refine_iters=0)
        assert np.allclose(refine(w0, src, tgt, cfg), w0)

    def test_output_exactly_orthogonal(self, rng):
        src, tgt, rot, _, _ = make_synthetic(n=100, d=8, noise=0.05, seed=9)
        w0 = rot + 0.2 * rng.normal(size=rot.shape)  # non-orthogonal start
        cfg = RetrievalConfig(method="csls", dict_vocab=100, refine_iters=3)
        w = refine(w0, src, tgt, cfg)
        assert orthogonality_defect(w) <= 1e-8


class TestRetrievalConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            RetrievalConfig(method="cosine")
        with pytest.raises(ValueError):
            RetrievalConfig(csls_k=0)
        with pytest.raises(ValueError):
            RetrievalConfig(refine_iters=-1)
