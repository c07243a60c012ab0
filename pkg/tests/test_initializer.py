import numpy as np
import pytest

from mmdalign.embeddings import EmbeddingSpace, Vocabulary, normalize
from mmdalign.initializer import (InitConfig, build_initial_mapping,
                                  match_signatures, procrustes,
                                  similarity_signature)
from conftest import make_synthetic, random_orthogonal


def space_from(matrix, prefix="w"):
    return EmbeddingSpace(Vocabulary([f"{prefix}{i}" for i in range(len(matrix))]),
                          np.asarray(matrix))


class TestSimilaritySignature:
    def test_orthonormal_rows_give_one_hot_signatures(self):
        sig = similarity_signature(space_from(np.eye(3)), cap=3)
        assert np.allclose(sig, [[1, 0, 0]] * 3)

    def test_isometry_invariance(self, rng):
        x = rng.normal(size=(30, 8))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        rot = random_orthogonal(8, rng)
        sig_a = similarity_signature(space_from(x), 30)
        sig_b = similarity_signature(space_from(x @ rot), 30)
        assert np.max(np.abs(sig_a - sig_b)) <= 1e-10

    def test_two_word_hand_case(self):
        theta = np.pi / 3
        x = np.array([[1.0, 0.0], [np.cos(theta), np.sin(theta)]])
        sig = similarity_signature(space_from(x), 2)
        expected = np.array([1.0, 0.5]) / np.linalg.norm([1.0, 0.5])
        assert np.allclose(sig, [expected, expected], atol=1e-12)
        assert np.allclose(sig[0], [0.8944, 0.4472], atol=1e-4)

    def test_cap_exceeding_vocab(self):
        with pytest.raises(ValueError):
            similarity_signature(space_from(np.eye(3)), cap=4)


class TestMatchSignatures:
    def test_identity(self, rng):
        sig = rng.normal(size=(20, 10))
        matches = match_signatures(sig, sig, use_csls=False)
        assert matches == [(i, i) for i in range(20)]

    def test_recovers_permutation(self, rng):
        sig = rng.normal(size=(20, 10))
        perm = rng.permutation(20)
        matches = match_signatures(sig, sig[perm], use_csls=True)
        inverse = np.argsort(perm)
        assert matches == [(i, int(inverse[i])) for i in range(20)]

    def test_noisy_matches_brute_force_cosine(self, rng):
        sig_x = rng.normal(size=(50, 10))
        sig_y = sig_x + 1e-3 * rng.normal(size=(50, 10))
        matches = match_signatures(sig_x, sig_y, use_csls=False)
        # independent nested-loop cosine retrieval
        for i, j in matches:
            best, best_cos = -1, -np.inf
            for cand in range(50):
                c = np.dot(sig_x[i], sig_y[cand]) / (
                    np.linalg.norm(sig_x[i]) * np.linalg.norm(sig_y[cand]))
                if c > best_cos:
                    best, best_cos = cand, c
            assert j == best
        identity = sum(1 for i, j in matches if i == j)
        assert identity >= 0.95 * 50

    def test_noisy_csls_mostly_identity(self, rng):
        sig_x = rng.normal(size=(50, 10))
        sig_y = sig_x + 1e-3 * rng.normal(size=(50, 10))
        matches = match_signatures(sig_x, sig_y, use_csls=True)
        assert sum(1 for i, j in matches if i == j) >= 0.95 * 50

    def test_zero_padding_of_shorter_signatures(self, rng):
        sig_x = np.abs(rng.normal(size=(10, 6)))
        sig_x = np.sort(sig_x, axis=1)[:, ::-1]
        sig_y = np.hstack([sig_x, np.zeros((10, 3))])
        matches = match_signatures(sig_x, sig_y, use_csls=False)
        assert matches == [(i, i) for i in range(10)]


class TestProcrustes:
    def test_identity_on_equal_inputs(self, rng):
        x = rng.normal(size=(30, 6))
        assert np.allclose(procrustes(x, x), np.eye(6), atol=1e-10)

    @pytest.mark.parametrize("d", [5, 20, 50])
    def test_recovers_rotation(self, d, rng):
        x = rng.normal(size=(4 * d, d))
        rot = random_orthogonal(d, rng)
        w = procrustes(x, x @ rot)
        assert np.linalg.norm(w - rot) <= 1e-8

    def test_2x2_quarter_turn(self):
        w = procrustes(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
        # one pair constrains one direction; the solve maps [1,0] onto [0,1]
        assert np.allclose(np.array([[1.0, 0.0]]) @ w, [[0.0, 1.0]], atol=1e-10)
        assert np.linalg.norm(w.T @ w - np.eye(2)) <= 1e-8

    def test_always_orthogonal(self, rng):
        for _ in range(10):
            x = rng.normal(size=(15, 7))
            y = rng.normal(size=(15, 7))
            w = procrustes(x, y)
            assert np.linalg.norm(w.T @ w - np.eye(7)) <= 1e-8

    def test_rank_deficient_still_orthogonal(self, rng, caplog):
        x = np.zeros((5, 4))
        x[:, 0] = rng.normal(size=5)
        w = procrustes(x, x)
        assert np.linalg.norm(w.T @ w - np.eye(4)) <= 1e-8

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            procrustes(rng.normal(size=(3, 2)), rng.normal(size=(4, 2)))


class TestBuildInitialMapping:
    def test_identical_spaces_give_identity(self):
        src, _, _, _, _ = make_synthetic(n=200, d=10, seed=0)
        w = build_initial_mapping(src, src, InitConfig(vocab_cap=200))
        assert np.allclose(w, np.eye(10), atol=1e-6)

    def test_pure_rotation_recovered(self):
        src, tgt, rot, _, perm = make_synthetic(n=500, d=20, noise=0.0, seed=4)
        w = build_initial_mapping(src, tgt, InitConfig(vocab_cap=500))
        mapped = src.matrix @ w
        hits = 0
        for i in range(len(src)):
            j = np.argmax(tgt.matrix @ mapped[i])
            hits += perm[j] == i
        assert hits == len(src)

    def test_noisy_rotation_p1_at_least_90(self):
        src, tgt, rot, _, perm = make_synthetic(n=500, d=20, noise=0.01, seed=5)
        w = build_initial_mapping(src, tgt, InitConfig(vocab_cap=500))
        mapped = src.matrix @ w
        mapped /= np.linalg.norm(mapped, axis=1, keepdims=True)
        best = np.argmax(mapped @ tgt.matrix.T, axis=1)
        assert np.mean(perm[best] == np.arange(len(src))) >= 0.90

    def test_output_orthogonal(self):
        src, tgt, _, _, _ = make_synthetic(n=300, d=12, noise=0.05, seed=6)
        w = build_initial_mapping(src, tgt, InitConfig(vocab_cap=300))
        assert np.linalg.norm(w.T @ w - np.eye(12)) <= 1e-8


class TestInitConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            InitConfig(vocab_cap=1)
        with pytest.raises(ValueError):
            InitConfig(csls_k=0)
