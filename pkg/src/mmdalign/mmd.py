"""RBF kernel mixture, minibatch MMD^2 estimator, and its gradient in W.

The estimator is the biased V-statistic (self-pairs included), normalized by
1/B^2. All kernel sums accumulate in float64.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

log = logging.getLogger(__name__)

DEFAULT_BANDWIDTH_MULTIPLIERS = 2.0 ** np.arange(-3, 7)  # 10 values


@dataclass
class KernelSpec:
    """Mixture of isotropic Gaussian kernels: k(a,b) = sum_i exp(-|a-b|^2 / 2 s_i^2)."""

    bandwidths: np.ndarray = field(
        default_factory=lambda: DEFAULT_BANDWIDTH_MULTIPLIERS.copy())

    def __post_init__(self) -> None:
        self.bandwidths = np.asarray(self.bandwidths, dtype=np.float64)
        if self.bandwidths.size == 0 or np.any(self.bandwidths <= 0):
            raise ValueError("bandwidths must be a nonempty list of positive reals")

    @classmethod
    def from_median_heuristic(cls, sample: np.ndarray, n_sample: int = 2048,
                              seed: int = 0) -> "KernelSpec":
        """Geometric grid 2^-3 .. 2^6 times the median pairwise distance."""
        sample = np.asarray(sample, dtype=np.float64)
        if sample.shape[0] > n_sample:
            rng = np.random.default_rng(seed)
            sample = sample[rng.choice(sample.shape[0], n_sample, replace=False)]
        d = cdist(sample, sample)
        med = np.median(d[np.triu_indices_from(d, k=1)])
        if med <= 0:
            med = 1.0
        return cls(DEFAULT_BANDWIDTH_MULTIPLIERS * med)


@dataclass
class Projector:
    """Fixed linear compressor: rows are an orthonormal p-dim basis in R^d."""

    matrix: np.ndarray  # p x d
    offset: np.ndarray  # length d

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        self.offset = np.asarray(self.offset, dtype=np.float64)
        p, d = self.matrix.shape
        if p > d:
            raise ValueError(f"compressed dim {p} exceeds input dim {d}")
        defect = np.linalg.norm(self.matrix @ self.matrix.T - np.eye(p))
        if defect > 1e-6:
            raise ValueError(f"projector rows not orthonormal (defect {defect:.2e})")

    @classmethod
    def identity(cls, d: int) -> "Projector":
        return cls(np.eye(d), np.zeros(d))

    @property
    def p(self) -> int:
        return self.matrix.shape[0]


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cdist(a, b, "sqeuclidean")


def kernel_matrix(a: np.ndarray, b: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Entry (i, j) = sum over bandwidths of exp(-|a_i - b_j|^2 / 2 s^2)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ValueError("column counts differ")
    d2 = _sq_dists(a, b)
    out = np.zeros_like(d2)
    for s in spec.bandwidths:
        out += np.exp(-d2 / (2.0 * s * s))
    return out


def mmd2_batch(wx: np.ndarray, y: np.ndarray, spec: KernelSpec) -> float:
    """Biased minibatch MMD^2 between equally sized batches."""
    wx = np.asarray(wx, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if wx.shape[0] != y.shape[0]:
        raise ValueError(f"batch sizes differ: {wx.shape[0]} vs {y.shape[0]}")
    b = wx.shape[0]
    k_xx = kernel_matrix(wx, wx, spec).sum()
    k_yy = kernel_matrix(y, y, spec).sum()
    k_xy = kernel_matrix(wx, y, spec).sum()
    return float((k_xx - 2.0 * k_xy + k_yy) / (b * b))


def mmd2_gradient(w: np.ndarray, x_batch: np.ndarray, y_batch: np.ndarray,
                  proj: Projector, spec: KernelSpec) -> np.ndarray:
    """Analytic d(MMD^2)/dW for the compressed batches.

    With u_i = P(x_i W - mu) and v_j = P(y_j - mu), the RBF derivative chains
    pairwise differences weighted by kernel values back through P and x.
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x_batch, dtype=np.float64)
    y = np.asarray(y_batch, dtype=np.float64)
    b = x.shape[0]
    if y.shape[0] != b:
        raise ValueError("batch sizes differ")

    u = compress(x @ w, proj)
    v = compress(y, proj)
    d_uu = _sq_dists(u, u)
    d_uv = _sq_dists(u, v)

    # dMMD^2/du accumulated over bandwidths, B x p
    gu = np.zeros_like(u)
    for s in spec.bandwidths:
        inv = 1.0 / (s * s)
        k_uu = np.exp(-d_uu * (0.5 * inv))
        k_uv = np.exp(-d_uv * (0.5 * inv))
        term_uv = k_uv.sum(axis=1)[:, None] * u - k_uv @ v
        term_uu = k_uu.sum(axis=1)[:, None] * u - k_uu @ u
        gu += inv * (term_uv - term_uu)
    gu *= 2.0 / (b * b)

    return x.T @ gu @ proj.matrix


def fit_projector(tgt: "EmbeddingSpace | np.ndarray", p: int) -> Projector:
    """PCA projector: offset = column mean, rows = top-p principal directions."""
    mat = getattr(tgt, "matrix", tgt)
    mat = np.asarray(mat, dtype=np.float64)
    n, d = mat.shape
    if p > d:
        raise ValueError(f"compressed dim {p} exceeds embedding dim {d}")
    if n < p:
        raise ValueError(f"need at least {p} vectors to fit a rank-{p} projector")
    offset = mat.mean(axis=0)
    centered = mat - offset
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[min(p, s.size) - 1] < 1e-12:
        log.warning("fit_projector: data rank below %d; basis padded with an "
                    "arbitrary orthonormal complement", p)
    return Projector(vt[:p], offset)


def compress(rows: np.ndarray, proj: Projector) -> np.ndarray:
    """(rows - offset) projected onto the orthonormal basis."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[1] != proj.matrix.shape[1]:
        raise ValueError(f"dim mismatch: rows have {rows.shape[1]}, "
                         f"projector expects {proj.matrix.shape[1]}")
    return (rows - proj.offset) @ proj.matrix.T
