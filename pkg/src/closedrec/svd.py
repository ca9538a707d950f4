"""Truncated SVD of the normalized interaction matrix.

``randomized_truncated_svd`` is the production path: a Gaussian
range-finder with subspace (power) iterations, re-orthonormalized every
pass to curb round-off growth. ``exact_svd`` is a small dense oracle
used by the test suite to cross-check the randomized factors and the
pseudo-inverse identities; it is capped at a 512 minimum dimension on
purpose.

Randomness comes from ``numpy.random.Generator(PCG64(seed))``, so a
fixed seed reproduces factors bit-for-bit on one thread across builds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sparse import sparse_times_dense, sparse_transpose_times_dense

__all__ = [
    "TruncatedFactorization",
    "randomized_truncated_svd",
    "exact_svd",
    "truncate",
    "reciprocal_sigma",
    "pseudo_inverse_apply",
    "INVERSION_FLOOR",
    "EXACT_ORACLE_CAP",
]

# Retained singular values below this fraction of sigma[0] are treated as
# zero when inverted; reciprocating them would amplify numerical noise.
INVERSION_FLOOR = 1e-12

# exact_svd is a test oracle, not a production path.
EXACT_ORACLE_CAP = 512


@dataclass(frozen=True, eq=False)
class TruncatedFactorization:
    """Top-m factors: orthonormal Q (|U| x m), descending sigma, orthonormal V (|I| x m)."""

    Q: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Q", np.ascontiguousarray(self.Q, dtype=np.float64))
        object.__setattr__(self, "sigma", np.ascontiguousarray(self.sigma, dtype=np.float64))
        object.__setattr__(self, "V", np.ascontiguousarray(self.V, dtype=np.float64))
        m = self.sigma.size
        if self.Q.ndim != 2 or self.V.ndim != 2 or self.Q.shape[1] != m or self.V.shape[1] != m:
            raise ValueError("factor shapes do not agree with sigma length")
        if m and np.any(np.diff(self.sigma) > 0):
            raise ValueError("sigma must be non-increasing")

    @property
    def rank(self) -> int:
        return int(self.sigma.size)

    def reconstruct(self) -> np.ndarray:
        """Dense rank-m reconstruction Q diag(sigma) V.T."""
        return (self.Q * self.sigma) @ self.V.T


def _matmul(matrix, x):
    if isinstance(matrix, np.ndarray):
        return matrix @ x
    return sparse_times_dense(matrix, x)


def _tmatmul(matrix, x):
    if isinstance(matrix, np.ndarray):
        return matrix.T @ x
    return sparse_transpose_times_dense(matrix, x)


def _fix_signs(q: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Make the largest-magnitude entry of each left column positive so runs
    # with the same seed compare equal; scores are invariant to this flip.
    if q.shape[1] == 0:
        return q, v
    anchor = np.argmax(np.abs(q), axis=0)
    signs = np.where(q[anchor, np.arange(q.shape[1])] < 0.0, -1.0, 1.0)
    return q * signs, v * signs


def randomized_truncated_svd(matrix, rank: int, oversample: int = 10,
                             power_iters: int = 4, seed: int = 0) -> TruncatedFactorization:
    """Approximate top-``rank`` factors via a Gaussian sketch.

    Parameters
    ----------
    matrix:
        NormalizedMatrix, InteractionMatrix, or a dense ndarray.
    rank:
        Number of factors to keep, 1 <= rank <= min(shape).
    oversample:
        Extra sketch columns beyond ``rank``; clamped to the small dimension.
    power_iters:
        Subspace iterations; each one sharpens the captured spectrum.
    seed:
        PCG64 stream for the Gaussian test matrix.
    """
    num_rows, num_cols = matrix.shape
    small = min(num_rows, num_cols)
    if not 1 <= rank <= small:
        raise ValueError(f"rank must be in [1, {small}], got {rank}")
    if oversample < 0:
        raise ValueError("oversample must be non-negative")
    if power_iters < 0:
        raise ValueError("power_iters must be non-negative")

    rng = np.random.Generator(np.random.PCG64(seed))
    sketch = min(rank + oversample, small)
    omega = rng.standard_normal((num_cols, sketch))

    q, _ = np.linalg.qr(_matmul(matrix, omega))
    for _ in range(power_iters):
        w, _ = np.linalg.qr(_tmatmul(matrix, q))
        q, _ = np.linalg.qr(_matmul(matrix, w))

    small_factor = _tmatmul(matrix, q).T  # sketch x num_cols
    u_small, sigma, vt = np.linalg.svd(small_factor, full_matrices=False)
    q_full = q @ u_small

    q_top, v_top = _fix_signs(q_full[:, :rank], vt[:rank].T)
    return TruncatedFactorization(q_top, sigma[:rank], v_top)


def exact_svd(matrix) -> TruncatedFactorization:
    """Full SVD of a small dense matrix (test oracle, min dimension <= 512)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("exact_svd expects a 2-D matrix")
    if min(matrix.shape) > EXACT_ORACLE_CAP:
        raise ValueError(f"exact_svd is capped at min dimension {EXACT_ORACLE_CAP}")
    u, sigma, vt = np.linalg.svd(matrix, full_matrices=False)
    u, v = _fix_signs(u, vt.T)
    return TruncatedFactorization(u, sigma, v)


def truncate(factors: TruncatedFactorization, rank: int) -> TruncatedFactorization:
    """Keep the leading ``rank`` factors of an existing factorization."""
    if not 1 <= rank <= factors.rank:
        raise ValueError(f"rank must be in [1, {factors.rank}], got {rank}")
    return TruncatedFactorization(factors.Q[:, :rank], factors.sigma[:rank], factors.V[:, :rank])


def reciprocal_sigma(sigma, rel_floor: float = INVERSION_FLOOR) -> np.ndarray:
    """Reciprocal singular values with values below ``rel_floor * sigma[0]`` zeroed."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.size == 0:
        return np.zeros(0)
    cutoff = rel_floor * sigma[0]
    keep = sigma > cutoff
    out = np.zeros_like(sigma)
    out[keep] = 1.0 / sigma[keep]
    return out


def pseudo_inverse_apply(factors: TruncatedFactorization, x) -> np.ndarray:
    """Apply the factored pseudo-inverse, V diag(1/sigma) Q.T @ x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != factors.Q.shape[0]:
        raise ValueError(
            f"dimension mismatch: operand has {x.shape[0]} rows, factors expect {factors.Q.shape[0]}")
    inv = reciprocal_sigma(factors.sigma)
    if x.ndim == 1:
        return factors.V @ (inv * (factors.Q.T @ x))
    return factors.V @ (inv[:, None] * (factors.Q.T @ x))
