"""Closed-form collaborative-filtering models.

Two scorers, both fitted in one shot:

* SVD-AE style: regress the interaction matrix onto its degree-normalized
  form through the truncated-SVD pseudo-inverse. The item-item weight
  matrix is never materialized; scores come from two thin factors,
  ``(R_norm V diag(1/sigma)) @ (Q.T R)``.
* EASE style: zero-diagonal ridge regression over items, solved densely
  from the item Gram matrix via the Lagrangian closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .sparse import (
    InteractionMatrix,
    NormalizedMatrix,
    compute_degrees,
    item_gram_dense,
    normalize,
    rows_times_dense,
    sparse_times_dense,
    sparse_transpose_times_dense,
)
from .svd import (
    EXACT_ORACLE_CAP,
    exact_svd,
    randomized_truncated_svd,
    reciprocal_sigma,
    truncate,
)

__all__ = [
    "SvdAeModel",
    "EaseModel",
    "SvdParams",
    "select_rank",
    "fit_svd_ae",
    "predict_svd_ae",
    "fit_ease",
    "predict_ease",
    "DENSE_INVERSION_CAP",
]

# Items beyond this force an |I| x |I| inverse too large for a desk machine.
DENSE_INVERSION_CAP = 50_000


@dataclass(frozen=True)
class SvdParams:
    """Factorization controls shared by fits and sweeps."""

    oversample: int = 10
    power_iters: int = 4
    seed: int = 0
    exact: bool = False


@dataclass(frozen=True, eq=False)
class SvdAeModel:
    """Fitted low-rank scorer: ``scores = user_factors @ item_projection``."""

    user_factors: np.ndarray    # |U| x m
    item_projection: np.ndarray  # m x |I|
    rank: int
    gamma: float | None = None
    seed: int | None = None

    @property
    def num_users(self) -> int:
        return self.user_factors.shape[0]

    @property
    def num_items(self) -> int:
        return self.item_projection.shape[1]


@dataclass(frozen=True, eq=False)
class EaseModel:
    """Fitted item-item weights with a zero diagonal."""

    item_weights: np.ndarray  # |I| x |I|
    lam: float

    @property
    def num_items(self) -> int:
        return self.item_weights.shape[0]


def select_rank(num_users: int, num_items: int, gamma: float) -> int:
    """Rank from the single fraction hyperparameter: floor(gamma * min(|U|, |I|)).

    Clamped to at least 1. A small epsilon guards against float products
    landing just under an integer.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    rank = math.floor(gamma * min(num_users, num_items) + 1e-9)
    return max(1, rank)


def fit_svd_ae(matrix: InteractionMatrix, rank: int, params: SvdParams = SvdParams(),
               normalized: NormalizedMatrix | None = None,
               gamma: float | None = None) -> SvdAeModel:
    """Fit the truncated-SVD pseudo-inverse scorer.

    The closed form factors as ``(R_norm V diag(1/sigma)) @ (Q.T R)``; both
    pieces are thin, so the full item-item weight matrix never exists.
    ``normalized`` may be supplied to reuse a precomputed normalization.
    """
    if matrix.nnz == 0:
        raise ValueError("cannot fit on an empty interaction matrix")
    if not 1 <= rank <= min(matrix.shape):
        raise ValueError(f"rank must be in [1, {min(matrix.shape)}], got {rank}")
    if normalized is None:
        normalized = normalize(matrix, compute_degrees(matrix))
    elif normalized.shape != matrix.shape:
        raise ValueError("normalized matrix does not match the interaction matrix")

    if params.exact:
        if min(matrix.shape) > EXACT_ORACLE_CAP:
            raise ValueError(
                f"exact factorization is capped at min dimension {EXACT_ORACLE_CAP}")
        factors = truncate(exact_svd(normalized.to_dense()), rank)
    else:
        factors = randomized_truncated_svd(
            normalized, rank, oversample=params.oversample,
            power_iters=params.power_iters, seed=params.seed)

    inv = reciprocal_sigma(factors.sigma)
    user_factors = sparse_times_dense(normalized, factors.V) * inv
    item_projection = sparse_transpose_times_dense(matrix, factors.Q).T
    return SvdAeModel(user_factors, item_projection, rank=rank, gamma=gamma, seed=params.seed)


def _check_user_rows(rows, num_users: int) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    if rows.ndim != 1:
        raise ValueError("user rows must be a 1-D index array")
    if rows.size and (rows.min() < 0 or rows.max() >= num_users):
        raise IndexError("user row index out of range")
    return rows


def predict_svd_ae(model: SvdAeModel, user_rows) -> np.ndarray:
    """Score rows for the requested users; a user with no training items scores 0."""
    rows = _check_user_rows(user_rows, model.num_users)
    return model.user_factors[rows] @ model.item_projection


def fit_ease(matrix: InteractionMatrix, lam: float,
             gram: np.ndarray | None = None,
             dense_cap: int = DENSE_INVERSION_CAP) -> EaseModel:
    """Fit the zero-diagonal ridge item model.

    Solves ``P = (R.T R + lam I)^-1`` with a Cholesky factorization (the
    ridge term guarantees positive definiteness; a pivoted solve backs it
    up), then ``B = I - P diag(1 / diag(P))`` so the diagonal is exactly 0.
    ``gram`` may be supplied to reuse a precomputed ``R.T R``.
    """
    if lam <= 0.0:
        raise ValueError(f"lambda must be positive, got {lam}")
    n = matrix.num_items
    if n > dense_cap:
        raise ValueError(f"{n} items exceeds the dense inversion cap ({dense_cap})")
    if gram is None:
        reg = item_gram_dense(matrix)
    else:
        reg = np.array(gram, dtype=np.float64, copy=True)
        if reg.shape != (n, n):
            raise ValueError("precomputed Gram matrix has the wrong shape")
    reg[np.diag_indices(n)] += lam

    identity = np.eye(n)
    try:
        factor = scipy.linalg.cho_factor(reg, check_finite=False)
        inv = scipy.linalg.cho_solve(factor, identity, check_finite=False)
    except scipy.linalg.LinAlgError:
        inv = scipy.linalg.solve(reg, identity, assume_a="gen", check_finite=False)

    diag = np.diag(inv).copy()
    if not np.all(np.isfinite(inv)) or np.any(diag == 0.0):
        raise RuntimeError("regularized Gram solve produced a singular result")
    weights = -(inv / diag[None, :])
    np.fill_diagonal(weights, 0.0)
    return EaseModel(weights, float(lam))


def predict_ease(model: EaseModel, matrix: InteractionMatrix, user_rows) -> np.ndarray:
    """Score rows as ``R[user] @ B``; an empty training row scores 0."""
    if matrix.num_items != model.num_items:
        raise ValueError(
            f"dimension mismatch: matrix has {matrix.num_items} items, model has {model.num_items}")
    rows = _check_user_rows(user_rows, matrix.num_users)
    return rows_times_dense(matrix, rows, model.item_weights)
