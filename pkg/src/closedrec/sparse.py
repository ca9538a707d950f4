"""Compressed-row binary interaction matrices and degree normalization.

An interaction matrix stores one implicit 1 per (user, item) pair in CSR
layout: ``row_offsets`` of length ``num_users + 1`` and sorted
``col_indices``. ``normalize`` keeps the same sparsity pattern and
rescales each stored entry to ``1 / sqrt(user_degree * item_degree)``,
the symmetric degree normalization whose singular values stay in [0, 1].

Instances are immutable: buffers are marked read-only at construction
and shared freely between a matrix and its normalized form. Products
against dense blocks run through a cached SciPy CSR view that shares
the same buffers, so building the view costs one ones-vector at most;
they evaluate single-threaded and are deterministic run to run.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "InteractionMatrix",
    "DegreeVectors",
    "NormalizedMatrix",
    "compute_degrees",
    "normalize",
    "sparse_times_dense",
    "sparse_transpose_times_dense",
    "rows_times_dense",
    "dense_block",
    "item_gram_dense",
    "frobenius_mse",
    "same_structure",
]


def _own(values, dtype) -> np.ndarray:
    """Return a read-only C-contiguous array, copying unless already frozen."""
    arr = np.asarray(values, dtype=dtype)
    if arr is values and arr.flags.c_contiguous and not arr.flags.writeable:
        return arr
    out = np.array(arr, dtype=dtype, order="C", copy=True)
    out.flags.writeable = False
    return out


def _check_structure(num_users, num_items, row_offsets, col_indices) -> None:
    if num_users < 0 or num_items < 0:
        raise ValueError("matrix dimensions must be non-negative")
    if row_offsets.ndim != 1 or row_offsets.size != num_users + 1:
        raise ValueError("row_offsets must have length num_users + 1")
    if row_offsets[0] != 0:
        raise ValueError("row_offsets must start at 0")
    if np.any(np.diff(row_offsets) < 0):
        raise ValueError("row_offsets must be non-decreasing")
    nnz = int(row_offsets[-1])
    if col_indices.ndim != 1 or col_indices.size != nnz:
        raise ValueError("col_indices length must equal row_offsets[-1]")
    if nnz == 0:
        return
    if col_indices.min() < 0 or col_indices.max() >= num_items:
        raise ValueError("column index out of range")
    # Strictly increasing inside each row; equality would be a duplicate pair.
    if nnz > 1:
        non_increasing = col_indices[1:] <= col_indices[:-1]
        row_start = np.zeros(nnz, dtype=bool)
        starts = row_offsets[1:-1]
        row_start[starts[starts < nnz]] = True
        if np.any(non_increasing & ~row_start[1:]):
            raise ValueError("col_indices must be strictly increasing within each row")


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Binary user-item matrix in compressed row storage (implicit value 1)."""

    num_users: int
    num_items: int
    row_offsets: np.ndarray
    col_indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_offsets", _own(self.row_offsets, np.int64))
        object.__setattr__(self, "col_indices", _own(self.col_indices, np.int64))
        _check_structure(self.num_users, self.num_items, self.row_offsets, self.col_indices)

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_users, self.num_items)

    @classmethod
    def from_pairs(cls, num_users: int, num_items: int, users, items) -> "InteractionMatrix":
        """Build from (user, item) index arrays; duplicates are collapsed."""
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if users.shape != items.shape or users.ndim != 1:
            raise ValueError("users and items must be 1-D arrays of equal length")
        if users.size:
            if users.min() < 0 or users.max() >= num_users:
                raise ValueError("user index out of range")
            if items.min() < 0 or items.max() >= num_items:
                raise ValueError("item index out of range")
        flat = np.unique(users * np.int64(num_items) + items)
        u = flat // num_items
        i = flat % num_items
        offsets = np.zeros(num_users + 1, dtype=np.int64)
        offsets[1:] = np.cumsum(np.bincount(u, minlength=num_users))
        return cls(num_users, num_items, offsets, i)

    @classmethod
    def from_dense(cls, dense) -> "InteractionMatrix":
        dense = np.asarray(dense)
        u, i = np.nonzero(dense)
        return cls.from_pairs(dense.shape[0], dense.shape[1], u, i)

    def row_items(self, user: int) -> np.ndarray:
        """Item indices of one user's row (a read-only view)."""
        return self.col_indices[self.row_offsets[user]:self.row_offsets[user + 1]]

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        rows = np.repeat(np.arange(self.num_users), np.diff(self.row_offsets))
        out[rows, self.col_indices] = 1.0
        return out

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        data = np.ones(self.nnz)
        return sp.csr_matrix((data, self.col_indices, self.row_offsets), shape=self.shape)


@dataclass(frozen=True, eq=False)
class DegreeVectors:
    """Row and column interaction counts; both sum to nnz."""

    user_degrees: np.ndarray
    item_degrees: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "user_degrees", _own(self.user_degrees, np.int64))
        object.__setattr__(self, "item_degrees", _own(self.item_degrees, np.int64))
        if np.any(self.user_degrees < 0) or np.any(self.item_degrees < 0):
            raise ValueError("degrees must be non-negative")
        if self.user_degrees.sum() != self.item_degrees.sum():
            raise ValueError("user and item degree sums disagree")


@dataclass(frozen=True, eq=False)
class NormalizedMatrix:
    """Degree-normalized matrix sharing the source pattern; values in (0, 1]."""

    num_users: int
    num_items: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_offsets", _own(self.row_offsets, np.int64))
        object.__setattr__(self, "col_indices", _own(self.col_indices, np.int64))
        object.__setattr__(self, "values", _own(self.values, np.float64))
        _check_structure(self.num_users, self.num_items, self.row_offsets, self.col_indices)
        if self.values.shape != self.col_indices.shape:
            raise ValueError("values must align with col_indices")
        if self.values.size and (self.values.min() <= 0.0 or self.values.max() > 1.0):
            raise ValueError("normalized values must lie in (0, 1]")

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_users, self.num_items)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        rows = np.repeat(np.arange(self.num_users), np.diff(self.row_offsets))
        out[rows, self.col_indices] = self.values
        return out

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.col_indices, self.row_offsets), shape=self.shape)


def compute_degrees(matrix: InteractionMatrix) -> DegreeVectors:
    """Count interactions per user row and per item column."""
    user = np.diff(matrix.row_offsets)
    if matrix.nnz:
        item = np.bincount(matrix.col_indices, minlength=matrix.num_items)
    else:
        item = np.zeros(matrix.num_items, dtype=np.int64)
    return DegreeVectors(user, item)


def normalize(matrix: InteractionMatrix, degrees: DegreeVectors) -> NormalizedMatrix:
    """Rescale each stored entry by 1/sqrt(user_degree * item_degree).

    The pattern is shared with the source matrix, so users or items with
    zero degree simply contribute no stored values.
    """
    if degrees.user_degrees.size != matrix.num_users or degrees.item_degrees.size != matrix.num_items:
        raise ValueError("degree vectors do not match matrix dimensions")
    if int(degrees.user_degrees.sum()) != matrix.nnz:
        raise ValueError("degrees were not computed from this matrix")
    per_entry_user = np.repeat(degrees.user_degrees, np.diff(matrix.row_offsets)).astype(np.float64)
    per_entry_item = degrees.item_degrees[matrix.col_indices].astype(np.float64)
    values = 1.0 / np.sqrt(per_entry_user * per_entry_item)
    return NormalizedMatrix(matrix.num_users, matrix.num_items,
                            matrix.row_offsets, matrix.col_indices, values)


def _as_dense_operand(x, rows: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise ValueError(f"{what} must be 1-D or 2-D")
    if x.shape[0] != rows:
        raise ValueError(f"dimension mismatch: {what} has {x.shape[0]} rows, expected {rows}")
    return x


def sparse_times_dense(matrix, dense) -> np.ndarray:
    """Exact product ``M @ X`` for an interaction or normalized matrix."""
    dense = _as_dense_operand(dense, matrix.num_items, "dense operand")
    return np.asarray(matrix._csr @ dense)


def sparse_transpose_times_dense(matrix, dense) -> np.ndarray:
    """Exact product ``M.T @ X``."""
    dense = _as_dense_operand(dense, matrix.num_users, "dense operand")
    return np.asarray(matrix._csr.T @ dense)


def rows_times_dense(matrix, rows, dense) -> np.ndarray:
    """Product of a row subset of the sparse matrix against a dense matrix."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= matrix.num_users):
        raise IndexError("user row index out of range")
    dense = _as_dense_operand(dense, matrix.num_items, "dense operand")
    return np.asarray(matrix._csr[rows] @ dense)


def dense_block(matrix, rows, cols) -> np.ndarray:
    """Densified sub-block ``M[rows][:, cols]``."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= matrix.num_users):
        raise IndexError("user row index out of range")
    if cols.size and (cols.min() < 0 or cols.max() >= matrix.num_items):
        raise IndexError("item column index out of range")
    return np.asarray(matrix._csr[rows][:, cols].todense())


def item_gram_dense(matrix: InteractionMatrix) -> np.ndarray:
    """Dense item-item Gram matrix ``R.T @ R`` accumulated sparsely."""
    gram = (matrix._csr.T @ matrix._csr).toarray()
    return np.asarray(gram, dtype=np.float64)


def frobenius_mse(matrix: InteractionMatrix, reconstruction) -> float:
    """Squared Frobenius distance between R and a dense reconstruction.

    Summed over all entries, observed and unobserved:
    ``sum(R_hat**2) - 2 * sum(R_hat at stored pairs) + nnz``.
    """
    reconstruction = np.asarray(reconstruction, dtype=np.float64)
    if reconstruction.shape != matrix.shape:
        raise ValueError(
            f"dimension mismatch: reconstruction is {reconstruction.shape}, matrix is {matrix.shape}")
    rows = np.repeat(np.arange(matrix.num_users), np.diff(matrix.row_offsets))
    observed = reconstruction[rows, matrix.col_indices]
    return float(np.sum(reconstruction * reconstruction) - 2.0 * np.sum(observed) + matrix.nnz)


def same_structure(a, b) -> bool:
    """True when two matrices share dimensions and sparsity pattern."""
    return (a.num_users == b.num_users and a.num_items == b.num_items
            and np.array_equal(a.row_offsets, b.row_offsets)
            and np.array_equal(a.col_indices, b.col_indices))
