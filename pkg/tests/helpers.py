"""Shared generators for randomized test instances."""

import numpy as np

from closedrec.sparse import InteractionMatrix


def random_binary_matrix(num_users, num_items, density, seed,
                         ensure_degrees=True) -> InteractionMatrix:
    """Random binary matrix; optionally patch empty rows/columns."""
    rng = np.random.default_rng(seed)
    dense = rng.random((num_users, num_items)) < density
    if ensure_degrees:
        for u in np.nonzero(~dense.any(axis=1))[0]:
            dense[u, rng.integers(num_items)] = True
        for i in np.nonzero(~dense.any(axis=0))[0]:
            dense[rng.integers(num_users), i] = True
    return InteractionMatrix.from_dense(dense)


def ring_matrix() -> InteractionMatrix:
    """3x3 pattern where every user and item has degree 2."""
    return InteractionMatrix.from_dense([[1, 1, 0], [1, 0, 1], [0, 1, 1]])
