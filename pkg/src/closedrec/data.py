"""Dataset ingestion, id remapping, and synthetic data generation.

Interaction files are whitespace-separated ``user item`` pairs, one per
line; trailing fields (ratings, timestamps) are ignored because every
interaction counts as positive. Splits arrive pre-made: the union of
all three defines the id maps and every split gets the same dimensions,
so users or items seen only in validation/test simply have empty
training rows.

The synthetic generator draws low-rank latent factors, pushes their dot
products through a sharp sigmoid around a density-matching threshold,
and Bernoulli-samples the result, so the acceptance suite runs without
any external downloads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sparse import InteractionMatrix

__all__ = [
    "ParseStats",
    "DatasetBundle",
    "load_interactions",
    "build_bundle",
    "load_bundle",
    "generate_synthetic",
    "random_interaction_matrix",
    "write_pairs_file",
]


@dataclass
class ParseStats:
    """What ingestion saw: counts plus the line numbers it rejected."""

    path: str
    total_lines: int
    parsed: int
    duplicates: int
    malformed_lines: list[int] = field(default_factory=list)


@dataclass(eq=False)
class DatasetBundle:
    """Aligned train/validation/test matrices plus the id bijections."""

    name: str
    train: InteractionMatrix
    validation: InteractionMatrix
    test: InteractionMatrix
    user_ids: list
    item_ids: list
    user_index: dict
    item_index: dict

    def __post_init__(self):
        shape = self.train.shape
        if self.validation.shape != shape or self.test.shape != shape:
            raise ValueError("all splits must share the same dimensions")

    @property
    def num_users(self) -> int:
        return self.train.num_users

    @property
    def num_items(self) -> int:
        return self.train.num_items


def load_interactions(path, allow_empty: bool = False) -> tuple[list[tuple[str, str]], ParseStats]:
    """Read ``user item`` pairs from a text file.

    Duplicates collapse to one pair (counted), malformed lines are
    skipped with their line numbers recorded. Raises if the file has no
    valid lines at all, unless ``allow_empty`` is set (useful for
    optional validation/test splits).
    """
    path = Path(path)
    pairs: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    malformed: list[int] = []
    duplicates = 0
    total = 0
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            total += 1
            stripped = line.strip()
            if not stripped:
                continue
            parts = stripped.split()
            if len(parts) < 2:
                malformed.append(lineno)
                continue
            key = (parts[0], parts[1])
            if key in seen:
                duplicates += 1
                continue
            seen.add(key)
            pairs.append(key)
    if not pairs and not allow_empty:
        raise ValueError(f"no valid interaction lines in {path}")
    return pairs, ParseStats(str(path), total, len(pairs), duplicates, malformed)


def _index_pairs(pairs, user_index, item_index):
    users = np.fromiter((user_index[u] for u, _ in pairs), dtype=np.int64, count=len(pairs))
    items = np.fromiter((item_index[i] for _, i in pairs), dtype=np.int64, count=len(pairs))
    return users, items


def build_bundle(train_pairs, val_pairs, test_pairs, name: str = "dataset") -> DatasetBundle:
    """Remap external ids over the union of all splits and build matrices.

    Maps are sorted by external id, so any permutation of the input
    pairs produces the identical bundle.
    """
    if not train_pairs:
        raise ValueError("train split must be non-empty")
    user_ids = sorted({u for split in (train_pairs, val_pairs, test_pairs) for u, _ in split})
    item_ids = sorted({i for split in (train_pairs, val_pairs, test_pairs) for _, i in split})
    user_index = {u: idx for idx, u in enumerate(user_ids)}
    item_index = {i: idx for idx, i in enumerate(item_ids)}
    matrices = []
    for split in (train_pairs, val_pairs, test_pairs):
        users, items = _index_pairs(split, user_index, item_index)
        matrices.append(InteractionMatrix.from_pairs(len(user_ids), len(item_ids), users, items))
    return DatasetBundle(name, matrices[0], matrices[1], matrices[2],
                         user_ids, item_ids, user_index, item_index)


def load_bundle(train_path, val_path, test_path, name: str = "dataset") -> DatasetBundle:
    """Ingest three split files into one aligned bundle.

    Validation and test paths are optional and may point at empty files.
    """
    train, _ = load_interactions(train_path)
    val = load_interactions(val_path, allow_empty=True)[0] if val_path else []
    test = load_interactions(test_path, allow_empty=True)[0] if test_path else []
    return build_bundle(train, val, test, name=name)


def random_interaction_matrix(num_users: int, num_items: int, nnz: int,
                              seed: int = 0) -> InteractionMatrix:
    """Uniformly random binary matrix with exactly ``nnz`` stored pairs."""
    total = num_users * num_items
    if nnz > total:
        raise ValueError(f"cannot place {nnz} pairs in a {num_users}x{num_items} matrix")
    rng = np.random.Generator(np.random.PCG64(seed))
    if total <= 4_000_000:
        flat = rng.choice(total, size=nnz, replace=False)
    else:
        flat = np.unique(rng.integers(0, total, size=int(nnz * 1.1) + 16))
        while flat.size < nnz:
            extra = rng.integers(0, total, size=nnz)
            flat = np.unique(np.concatenate([flat, extra]))
        # Uniform thinning keeps the kept set unbiased.
        flat = rng.choice(flat, size=nnz, replace=False)
    return InteractionMatrix.from_pairs(num_users, num_items,
                                        flat // num_items, flat % num_items)


def generate_synthetic(num_users: int = 2000, num_items: int = 1500,
                       latent_rank: int = 8, density: float = 0.025,
                       seed: int = 0, val_fraction: float = 0.1,
                       test_fraction: float = 0.1, sharpness: float = 6.0,
                       name: str = "synthetic") -> DatasetBundle:
    """Low-rank synthetic bundle with per-user holdout splits.

    Latent user/item factors give a score surface; scores pass through a
    sigmoid centered at the (1 - density) quantile and are Bernoulli
    sampled, so roughly ``density * num_users * num_items`` interactions
    emerge with strong rank-``latent_rank`` structure.
    """
    if num_users * num_items > 20_000_000:
        raise ValueError("synthetic generator materializes dense scores; matrix too large")
    if not 0.0 < density < 1.0:
        raise ValueError("density must lie in (0, 1)")
    if val_fraction < 0 or test_fraction < 0 or val_fraction + test_fraction >= 1.0:
        raise ValueError("holdout fractions must be non-negative and sum below 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    user_factors = rng.standard_normal((num_users, latent_rank))
    item_factors = rng.standard_normal((num_items, latent_rank))
    scores = (user_factors @ item_factors.T) / np.sqrt(latent_rank)
    threshold = np.quantile(scores, 1.0 - density)
    probs = 1.0 / (1.0 + np.exp(-sharpness * (scores - threshold)))
    keep = rng.random(scores.shape) < probs

    train_u, train_i, val_u, val_i, test_u, test_i = [], [], [], [], [], []
    for user in range(num_users):
        items = np.nonzero(keep[user])[0]
        if items.size == 0:
            continue
        items = rng.permutation(items)
        n_test = int(test_fraction * items.size) if items.size >= 3 else 0
        n_val = int(val_fraction * items.size) if items.size >= 3 else 0
        test_part = items[:n_test]
        val_part = items[n_test:n_test + n_val]
        train_part = items[n_test + n_val:]
        train_u.extend([user] * train_part.size)
        train_i.extend(train_part.tolist())
        val_u.extend([user] * val_part.size)
        val_i.extend(val_part.tolist())
        test_u.extend([user] * test_part.size)
        test_i.extend(test_part.tolist())

    train = InteractionMatrix.from_pairs(num_users, num_items, train_u, train_i)
    validation = InteractionMatrix.from_pairs(num_users, num_items, val_u, val_i)
    test = InteractionMatrix.from_pairs(num_users, num_items, test_u, test_i)
    ids_u = list(range(num_users))
    ids_i = list(range(num_items))
    return DatasetBundle(name, train, validation, test, ids_u, ids_i,
                         {u: u for u in ids_u}, {i: i for i in ids_i})


def write_pairs_file(path, matrix: InteractionMatrix, user_ids=None, item_ids=None) -> None:
    """Write a matrix back out as ``user item`` lines."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as handle:
        for user in range(matrix.num_users):
            uid = user_ids[user] if user_ids is not None else user
            for item in matrix.row_items(user):
                iid = item_ids[item] if item_ids is not None else int(item)
                handle.write(f"{uid} {iid}\n")
