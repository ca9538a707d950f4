"""Top-k ranking, ranking metrics, and training-noise injection.

Ranking masks each user's training items (effective score -inf), then
takes the k largest scores with ties broken by ascending item id, so
results are deterministic and depend only on the induced ordering.

Metrics follow the usual implicit-feedback conventions:

* hit ratio: ``|top-k intersect test| / min(k, |test|)`` (a ``recall``
  mode divides by ``|test|`` instead);
* NDCG with binary relevance and 1-based log2 position discounting;
* propensity-scored precision with the standard long-tail propensity
  model ``p_i = 1 / (1 + C * (f_i + B)^-A)``, normalized per user by the
  best achievable inverse-propensity mass so values stay in [0, 1].

Users with empty test sets are skipped and counted, never averaged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sparse import InteractionMatrix

__all__ = [
    "TopKRanking",
    "EvalReport",
    "NoiseSpec",
    "rank_top_k",
    "build_rankings",
    "hr_at_k",
    "ndcg_at_k",
    "psp_at_k",
    "inverse_propensities",
    "evaluate_rankings",
    "inject_noise",
    "PSP_A",
    "PSP_B",
]

PSP_A = 0.55
PSP_B = 1.5


@dataclass(eq=False)
class TopKRanking:
    """Per-user ranked item/score lists of depth at most k.

    ``short_users`` flags users whose candidate pool (items minus their
    training row) was smaller than k; their lists are shorter.
    """

    user_rows: np.ndarray
    items: list[np.ndarray]
    scores: list[np.ndarray]
    k: int
    short_users: np.ndarray

    def __len__(self) -> int:
        return len(self.items)

    @classmethod
    def concat(cls, parts: list["TopKRanking"]) -> "TopKRanking":
        if not parts:
            raise ValueError("cannot concatenate zero ranking chunks")
        k = parts[0].k
        if any(p.k != k for p in parts):
            raise ValueError("ranking chunks disagree on k")
        return cls(
            user_rows=np.concatenate([p.user_rows for p in parts]),
            items=[arr for p in parts for arr in p.items],
            scores=[arr for p in parts for arr in p.scores],
            k=k,
            short_users=np.concatenate([p.short_users for p in parts]),
        )


@dataclass(eq=False)
class EvalReport:
    """Metric values per requested k plus run metadata."""

    metrics: dict[str, float]
    ks: list[int]
    metadata: dict = field(default_factory=dict)
    per_user: dict[str, np.ndarray] | None = None


@dataclass(frozen=True)
class NoiseSpec:
    """How much random interaction noise to add and under which seed."""

    ratio: float
    seed: int = 0

    def __post_init__(self):
        if self.ratio < 0.0:
            raise ValueError(f"noise ratio must be non-negative, got {self.ratio}")


def rank_top_k(scores, train_mask, k: int, user_rows=None) -> TopKRanking:
    """Rank the k best unseen items per score row.

    ``train_mask`` holds one item-index array per row; those items are
    excluded. Ties break toward the smaller item id (stable sort on the
    negated scores).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = scores[None, :]
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    n_rows, n_items = scores.shape
    if len(train_mask) != n_rows:
        raise ValueError("train_mask length must match the number of score rows")
    if user_rows is None:
        user_rows = np.arange(n_rows, dtype=np.int64)
    else:
        user_rows = np.asarray(user_rows, dtype=np.int64)
        if user_rows.size != n_rows:
            raise ValueError("user_rows length must match the number of score rows")

    items: list[np.ndarray] = []
    kept_scores: list[np.ndarray] = []
    short = np.zeros(n_rows, dtype=bool)
    for r in range(n_rows):
        row = scores[r].copy()
        mask = np.asarray(train_mask[r], dtype=np.int64)
        if mask.size:
            row[mask] = -np.inf
        top = np.argsort(-row, kind="stable")[:k]
        vals = row[top]
        keep = vals > -np.inf
        if not keep.all():
            top, vals = top[keep], vals[keep]
            short[r] = True
        items.append(top.astype(np.int64))
        kept_scores.append(vals)
    return TopKRanking(user_rows, items, kept_scores, k, short)


def build_rankings(score_rows, train_sets, user_rows, k: int,
                   chunk_size: int = 1024) -> TopKRanking:
    """Rank users in chunks; ``score_rows(rows)`` returns their score block."""
    user_rows = np.asarray(user_rows, dtype=np.int64)
    if user_rows.size == 0:
        return TopKRanking(user_rows, [], [], k, np.zeros(0, dtype=bool))
    parts = []
    for start in range(0, user_rows.size, chunk_size):
        rows = user_rows[start:start + chunk_size]
        block = score_rows(rows)
        parts.append(rank_top_k(block, [train_sets[u] for u in rows], k, user_rows=rows))
    return TopKRanking.concat(parts)


def _iter_evaluable(rankings: TopKRanking, test_sets):
    for pos, user in enumerate(rankings.user_rows):
        test = np.asarray(test_sets[user], dtype=np.int64)
        if test.size:
            yield pos, test


def _mean(values: list[float]) -> float:
    return float(np.mean(values)) if values else 0.0


def hr_at_k(rankings: TopKRanking, test_sets, k: int, mode: str = "truncated") -> float:
    """Mean hit ratio at depth k over users with non-empty test sets."""
    if mode not in ("truncated", "recall"):
        raise ValueError(f"unknown hr mode {mode!r}")
    if not 1 <= k <= rankings.k:
        raise ValueError(f"k must be in [1, {rankings.k}] for these rankings")
    vals = []
    for pos, test in _iter_evaluable(rankings, test_sets):
        hits = int(np.isin(rankings.items[pos][:k], test).sum())
        denom = min(k, test.size) if mode == "truncated" else test.size
        vals.append(hits / denom)
    return _mean(vals)


def ndcg_at_k(rankings: TopKRanking, test_sets, k: int) -> float:
    """Mean binary-relevance NDCG at depth k."""
    if not 1 <= k <= rankings.k:
        raise ValueError(f"k must be in [1, {rankings.k}] for these rankings")
    vals = []
    for pos, test in _iter_evaluable(rankings, test_sets):
        hit_positions = np.nonzero(np.isin(rankings.items[pos][:k], test))[0]
        dcg = float(np.sum(1.0 / np.log2(hit_positions + 2.0)))
        ideal = min(k, test.size)
        idcg = float(np.sum(1.0 / np.log2(np.arange(ideal) + 2.0)))
        vals.append(dcg / idcg)
    return _mean(vals)


def inverse_propensities(train_item_frequencies, num_users: int,
                         a: float = PSP_A, b: float = PSP_B,
                         c: float | None = None) -> np.ndarray:
    """Per-item inverse propensity weights ``1/p_i = 1 + C (f_i + B)^-A``."""
    freqs = np.asarray(train_item_frequencies, dtype=np.float64)
    if num_users < 1:
        raise ValueError("num_users must be positive")
    if c is None:
        c = (np.log(num_users) - 1.0) * (b + 1.0) ** a
    return 1.0 + c * (freqs + b) ** (-a)


def psp_at_k(rankings: TopKRanking, test_sets, train_item_frequencies, k: int, *,
             num_users: int, a: float = PSP_A, b: float = PSP_B,
             c: float | None = None) -> float:
    """Mean propensity-scored precision at depth k, normalized to [0, 1].

    Numerator: inverse-propensity mass of the test items hit in the top
    k. Denominator: the largest mass any k test items could contribute,
    i.e. the ``min(k, |test|)`` heaviest inverse propensities in the
    user's test set.
    """
    if not 1 <= k <= rankings.k:
        raise ValueError(f"k must be in [1, {rankings.k}] for these rankings")
    weights = inverse_propensities(train_item_frequencies, num_users, a=a, b=b, c=c)
    vals = []
    for pos, test in _iter_evaluable(rankings, test_sets):
        topk = rankings.items[pos][:k]
        hit_mass = float(weights[topk[np.isin(topk, test)]].sum())
        best = np.sort(weights[test])[::-1][:min(k, test.size)]
        vals.append(hit_mass / float(best.sum()))
    return _mean(vals)


def evaluate_rankings(rankings: TopKRanking, test_sets, train_item_frequencies,
                      ks, *, num_users: int, hr_mode: str = "truncated",
                      psp_a: float = PSP_A, psp_b: float = PSP_B,
                      psp_c: float | None = None,
                      metadata: dict | None = None) -> EvalReport:
    """Bundle all three metrics for every requested depth into a report."""
    ks = sorted(set(int(k) for k in ks))
    metrics: dict[str, float] = {}
    for k in ks:
        metrics[f"HR@{k}"] = hr_at_k(rankings, test_sets, k, mode=hr_mode)
        metrics[f"NDCG@{k}"] = ndcg_at_k(rankings, test_sets, k)
        metrics[f"PSP@{k}"] = psp_at_k(rankings, test_sets, train_item_frequencies, k,
                                       num_users=num_users, a=psp_a, b=psp_b, c=psp_c)
    evaluable = sum(1 for _ in _iter_evaluable(rankings, test_sets))
    meta = dict(metadata or {})
    meta.setdefault("hr_mode", hr_mode)
    meta.setdefault("reduction", "fixed-order user mean")
    meta["users_ranked"] = int(len(rankings))
    meta["users_evaluated"] = int(evaluable)
    meta["users_skipped"] = int(len(rankings) - evaluable)
    return EvalReport(metrics=metrics, ks=ks, metadata=meta)


def _sample_absent_flat(rng: np.random.Generator, existing_flat: np.ndarray,
                        total: int, count: int) -> np.ndarray:
    """Uniform sample of ``count`` flat indices outside ``existing_flat`` (sorted)."""
    free = total - existing_flat.size
    if count > free:
        raise ValueError(f"cannot add {count} pairs; only {free} absent cells exist")
    if total <= 4_000_000:
        occupied = np.zeros(total, dtype=bool)
        occupied[existing_flat] = True
        absent = np.nonzero(~occupied)[0]
        return rng.choice(absent, size=count, replace=False)
    # Rejection sampling keeps the draw uniform on huge grids; insertion
    # order is preserved so early batches carry no positional bias.
    picked: list[int] = []
    seen: set[int] = set()
    while len(picked) < count:
        need = count - len(picked)
        draw = rng.integers(0, total, size=max(64, int(need * 1.5)))
        if existing_flat.size:
            pos = np.minimum(np.searchsorted(existing_flat, draw),
                             existing_flat.size - 1)
            fresh = draw[existing_flat[pos] != draw]
        else:
            fresh = draw
        for value in fresh.tolist():
            if value not in seen:
                seen.add(value)
                picked.append(value)
                if len(picked) == count:
                    break
    return np.asarray(picked, dtype=np.int64)


def inject_noise(matrix: InteractionMatrix, spec: NoiseSpec) -> InteractionMatrix:
    """Add ``round(ratio * nnz)`` uniformly random absent pairs.

    Deterministic for a fixed seed; the input matrix is untouched and the
    result satisfies all structural invariants.
    """
    count = int(round(spec.ratio * matrix.nnz))
    rows = np.repeat(np.arange(matrix.num_users), np.diff(matrix.row_offsets))
    existing = rows * np.int64(matrix.num_items) + matrix.col_indices  # sorted by construction
    if count == 0:
        return InteractionMatrix(matrix.num_users, matrix.num_items,
                                 matrix.row_offsets, matrix.col_indices)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    total = matrix.num_users * matrix.num_items
    added = _sample_absent_flat(rng, existing, total, count)
    merged = np.sort(np.concatenate([existing, added]))
    return InteractionMatrix.from_pairs(
        matrix.num_users, matrix.num_items,
        merged // matrix.num_items, merged % matrix.num_items)
