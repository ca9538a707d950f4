import itertools
import math

import numpy as np
import pytest

from closedrec.evaluation import (
    NoiseSpec,
    TopKRanking,
    evaluate_rankings,
    hr_at_k,
    inject_noise,
    inverse_propensities,
    ndcg_at_k,
    psp_at_k,
    rank_top_k,
)
from closedrec.sparse import InteractionMatrix, same_structure
from helpers import random_binary_matrix


def ranking_of(items_per_user, k, num_items=None):
    """Build a TopKRanking directly from explicit item lists."""
    items = [np.asarray(lst, dtype=np.int64) for lst in items_per_user]
    scores = [np.linspace(1.0, 0.5, len(lst)) for lst in items]
    return TopKRanking(np.arange(len(items), dtype=np.int64), items, scores, k,
                       np.zeros(len(items), dtype=bool))


def brute_force_rank(scores, mask, k):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return [i for i in order if i not in mask][:k]


class TestRankTopK:
    def test_masks_then_sorts(self):
        ranking = rank_top_k(np.array([[0.9, 0.1, 0.5]]), [np.array([0])], 2)
        assert ranking.items[0].tolist() == [2, 1]

    def test_all_equal_scores_tie_rule(self):
        ranking = rank_top_k(np.zeros((1, 5)), [np.array([], dtype=int)], 3)
        assert ranking.items[0].tolist() == [0, 1, 2]

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_exhaustive_sort_oracle(self, seed):
        rng = np.random.default_rng(seed)
        scores = rng.integers(0, 6, size=(50, 12)).astype(float)  # forces ties
        masks = [rng.choice(12, size=rng.integers(0, 5), replace=False)
                 for _ in range(50)]
        ranking = rank_top_k(scores, masks, 4)
        for r in range(50):
            assert ranking.items[r].tolist() == brute_force_rank(
                scores[r], set(masks[r].tolist()), 4)

    def test_never_returns_training_items(self):
        rng = np.random.default_rng(9)
        scores = rng.standard_normal((20, 10))
        masks = [rng.choice(10, size=4, replace=False) for _ in range(20)]
        ranking = rank_top_k(scores, masks, 6)
        for r in range(20):
            assert not set(ranking.items[r].tolist()) & set(masks[r].tolist())

    def test_short_user_flagged_not_failed(self):
        scores = np.array([[0.3, 0.2, 0.1]])
        ranking = rank_top_k(scores, [np.array([0, 1])], 3)
        assert ranking.short_users[0]
        assert ranking.items[0].tolist() == [2]

    def test_rejects_bad_k(self):
        with pytest.raises(ValueError):
            rank_top_k(np.zeros((1, 3)), [np.array([], dtype=int)], 0)


class TestHitRatio:
    def test_single_test_item_hit(self):
        ranking = ranking_of([[5, 2, 7]], k=3)
        assert hr_at_k(ranking, [np.array([2])], 3) == 1.0

    def test_truncated_denominator(self):
        ranking = ranking_of([[1, 9]], k=2)
        assert hr_at_k(ranking, [np.array([1, 2, 3, 4])], 2) == 0.5

    def test_no_overlap(self):
        ranking = ranking_of([[5, 6, 7]], k=3)
        assert hr_at_k(ranking, [np.array([1])], 3) == 0.0

    def test_recall_mode_divides_by_test_size(self):
        ranking = ranking_of([[1, 9]], k=2)
        assert hr_at_k(ranking, [np.array([1, 2, 3, 4])], 2, mode="recall") == 0.25

    def test_empty_test_users_skipped(self):
        ranking = ranking_of([[1], [2]], k=1)
        tests = [np.array([], dtype=int), np.array([2])]
        assert hr_at_k(ranking, tests, 1) == 1.0


class TestNdcg:
    def test_hit_at_second_position(self):
        ranking = ranking_of([[5, 2, 7]], k=3)
        expected = 1.0 / math.log2(3)
        assert abs(ndcg_at_k(ranking, [np.array([2])], 3) - expected) < 1e-12

    def test_ideal_ranking_is_one(self):
        ranking = ranking_of([[4, 9, 1]], k=3)
        assert ndcg_at_k(ranking, [np.array([4])], 3) == 1.0

    def test_no_hits_is_zero(self):
        ranking = ranking_of([[4, 9, 1]], k=3)
        assert ndcg_at_k(ranking, [np.array([7])], 3) == 0.0

    def test_one_iff_prefix_all_hits(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            items = rng.permutation(10)[:5]
            test = rng.choice(10, size=rng.integers(1, 5), replace=False)
            ranking = ranking_of([items], k=5)
            value = ndcg_at_k(ranking, [test], 5)
            prefix = min(5, test.size)
            prefix_all_hits = bool(np.isin(items[:prefix], test).all())
            assert (abs(value - 1.0) < 1e-12) == prefix_all_hits


class TestPsp:
    def test_uniform_frequencies_single_hit(self):
        ranking = ranking_of([[3, 0, 4]], k=3)
        freqs = np.full(6, 7.0)
        assert abs(psp_at_k(ranking, [np.array([4])], freqs, 3, num_users=20) - 1.0) < 1e-12

    def test_no_hits_is_zero(self):
        ranking = ranking_of([[3, 0, 4]], k=3)
        freqs = np.full(6, 7.0)
        assert psp_at_k(ranking, [np.array([5])], freqs, 3, num_users=20) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_subset_enumeration_oracle(self, seed):
        rng = np.random.default_rng(seed)
        num_items, k = 9, 3
        freqs = rng.integers(1, 40, size=num_items).astype(float)
        weights = inverse_propensities(freqs, num_users=25)
        items = rng.permutation(num_items)[:k]
        test = rng.choice(num_items, size=rng.integers(1, 6), replace=False)
        ranking = ranking_of([items], k=k)
        got = psp_at_k(ranking, [test], freqs, k, num_users=25)
        hit_mass = weights[[i for i in items if i in set(test.tolist())]].sum()
        size = min(k, test.size)
        best = max(weights[list(combo)].sum()
                   for combo in itertools.combinations(test.tolist(), size))
        assert abs(got - hit_mass / best) < 1e-10

    def test_values_bounded_by_one(self):
        rng = np.random.default_rng(11)
        freqs = rng.integers(1, 50, size=15).astype(float)
        for _ in range(50):
            items = rng.permutation(15)[:4]
            test = rng.choice(15, size=rng.integers(1, 7), replace=False)
            value = psp_at_k(ranking_of([items], k=4), [test], freqs, 4, num_users=30)
            assert 0.0 <= value <= 1.0 + 1e-12


class TestMonotoneInvariance:
    def test_metrics_depend_only_on_ordering(self):
        rng = np.random.default_rng(5)
        scores = rng.standard_normal((25, 14))
        masks = [rng.choice(14, size=3, replace=False) for _ in range(25)]
        tests = [rng.choice(14, size=rng.integers(0, 4), replace=False)
                 for _ in range(25)]
        freqs = rng.integers(1, 30, size=14).astype(float)
        before = rank_top_k(scores, masks, 5)
        after = rank_top_k(2.0 * scores + 7.0, masks, 5)
        for k in (1, 3, 5):
            assert hr_at_k(before, tests, k) == hr_at_k(after, tests, k)
            assert ndcg_at_k(before, tests, k) == ndcg_at_k(after, tests, k)
            assert psp_at_k(before, tests, freqs, k, num_users=25) == \
                psp_at_k(after, tests, freqs, k, num_users=25)


class TestEvaluateRankings:
    def test_report_contains_all_requested_depths(self):
        rng = np.random.default_rng(6)
        scores = rng.standard_normal((10, 8))
        masks = [np.array([], dtype=int)] * 10
        tests = [rng.choice(8, size=2, replace=False) for _ in range(10)]
        ranking = rank_top_k(scores, masks, 5)
        report = evaluate_rankings(ranking, tests, np.ones(8), ks=(1, 5),
                                   num_users=10, metadata={"model": "test"})
        assert set(report.metrics) == {"HR@1", "NDCG@1", "PSP@1",
                                       "HR@5", "NDCG@5", "PSP@5"}
        assert report.metadata["users_evaluated"] == 10
        assert all(0.0 <= v <= 1.0 for v in report.metrics.values())


class TestInjectNoise:
    def test_ratio_zero_is_structural_noop(self):
        m = random_binary_matrix(30, 20, 0.1, seed=0)
        out = inject_noise(m, NoiseSpec(0.0, seed=5))
        assert out is not m
        assert same_structure(m, out)

    def test_exact_count_and_uniqueness(self):
        m = random_binary_matrix(40, 30, 0.1, seed=1)
        expected = round(0.05 * m.nnz)
        out = inject_noise(m, NoiseSpec(0.05, seed=2))
        assert out.nnz == m.nnz + expected
        # new pairs absent from the original
        before = set(zip(*np.nonzero(m.to_dense())))
        after = set(zip(*np.nonzero(out.to_dense())))
        assert before < after
        assert len(after - before) == expected

    def test_seed_determinism(self):
        m = random_binary_matrix(100, 100, 0.05, seed=3)
        a = inject_noise(m, NoiseSpec(0.04, seed=9))
        b = inject_noise(m, NoiseSpec(0.04, seed=9))
        c = inject_noise(m, NoiseSpec(0.04, seed=10))
        assert same_structure(a, b)
        assert not same_structure(a, c)

    def test_preserves_invariants(self):
        m = random_binary_matrix(25, 25, 0.2, seed=4)
        out = inject_noise(m, NoiseSpec(0.05, seed=0))
        # construction re-validates; also check the original is untouched
        assert m.nnz == int(m.row_offsets[-1])
        assert out.num_users == m.num_users

    def test_infeasible_count_rejected(self):
        m = InteractionMatrix.from_dense(np.ones((3, 3)) - np.eye(3))
        with pytest.raises(ValueError):
            inject_noise(m, NoiseSpec(1.0, seed=0))

    def test_negative_ratio_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec(-0.1, seed=0)
