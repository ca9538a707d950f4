import os

import pytest

from closedrec.data import (
    build_bundle,
    generate_synthetic,
    load_bundle,
    load_interactions,
    random_interaction_matrix,
    write_pairs_file,
)
from closedrec.sparse import same_structure


class TestLoadInteractions:
    def test_basic_parse(self, tmp_path):
        path = tmp_path / "pairs.txt"
        path.write_text("0 0\n0 1\n1 0\n")
        pairs, stats = load_interactions(path)
        assert pairs == [("0", "0"), ("0", "1"), ("1", "0")]
        assert stats.parsed == 3
        assert stats.duplicates == 0
        assert stats.malformed_lines == []

    def test_duplicates_collapse_with_count(self, tmp_path):
        path = tmp_path / "pairs.txt"
        path.write_text("7 9\n7 9\n8 9\n")
        pairs, stats = load_interactions(path)
        assert len(pairs) == 2
        assert stats.duplicates == 1

    def test_malformed_lines_reported_by_number(self, tmp_path):
        path = tmp_path / "pairs.txt"
        path.write_text("1 2\nbroken\n\n3 4\nalso_broken\n")
        pairs, stats = load_interactions(path)
        assert len(pairs) == 2
        assert stats.malformed_lines == [2, 5]

    def test_trailing_fields_ignored(self, tmp_path):
        path = tmp_path / "pairs.txt"
        path.write_text("1 2 5.0 123456789\n3\t4\t1\n")
        pairs, _ = load_interactions(path)
        assert pairs == [("1", "2"), ("3", "4")]

    def test_zero_valid_lines_rejected(self, tmp_path):
        path = tmp_path / "pairs.txt"
        path.write_text("\n\nonly_one_field\n")
        with pytest.raises(ValueError):
            load_interactions(path)

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(OSError):
            load_interactions(tmp_path / "nope.txt")


class TestBuildBundle:
    def test_union_sizing_with_disjoint_ids(self):
        bundle = build_bundle([("a", "x")], [("b", "y")], [("c", "z")])
        assert bundle.num_users == 3 and bundle.num_items == 3
        assert bundle.train.nnz == 1
        # users seen only in val/test have empty training rows
        assert bundle.train.row_items(bundle.user_index["b"]).size == 0

    def test_permutation_invariance(self):
        pairs = [("u2", "i1"), ("u1", "i2"), ("u1", "i1"), ("u3", "i3")]
        a = build_bundle(pairs, [("u9", "i9")], [])
        b = build_bundle(pairs[::-1], [("u9", "i9")], [])
        assert a.user_ids == b.user_ids and a.item_ids == b.item_ids
        assert same_structure(a.train, b.train)
        assert same_structure(a.validation, b.validation)

    def test_id_round_trip_is_identity(self):
        bundle = build_bundle([("42", "7"), ("41", "8")], [], [])
        for uid in bundle.user_ids:
            assert bundle.user_ids[bundle.user_index[uid]] == uid
        for iid in bundle.item_ids:
            assert bundle.item_ids[bundle.item_index[iid]] == iid

    def test_empty_train_rejected(self):
        with pytest.raises(ValueError):
            build_bundle([], [("a", "b")], [])

    def test_load_bundle_round_trip(self, tmp_path):
        bundle = generate_synthetic(num_users=60, num_items=40, latent_rank=3,
                                    density=0.15, seed=1)
        for name, matrix in (("train", bundle.train), ("val", bundle.validation),
                             ("test", bundle.test)):
            write_pairs_file(tmp_path / f"{name}.txt", matrix)
        again = load_bundle(tmp_path / "train.txt", tmp_path / "val.txt",
                            tmp_path / "test.txt")
        assert again.train.nnz == bundle.train.nnz
        assert again.test.nnz == bundle.test.nnz


class TestSynthetic:
    def test_shapes_and_split_disjointness(self):
        bundle = generate_synthetic(num_users=120, num_items=90, latent_rank=4,
                                    density=0.05, seed=2)
        assert bundle.train.shape == (120, 90)
        for user in range(120):
            train = set(bundle.train.row_items(user).tolist())
            val = set(bundle.validation.row_items(user).tolist())
            test = set(bundle.test.row_items(user).tolist())
            assert not train & val and not train & test and not val & test

    def test_determinism(self):
        a = generate_synthetic(num_users=60, num_items=50, seed=5)
        b = generate_synthetic(num_users=60, num_items=50, seed=5)
        assert same_structure(a.train, b.train)
        assert same_structure(a.test, b.test)

    def test_density_roughly_met(self):
        bundle = generate_synthetic(num_users=200, num_items=150, density=0.03, seed=3)
        total = bundle.train.nnz + bundle.validation.nnz + bundle.test.nnz
        assert 0.015 <= total / (200 * 150) <= 0.06

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            generate_synthetic(num_users=10, num_items=10, density=0.0)
        with pytest.raises(ValueError):
            generate_synthetic(num_users=10, num_items=10, val_fraction=0.6,
                               test_fraction=0.6)


class TestRandomInteractionMatrix:
    def test_exact_nnz(self):
        m = random_interaction_matrix(50, 40, 333, seed=0)
        assert m.nnz == 333

    def test_determinism(self):
        a = random_interaction_matrix(30, 30, 100, seed=4)
        b = random_interaction_matrix(30, 30, 100, seed=4)
        assert same_structure(a, b)

    def test_too_many_pairs_rejected(self):
        with pytest.raises(ValueError):
            random_interaction_matrix(3, 3, 10, seed=0)


@pytest.mark.skipif("CLOSEDREC_GOWALLA_TRAIN" not in os.environ,
                    reason="real dataset path not provided")
def test_gowalla_counts_match_published_statistics():
    pairs, _ = load_interactions(os.environ["CLOSEDREC_GOWALLA_TRAIN"])
    users = {u for u, _ in pairs}
    items = {i for _, i in pairs}
    assert len(users) == 29858
    assert len(items) == 40981
