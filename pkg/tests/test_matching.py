import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from surveyfuse import (
    DataError,
    DictionaryMismatchError,
    DimensionError,
    FeatureDictionary,
    MatchError,
    augment_candidate,
    build_buckets,
    hamming,
    impute,
    nearest_neighbor,
    nearest_rows,
)
from surveyfuse.matching import PopcountPruningIndex, household_sums, pack_rows
from conftest import make_dataset, random_one_hot
from oracles import bucket_oracle, household_sum_oracle, nn_scan_oracle

bitvec = lambda d: arrays(np.uint8, (d,), elements=st.integers(0, 1))


class TestHamming:
    def test_half_differing(self):
        assert hamming(np.array([0, 1, 1, 0]), np.array([0, 1, 0, 1])) == 0.5

    def test_identity(self):
        v = np.array([1, 0, 1])
        assert hamming(v, v) == 0.0

    def test_complement(self):
        assert hamming(np.ones(4, np.uint8), np.zeros(4, np.uint8)) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            hamming(np.array([1, 0]), np.array([1, 0, 1]))

    def test_empty_vectors(self):
        with pytest.raises(DimensionError):
            hamming(np.array([]), np.array([]))

    @given(bitvec(26), bitvec(26))
    def test_symmetry(self, a, b):
        assert hamming(a, b) == hamming(b, a)

    @given(bitvec(16), bitvec(16))
    def test_identity_of_indiscernibles(self, a, b):
        assert (hamming(a, b) == 0.0) == bool(np.array_equal(a, b))

    @given(bitvec(26), bitvec(26), bitvec(26))
    def test_triangle_inequality(self, a, b, c):
        assert hamming(a, c) <= hamming(a, b) + hamming(b, c) + 1e-12

    @given(st.sampled_from([8, 26, 64]), st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_matches_packed_popcount(self, d, seed):
        rng = np.random.default_rng(seed)
        a = rng.integers(0, 2, d, dtype=np.uint8)
        b = rng.integers(0, 2, d, dtype=np.uint8)
        pa, pb = pack_rows(a[None, :]), pack_rows(b[None, :])
        packed_count = int(np.bitwise_count(pa ^ pb).sum())
        assert hamming(a, b) == packed_count / d


class TestBuildBuckets:
    def test_grouping_and_means(self, single_dictionary):
        ds = make_dataset(single_dictionary, [[0, 1], [0, 1], [1, 0]], [0, 2, 1])
        b = build_buckets(ds)
        assert len(b) == 2
        assert b.x.tolist() == [[0, 1], [1, 0]]  # first-occurrence order
        assert b.member_count.tolist() == [2, 1]
        assert b.y_mean.tolist() == [1.0, 1.0]

    def test_all_distinct(self, single_dictionary):
        ds = make_dataset(single_dictionary, [[1, 0], [0, 1], [0, 0]], [1, 2, 3])
        assert len(build_buckets(ds)) == 3

    def test_all_identical(self, single_dictionary):
        ds = make_dataset(single_dictionary, [[1, 0]] * 4, [0, 1, 2, 3])
        b = build_buckets(ds)
        assert len(b) == 1
        assert b.y_mean[0] == 1.5

    def test_missing_target_rejected(self, single_dictionary):
        ds = make_dataset(single_dictionary, [[1, 0]], [np.nan])
        with pytest.raises(DataError, match="labeled"):
            build_buckets(ds)

    @pytest.mark.parametrize("seed", range(5))
    def test_invariants_on_random_datasets(self, seed, pair_dictionary):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 300))
        x = random_one_hot(rng, pair_dictionary, n, missing_rate=0.2)
        y = rng.uniform(0, 5, n)
        ds = make_dataset(pair_dictionary, x, y)
        b = build_buckets(ds)
        ox, ocounts, omeans = bucket_oracle(x, y)
        assert b.member_count.sum() == n
        assert np.array_equal(b.x, ox)
        assert b.member_count.tolist() == ocounts.tolist()
        np.testing.assert_allclose(b.y_mean, omeans, atol=1e-12)
        # inverse maps every sample back to a bucket with its own vector
        assert np.array_equal(b.x[b.inverse], x)


class TestNearestRows:
    def test_exact_match(self):
        idx, = nearest_rows(
            np.array([[0, 1, 1, 0]], np.uint8),
            np.array([[0, 1, 1, 0], [1, 0, 0, 1]], np.uint8),
        ).target_index
        assert idx == 0

    def test_tie_breaks_to_smaller_index(self):
        # 0111 is at distance 1/4 from both 0110 and 0101
        a = nearest_rows(
            np.array([[0, 1, 1, 1]], np.uint8),
            np.array([[0, 1, 1, 0], [0, 1, 0, 1]], np.uint8),
        )
        assert a.target_index[0] == 0
        assert a.distance[0] == 0.25

    def test_empty_targets(self):
        with pytest.raises(MatchError):
            nearest_rows(np.zeros((1, 4), np.uint8), np.zeros((0, 4), np.uint8))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            nearest_rows(np.zeros((1, 4), np.uint8), np.zeros((1, 5), np.uint8))

    @pytest.mark.parametrize("seed", range(8))
    def test_oracle_equivalence_random(self, seed):
        rng = np.random.default_rng(seed)
        src = rng.integers(0, 2, size=(50, 26), dtype=np.uint8)
        tgt = rng.integers(0, 2, size=(20, 26), dtype=np.uint8)
        a = nearest_rows(src, tgt)
        oidx, odist = nn_scan_oracle(src, tgt)
        assert np.array_equal(a.target_index, oidx)
        np.testing.assert_allclose(a.distance, odist)

    @pytest.mark.parametrize("d", [8, 26, 64, 100])
    def test_oracle_equivalence_dimensions(self, d):
        rng = np.random.default_rng(d)
        src = rng.integers(0, 2, size=(40, d), dtype=np.uint8)
        tgt = rng.integers(0, 2, size=(15, d), dtype=np.uint8)
        a = nearest_rows(src, tgt)
        oidx, odist = nn_scan_oracle(src, tgt)
        assert np.array_equal(a.target_index, oidx)
        np.testing.assert_allclose(a.distance, odist)

    @pytest.mark.parametrize("seed", range(4))
    def test_pruned_identical_to_scan(self, seed):
        rng = np.random.default_rng(100 + seed)
        src = rng.integers(0, 2, size=(60, 26), dtype=np.uint8)
        tgt = rng.integers(0, 2, size=(30, 26), dtype=np.uint8)
        scan = nearest_rows(src, tgt, method="scan")
        pruned = nearest_rows(src, tgt, method="pruned")
        assert np.array_equal(scan.target_index, pruned.target_index)
        assert np.array_equal(scan.distance, pruned.distance)

    def test_pruning_index_assign_row(self):
        rng = np.random.default_rng(7)
        tgt = rng.integers(0, 2, size=(25, 26), dtype=np.uint8)
        index = PopcountPruningIndex(pack_rows(tgt))
        src = rng.integers(0, 2, size=(10, 26), dtype=np.uint8)
        packed = pack_rows(src)
        oidx, odist = nn_scan_oracle(src, tgt)
        for i in range(10):
            idx, cnt = index.assign_row(packed[i])
            assert idx == oidx[i]
            assert cnt / 26 == odist[i]

    def test_threads_do_not_change_results(self):
        rng = np.random.default_rng(11)
        src = rng.integers(0, 2, size=(5000, 26), dtype=np.uint8)
        tgt = rng.integers(0, 2, size=(64, 26), dtype=np.uint8)
        a1 = nearest_rows(src, tgt, threads=1)
        a8 = nearest_rows(src, tgt, threads=8)
        assert np.array_equal(a1.target_index, a8.target_index)
        assert np.array_equal(a1.distance, a8.distance)

    def test_random_tie_break_reproducible_and_valid(self):
        rng = np.random.default_rng(5)
        src = rng.integers(0, 2, size=(40, 8), dtype=np.uint8)
        tgt = rng.integers(0, 2, size=(10, 8), dtype=np.uint8)
        a = nearest_rows(src, tgt, tie_break="random", seed=42)
        b = nearest_rows(src, tgt, tie_break="random", seed=42)
        assert np.array_equal(a.target_index, b.target_index)
        # still optimal: same distances as the index rule
        base = nearest_rows(src, tgt)
        np.testing.assert_allclose(a.distance, base.distance)
        # d=8 with 10 targets has plenty of ties; some seed disagreement expected
        c = nearest_rows(src, tgt, tie_break="random", seed=43)
        assert not np.array_equal(a.target_index, c.target_index)

    def test_random_tie_break_requires_seed(self):
        with pytest.raises(ValueError, match="seed"):
            nearest_rows(np.zeros((1, 4), np.uint8), np.ones((1, 4), np.uint8),
                         tie_break="random")

    def test_duplicate_queries_share_assignment(self):
        src = np.array([[0, 1, 1, 0]] * 3 + [[1, 1, 1, 1]], np.uint8)
        tgt = np.array([[0, 1, 1, 0], [1, 1, 1, 1]], np.uint8)
        a = nearest_rows(src, tgt)
        assert a.target_index.tolist() == [0, 0, 0, 1]


class TestNearestNeighborBuckets:
    def test_assignment_invariants(self, pair_dictionary):
        rng = np.random.default_rng(2)
        cand = make_dataset(
            pair_dictionary,
            random_one_hot(rng, pair_dictionary, 30),
            rng.uniform(0, 3, 30),
        )
        src = make_dataset(
            pair_dictionary,
            random_one_hot(rng, pair_dictionary, 100),
            np.full(100, np.nan),
        )
        buckets = build_buckets(cand)
        a = nearest_neighbor(src, buckets)
        assert a.n == 100  # total assignment
        for i in range(100):
            got = hamming(src.x[i], buckets.x[a.target_index[i]])
            assert got == a.distance[i]
            best = min(hamming(src.x[i], bx) for bx in buckets.x)
            assert a.distance[i] == best


def hand_instance(single_dictionary):
    """5 donors in 3 buckets; 10 query samples; w = 2."""
    a, b, z, t = [1, 0], [0, 1], [0, 0], [1, 1]
    candidate = make_dataset(
        single_dictionary,
        [a, a, b, z, b],
        [2, 4, 3, 5, 1],
        household_ids=[f"c{i}" for i in range(5)],
    )
    # buckets (first occurrence): B0=a (mean 3), B1=b (mean 2), B2=z (mean 5)
    source = make_dataset(
        single_dictionary,
        [a, a, a, b, b, b, z, z, t, t],
        [7] + [np.nan] * 9,
        household_ids=["h0", "h0", "h1", "h1", "h2", "h2", "h3", "h3", "h4", "h4"],
    )
    return source, candidate


class TestImpute:
    def test_hand_computed_values_impute_all(self, single_dictionary):
        source, candidate = hand_instance(single_dictionary)
        res = impute(source, candidate, impute_all=True)
        assert res.weight == 2.0
        # bucket means / w, tie on [1,1] resolved to B0
        expected = [1.5, 1.5, 1.5, 1.0, 1.0, 1.0, 2.5, 2.5, 1.5, 1.5]
        np.testing.assert_allclose(res.sample_y, expected)
        assert res.household_totals() == pytest.approx(
            {"h0": 3.0, "h1": 2.5, "h2": 2.0, "h3": 5.0, "h4": 3.0}
        )

    def test_default_keeps_observed(self, single_dictionary):
        source, candidate = hand_instance(single_dictionary)
        res = impute(source, candidate)
        assert res.sample_y[0] == 7.0  # observed value kept, not divided by w
        assert res.imputed_mask.tolist() == [False] + [True] * 9
        assert res.household_totals()["h0"] == pytest.approx(7.0 + 1.5)

    def test_household_sums_match_oracle(self, single_dictionary):
        source, candidate = hand_instance(single_dictionary)
        res = impute(source, candidate, impute_all=True)
        oracle = household_sum_oracle(source.household_ids, res.sample_y)
        assert res.household_totals() == pytest.approx(oracle)

    def test_self_imputation_identity(self, single_dictionary):
        # all samples sharing an x share y -> household totals reproduced exactly
        ds = make_dataset(
            single_dictionary,
            [[1, 0], [1, 0], [0, 1], [0, 0]],
            [2, 2, 3, 1],
            household_ids=["h0", "h1", "h0", "h2"],
        )
        res = impute(ds, ds, impute_all=True)
        assert res.weight == 1.0
        assert res.household_totals() == pytest.approx(ds.household_totals(), abs=1e-9)

    def test_weight_is_sample_ratio(self, single_dictionary):
        source, candidate = hand_instance(single_dictionary)
        assert impute(source, candidate).weight == source.n_samples / candidate.n_samples

    def test_imputed_values_nonnegative(self, single_dictionary):
        rng = np.random.default_rng(4)
        cand = make_dataset(
            single_dictionary,
            random_one_hot(rng, single_dictionary, 40),
            rng.uniform(0, 6, 40),
        )
        src = make_dataset(
            single_dictionary,
            random_one_hot(rng, single_dictionary, 200),
            np.full(200, np.nan),
        )
        res = impute(src, cand, impute_all=True)
        assert (res.sample_y >= 0).all()

    def test_dictionary_mismatch(self, single_dictionary, pair_dictionary):
        src = make_dataset(single_dictionary, [[1, 0]], [np.nan])
        cand = make_dataset(pair_dictionary, [[1, 0, 0, 1]], [1.0])
        with pytest.raises(DictionaryMismatchError):
            impute(src, cand)

    def test_unlabeled_candidate_rejected(self, single_dictionary):
        src = make_dataset(single_dictionary, [[1, 0]], [np.nan])
        cand = make_dataset(single_dictionary, [[1, 0]], [np.nan])
        with pytest.raises(DataError):
            impute(src, cand)

    def test_all_zero_rows_match_normally(self, single_dictionary):
        src = make_dataset(single_dictionary, [[0, 0]], [np.nan])
        cand = make_dataset(single_dictionary, [[0, 1], [0, 0]], [4.0, 8.0])
        res = impute(src, cand, impute_all=True)
        assert res.assignment.target_index[0] == 1  # exact all-zero bucket
        assert res.assignment.distance[0] == 0.0

    def test_household_weight_variant(self, single_dictionary):
        source, candidate = hand_instance(single_dictionary)
        res = impute(source, candidate, impute_all=True, household_weight=True)
        # every household has 2 samples: each sample gets bucket mean / 2,
        # so the household total is the mean of its matched bucket means
        assert res.household_totals()["h0"] == pytest.approx(3.0)
        assert res.household_totals()["h3"] == pytest.approx(5.0)

    def test_augment_candidate_builds_union(self, single_dictionary):
        source, candidate = hand_instance(single_dictionary)
        union = augment_candidate(source, candidate)
        assert union.n_samples == candidate.n_samples + 1  # one labeled source sample
        assert union.n_missing == 0

    def test_augment_without_labeled_is_identity(self, single_dictionary):
        src = make_dataset(single_dictionary, [[1, 0]], [np.nan])
        cand = make_dataset(single_dictionary, [[0, 1]], [1.0])
        assert augment_candidate(src, cand) is cand

    def test_determinism_across_threads(self, pair_dictionary):
        rng = np.random.default_rng(9)
        cand = make_dataset(
            pair_dictionary,
            random_one_hot(rng, pair_dictionary, 50),
            rng.uniform(0, 3, 50),
        )
        src = make_dataset(
            pair_dictionary,
            random_one_hot(rng, pair_dictionary, 6000),
            np.full(6000, np.nan),
        )
        r1 = impute(src, cand, threads=1)
        r8 = impute(src, cand, threads=8)
        assert np.array_equal(r1.sample_y, r8.sample_y)
        assert np.array_equal(r1.assignment.target_index, r8.assignment.target_index)


class TestHouseholdSums:
    @given(st.lists(st.tuples(st.integers(0, 5), st.floats(0, 10)), min_size=1, max_size=50))
    def test_matches_oracle(self, pairs):
        ids = np.array([f"h{p[0]}" for p in pairs])
        y = np.array([p[1] for p in pairs])
        got_ids, got_totals = household_sums(ids, y)
        oracle = household_sum_oracle(ids, y)
        assert {str(i): t for i, t in zip(got_ids, got_totals)} == pytest.approx(oracle)
