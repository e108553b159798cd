from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmlpredict.langsim import (
    LangSimError,
    PairClass,
    TypologicalVector,
    build_split,
    classify_pair,
    classify_pair_distance,
    close_threshold,
    cosine_distance,
    l2_normalize,
    load_typology,
    nearest_language,
    pairwise_distances,
    percentile_linear,
)


def vec(language, values):
    return TypologicalVector.from_raw(language, values)


class TestL2Normalize:
    def test_three_four_five(self):
        assert l2_normalize([3.0, 4.0]) == [0.6, 0.8]

    def test_unit_vector_unchanged(self):
        assert l2_normalize([1.0, 0.0, 0.0]) == [1.0, 0.0, 0.0]

    def test_zero_vector_rejected(self):
        with pytest.raises(LangSimError):
            l2_normalize([0.0, 0.0])

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=10))
    def test_result_has_unit_norm(self, values):
        if sum(v * v for v in values) == 0:
            return  # zero or underflowing norm: domain of the error case
        result = l2_normalize(values)
        assert math.isclose(math.sqrt(sum(x * x for x in result)), 1.0, abs_tol=1e-9)


class TestCosineDistance:
    def test_identical_is_zero(self):
        u = vec("aaa", [1.0, 2.0, 3.0])
        assert cosine_distance(u, u) == 0.0

    def test_orthogonal_is_one(self):
        assert cosine_distance(vec("aaa", [1.0, 0.0]), vec("bbb", [0.0, 1.0])) == 1.0

    def test_antipodal_is_two(self):
        assert cosine_distance(vec("aaa", [1.0, 0.0]), vec("bbb", [-1.0, 0.0])) == 2.0

    def test_empty_intersection_rejected(self):
        u = vec("aaa", [1.0, None])
        v = vec("bbb", [None, 1.0])
        with pytest.raises(LangSimError, match="shared"):
            cosine_distance(u, v)

    def test_zero_over_shared_rejected(self):
        u = vec("aaa", [0.0, 1.0])
        v = vec("bbb", [1.0, None])
        with pytest.raises(LangSimError, match="zero"):
            cosine_distance(u, v)

    def test_missing_features_use_intersection_only(self):
        # shared features are indices 0 and 2
        u = vec("aaa", [1.0, None, 0.0])
        v = vec("bbb", [1.0, 5.0, 0.0])
        assert cosine_distance(u, v) == 0.0

    @given(
        st.lists(st.floats(-10, 10), min_size=2, max_size=8),
        st.lists(st.floats(-10, 10), min_size=2, max_size=8),
    )
    @settings(max_examples=200)
    def test_symmetry_and_range(self, a, b):
        n = min(len(a), len(b))
        a, b = a[:n], b[:n]
        if sum(x * x for x in a) == 0 or sum(x * x for x in b) == 0:
            return
        u, v = vec("aaa", a), vec("bbb", b)
        d_uv = cosine_distance(u, v)
        d_vu = cosine_distance(v, u)
        assert d_uv == d_vu
        assert 0.0 <= d_uv <= 2.0

    def test_scale_invariance(self):
        rng = random.Random(7)
        for _ in range(100):
            values = [rng.uniform(-5, 5) for _ in range(6)]
            if all(v == 0 for v in values):
                continue
            c = rng.uniform(0.01, 50)
            u = vec("aaa", values)
            scaled = vec("aaa", [c * v for v in values])
            w = vec("bbb", [rng.uniform(-5, 5) + 0.1 for _ in range(6)])
            assert abs(cosine_distance(u, w) - cosine_distance(scaled, w)) <= 1e-9


class TestCloseThreshold:
    def test_matches_interpolation_oracle(self):
        distances = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
        got = percentile_linear(distances, 10)
        assert got == float(np.percentile(distances, 10, method="linear"))
        assert 0.1 < got < 0.2

    def test_two_languages_single_distance(self):
        u = vec("aaa", [1.0, 0.0])
        v = vec("bbb", [1.0, 1.0])
        expected = cosine_distance(u, v)
        for percentile in (0, 10, 50, 100):
            assert close_threshold([u, v], percentile) == expected

    def test_fewer_than_two_vectors_rejected(self):
        with pytest.raises(LangSimError):
            close_threshold([vec("aaa", [1.0])])

    def test_random_multisets_match_numpy(self):
        rng = random.Random(11)
        for _ in range(200):
            values = [rng.random() * 2 for _ in range(rng.randint(1, 60))]
            q = rng.choice([5.0, 10.0, 25.0, 90.0])
            assert percentile_linear(values, q) == float(
                np.percentile(values, q, method="linear")
            )


class TestClassifyPair:
    def test_zero_distance_close(self):
        assert classify_pair_distance(0.0, 0.5) is PairClass.CLOSE

    def test_exactly_tau_close(self):
        assert classify_pair_distance(0.5, 0.5) is PairClass.CLOSE

    def test_above_tau_distant(self):
        assert classify_pair_distance(0.5 + 1e-12, 0.5) is PairClass.DISTANT

    def test_vector_form(self):
        u = vec("aaa", [1.0, 0.0])
        v = vec("bbb", [0.0, 1.0])
        assert classify_pair(u, v, 1.0) is PairClass.CLOSE
        assert classify_pair(u, v, 0.5) is PairClass.DISTANT


class TestSplit:
    def test_split_partitions_all_pairs(self, typology):
        split = build_split(list(typology.vectors.values()))
        all_pairs = set(split.distances)
        assert split.pairs_close | split.pairs_distant == all_pairs
        assert not (split.pairs_close & split.pairs_distant)

    def test_split_symmetric_classification(self, split):
        for a, b in split.distances:
            assert split.classify(a, b) == split.classify(b, a)

    def test_threshold_close_fraction(self, typology):
        # with linear interpolation at the 10th percentile, at most
        # ceil(10% + slack) of pairs can be close
        vectors = list(typology.vectors.values())
        split = build_split(vectors, percentile=10.0)
        n_pairs = len(split.distances)
        assert len(split.pairs_close) <= math.ceil(0.10 * n_pairs) + 1

    def test_unknown_pair_rejected(self, split):
        with pytest.raises(LangSimError):
            split.distance("eng", "zzz")
        assert split.classify_or_none("eng", "zzz") is None

    def test_same_language_distance_zero(self, split):
        assert split.distance("eng", "eng") == 0.0


class TestNearestLanguage:
    def test_picks_minimum(self, split):
        got = nearest_language("nld", ["eng", "deu", "fra"], split)
        assert got is not None
        assert got[0] == "eng"

    def test_tie_breaks_lexicographically(self):
        u = vec("aaa", [1.0, 0.0])
        v = vec("bbb", [0.0, 1.0])
        w = vec("ccc", [0.0, 1.0])
        split = build_split([u, v, w], percentile=50)
        got = nearest_language("aaa", ["ccc", "bbb"], split)
        assert got == ("bbb", 1.0)

    def test_no_scored_candidates(self, split):
        assert nearest_language("eng", ["zzz"], split) is None


class TestLoadTypology:
    def test_fixture_masks(self, typology):
        swa = typology.get("swa")
        assert swa is not None
        assert swa.present == (True, True, False, True, True, True)
        assert typology.blocks == {"syntax": 3, "family": 2, "geo": 1}

    def test_block_length_mismatch_rejected(self, tmp_path):
        path = tmp_path / "typ.json"
        path.write_text(
            '{"_blocks": {"syntax": 2}, "aaa": {"features": [1.0, 2.0, 3.0]}}',
            encoding="utf-8",
        )
        with pytest.raises(LangSimError, match="block"):
            load_typology(path)

    def test_all_missing_rejected(self, tmp_path):
        path = tmp_path / "typ.json"
        path.write_text('{"aaa": {"features": [null, null]}}', encoding="utf-8")
        with pytest.raises(LangSimError):
            load_typology(path)


def test_pairwise_skips_incomparable_pairs():
    u = vec("aaa", [1.0, None])
    v = vec("bbb", [None, 1.0])
    w = vec("ccc", [1.0, 1.0])
    dists = pairwise_distances([u, v, w])
    assert ("aaa", "bbb") not in dists
    assert ("aaa", "ccc") in dists and ("bbb", "ccc") in dists
