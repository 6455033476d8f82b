import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gpexp.core import (
    Alphabet,
    ConditionalDistribution,
    Distribution,
    JointSystem,
    SequenceType,
    auxiliary_alphabet,
    empirical_type,
    enumerate_types,
    joint_empirical_type,
    log_type_class_size,
    type_class_size,
)


class TestDistribution:
    def test_valid(self):
        d = Distribution(np.array([0.25, 0.75]))
        assert d.size == 2
        assert d.probs.sum() == 1.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            Distribution(np.array([-0.1, 1.1]))

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            Distribution(np.array([0.5, 0.4]))

    def test_frozen_array(self):
        d = Distribution(np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            d.probs[0] = 0.3

    def test_copies_input(self):
        raw = np.array([0.5, 0.5])
        d = Distribution(raw)
        raw[0] = 0.0
        assert d.probs[0] == 0.5


class TestConditionalDistribution:
    def test_valid(self):
        c = ConditionalDistribution(np.array([[0.5, 0.5], [1.0, 0.0]]))
        assert c.n_cells == 2
        assert c.n_symbols == 2

    def test_rejects_row_sum(self):
        with pytest.raises(ValueError):
            ConditionalDistribution(np.array([[0.5, 0.6]]))

    def test_rejects_shape(self):
        with pytest.raises(ValueError):
            ConditionalDistribution(np.array([0.5, 0.5]))


class TestSequenceType:
    def test_counts_must_sum(self):
        with pytest.raises(ValueError):
            SequenceType(np.array([2, 1]), 4)

    def test_distribution(self):
        t = SequenceType(np.array([1, 3]), 4)
        assert t.distribution().probs.tolist() == [0.25, 0.75]

    def test_key_is_plain_ints(self):
        t = SequenceType(np.array([1, 3]), 4)
        assert t.key() == (1, 3)
        assert all(type(v) is int for v in t.key())


class TestEmpiricalTypes:
    def test_basic(self):
        t = empirical_type([0, 1, 1, 2], Alphabet(3))
        assert t.key() == (1, 2, 1)
        assert t.n == 4

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            empirical_type([0, 3], Alphabet(3))

    def test_joint_layout_first_sequence_major(self):
        t = joint_empirical_type([0, 1], [1, 0], (Alphabet(2), Alphabet(2)))
        # flat index a * |B| + b
        assert t.key() == (0, 1, 1, 0)

    def test_joint_length_mismatch(self):
        with pytest.raises(ValueError):
            joint_empirical_type([0, 1], [1], (Alphabet(2), Alphabet(2)))

    @given(st.lists(st.integers(0, 3), min_size=1, max_size=30))
    def test_counts_sum_to_length(self, seq):
        t = empirical_type(seq, Alphabet(4))
        assert int(t.counts.sum()) == len(seq)
        assert abs(t.distribution().probs.sum() - 1.0) < 1e-12

    @given(st.lists(st.integers(0, 2), min_size=1, max_size=8))
    def test_type_appears_in_enumeration(self, seq):
        t = empirical_type(seq, Alphabet(3))
        keys = {u.key() for u in enumerate_types(len(seq), Alphabet(3))}
        assert t.key() in keys


class TestEnumeration:
    def test_ascending_lexicographic(self):
        keys = [t.key() for t in enumerate_types(2, Alphabet(2))]
        assert keys == [(0, 2), (1, 1), (2, 0)]

    def test_count_matches_stars_and_bars(self):
        for n in range(1, 9):
            for k in (1, 2, 3):
                got = sum(1 for _ in enumerate_types(n, Alphabet(k)))
                assert got == math.comb(n + k - 1, k - 1)

    def test_sizes_partition_the_sequence_space(self):
        for n in (3, 5, 8):
            for k in (2, 3):
                total = sum(type_class_size(t) for t in enumerate_types(n, Alphabet(k)))
                assert total == k ** n

    def test_matches_grouping_all_binary_sequences(self):
        # group all 256 length-8 binary sequences by composition
        groups = {}
        for seq in itertools.product((0, 1), repeat=8):
            key = (seq.count(0), seq.count(1))
            groups[key] = groups.get(key, 0) + 1
        types = list(enumerate_types(8, Alphabet(2)))
        assert len(types) == 9
        assert {t.key() for t in types} == set(groups)
        for t in types:
            assert type_class_size(t) == groups[t.key()]


class TestTypeClassSize:
    def test_multiset_permutation_count(self):
        t = SequenceType(np.array([3, 2, 1]), 6)
        distinct = {p for p in itertools.permutations("aaabbc")}
        assert type_class_size(t) == len(distinct) == 60

    def test_exact_log(self):
        t = SequenceType(np.array([3, 2, 1]), 6)
        assert log_type_class_size(t) == math.log2(60)

    def test_exact_log_large_n(self):
        t = SequenceType(np.array([40, 35, 25]), 100)
        exact = log_type_class_size(t)
        direct = math.log2(type_class_size(t))
        assert abs(exact - direct) < 1e-9

    def test_asymptotic_is_n_times_entropy(self):
        t = SequenceType(np.array([2, 2]), 4)
        assert log_type_class_size(t, asymptotic=True) == 4.0

    @given(st.lists(st.integers(0, 6), min_size=2, max_size=4).filter(lambda c: sum(c) > 0))
    def test_size_bounds(self, counts):
        n = sum(counts)
        t = SequenceType(np.array(counts), n)
        size = type_class_size(t)
        assert 1 <= size <= len(counts) ** n
        # standard sandwich: 2^{nH} / (n+1)^{k-1} <= |T| <= 2^{nH}
        n_h = log_type_class_size(t, asymptotic=True)
        assert log_type_class_size(t) <= n_h + 1e-9
        assert log_type_class_size(t) >= n_h - (len(counts) - 1) * math.log2(n + 1) - 1e-9


class TestAlphabets:
    def test_auxiliary_size(self):
        assert auxiliary_alphabet(Alphabet(2), Alphabet(2)).size == 5
        assert len(Alphabet(3)) == 3

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            Alphabet(0)


class TestJointSystem:
    def test_joint_sums_to_one(self):
        sys_ = JointSystem(
            p_s=Distribution(np.array([0.5, 0.5])),
            p_ux_given_s=ConditionalDistribution(np.array([
                [0.5, 0.25, 0.25, 0.0],
                [0.25, 0.25, 0.25, 0.25],
            ])),
            p_y_given_xs=ConditionalDistribution(np.array([
                [0.5, 0.5], [0.2, 0.8], [1.0, 0.0], [0.4, 0.6],
            ])),
            n_u=2,
            n_x=2,
        )
        joint = sys_.joint()
        assert joint.shape == (2, 2, 2, 2)
        assert abs(joint.sum() - 1.0) < 1e-12
        assert sys_.n_s == 2 and sys_.n_y == 2
        # marginal over (u, x, y) recovers p_s
        np.testing.assert_allclose(joint.sum(axis=(1, 2, 3)), [0.5, 0.5], atol=1e-15)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            JointSystem(
                p_s=Distribution(np.array([1.0])),
                p_ux_given_s=ConditionalDistribution(np.array([[0.5, 0.5]])),
                p_y_given_xs=ConditionalDistribution(np.array([[1.0, 0.0]])),
                n_u=2,
                n_x=2,
            )
