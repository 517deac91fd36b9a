from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import tied_datasets
from oracles import ecdf_sum, p_double_sum, w_double_sum
from rankmanova import validate
from rankmanova.exceptions import EmptySample
from rankmanova.ranks import (
    count_kernel,
    ecdf,
    effects,
    exact_effects,
    midranks,
    pairwise_effect,
    pairwise_effects,
    placements,
)


class TestKernelAndEcdf:
    @pytest.mark.parametrize("u, expected", [(3.2, 1.0), (0.0, 0.5), (-1.0, 0.0)])
    def test_kernel(self, u, expected):
        assert count_kernel(u) == expected

    def test_kernel_vectorized(self):
        np.testing.assert_array_equal(count_kernel([-2, 0, 2]), [0.0, 0.5, 1.0])

    @pytest.mark.parametrize("sample, x, expected", [
        ([1, 2, 3], 2, 0.5),
        ([5], 5, 0.5),
        ([1, 2, 3], 10, 1.0),
        ([1, 2, 3], -10, 0.0),
    ])
    def test_ecdf(self, sample, x, expected):
        assert ecdf(sample, x) == expected

    def test_ecdf_is_mean_of_one_sided_versions(self):
        s = [1, 2, 2, 2, 5]
        assert ecdf(s, 2) == 0.5 * (1 / 5 + 4 / 5)

    def test_ecdf_empty(self):
        with pytest.raises(EmptySample):
            ecdf([], 1.0)

    def test_ecdf_matches_kernel_sum(self, rng):
        s = rng.integers(0, 5, 30)
        xs = np.arange(-1, 7, 0.5)
        np.testing.assert_allclose(ecdf(s, xs), [ecdf_sum(s, x) for x in xs], atol=1e-15)


class TestMidranks:
    def test_no_ties(self):
        np.testing.assert_array_equal(midranks([1, 2], [3, 4]), [1, 2, 3, 4])

    def test_tied_pair(self):
        np.testing.assert_array_equal(midranks([1, 1], [2]), [1.5, 1.5, 3])

    def test_full_tie(self):
        np.testing.assert_array_equal(midranks([5, 5], [5]), [2, 2, 2])

    def test_empty(self):
        with pytest.raises(EmptySample):
            midranks([], [1])


class TestPairwiseEffect:
    def test_dominance(self):
        assert pairwise_effect([1, 2], [3, 4]) == 1.0

    def test_identical(self):
        assert pairwise_effect([3, 1, 2], [3, 1, 2]) == 0.5

    def test_ties(self):
        assert pairwise_effect([1, 1], [1, 2]) == 0.75

    def test_empty(self):
        with pytest.raises(EmptySample):
            pairwise_effect([], [1])

    def test_midrank_formula(self, rng):
        x, y = rng.integers(0, 4, 7), rng.integers(0, 4, 5)
        r = midranks(x, y)[7:]
        assert pairwise_effect(x, y) == pytest.approx((r.mean() - 3.0) / 7, abs=1e-14)


class TestEffects:
    def test_hand_example(self):
        p, _ = effects(validate([[1, 2], [3, 4]]))
        np.testing.assert_array_equal(p.p, [0.25, 0.75])

    def test_tied_example(self):
        p, pw = effects(validate([[1, 1], [1, 2]]))
        np.testing.assert_array_equal(p.p, [0.375, 0.625])
        assert pw.w[0, 1, 0] == 0.75 and pw.w[1, 0, 0] == 0.25

    def test_identical_groups(self, rng):
        g = rng.normal(size=(6, 3))
        p, _ = effects(validate([g, g, g]))
        np.testing.assert_array_equal(p.p, 0.5)

    def test_matrix_layout(self, small_dataset):
        p, _ = effects(small_dataset)
        assert p.matrix.shape == (3, 2)
        assert p.matrix[1, 0] == p.p[2]

    def test_exact_fractions(self, small_dataset):
        p, pw = effects(small_dataset)
        exact = exact_effects(pw)
        for i in range(3):
            for j in range(2):
                assert abs(float(exact[i][j]) - p.matrix[i, j]) < 1e-15
        assert sum(exact[i][0] for i in range(3)) == Fraction(3, 2)

    def test_placements(self, small_dataset):
        F = placements(small_dataset)
        pooled = small_dataset.pooled
        for j in range(2):
            for i, g in enumerate(small_dataset.groups):
                for k in range(small_dataset.N):
                    assert F[j, i, k] == ecdf_sum(g[:, j], pooled[k, j])


class TestEffectProperties:
    @settings(max_examples=200, deadline=None)
    @given(tied_datasets())
    def test_double_sum_oracle(self, ds):
        p, pw = effects(ds)
        np.testing.assert_allclose(p.matrix, p_double_sum(ds.groups), atol=1e-12, rtol=0)
        for l in range(ds.a):
            for i in range(ds.a):
                assert abs(pw.w[l, i, 0] - w_double_sum(ds.groups[l][:, 0], ds.groups[i][:, 0])) < 1e-12

    @settings(max_examples=200, deadline=None)
    @given(tied_datasets())
    def test_exact_identities(self, ds):
        p, pw = effects(ds)
        w = pw.w
        assert np.all(w.diagonal(axis1=0, axis2=1) == 0.5)
        assert np.all(w + w.transpose(1, 0, 2) == 1.0)
        exact = exact_effects(pw)
        for j in range(ds.d):
            assert sum(exact[i][j] for i in range(ds.a)) == Fraction(ds.a, 2)
        np.testing.assert_allclose(p.matrix.sum(axis=0), ds.a / 2, atol=1e-12, rtol=0)

    @settings(max_examples=100, deadline=None)
    @given(tied_datasets())
    def test_monotone_invariance(self, ds):
        p, _ = effects(ds)
        q, _ = effects(ds.map_components([lambda x: np.exp(x)] + [lambda x: 3 * x - 7] * (ds.d - 1)))
        np.testing.assert_array_equal(p.p, q.p)

    @settings(max_examples=100, deadline=None)
    @given(tied_datasets())
    def test_range(self, ds):
        p, pw = effects(ds)
        assert np.all((pw.w >= 0) & (pw.w <= 1))
        assert np.all((p.p >= 0) & (p.p <= 1))

    def test_wins_are_exact_numerators(self, small_dataset):
        pw = pairwise_effects(small_dataset)
        for l in range(3):
            for i in range(3):
                frac = pw.exact(l, i, 1)
                ref = Fraction(0)
                for x in small_dataset.groups[i][:, 1]:
                    for y in small_dataset.groups[l][:, 1]:
                        ref += Fraction(1) if x > y else (Fraction(1, 2) if x == y else 0)
                assert frac == ref / (small_dataset.n[l] * small_dataset.n[i])
