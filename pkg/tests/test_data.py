import numpy as np
import pytest

from rankmanova.data import Dataset, FactorialLayout, flat_index, validate
from rankmanova.exceptions import (
    EmptyGroup,
    InputError,
    MismatchedDimension,
    NonFiniteValue,
    OutOfRange,
)


class TestValidate:
    def test_basic_construction(self):
        ds = validate([[[1], [2]], [[3], [4]]])
        assert (ds.a, ds.d, ds.n, ds.N) == (2, 1, (2, 2), 4)

    def test_one_dimensional_groups_read_as_d1(self):
        ds = validate([[1, 2, 3], [4, 5]])
        assert ds.d == 1 and ds.n == (3, 2)

    def test_mixed_dimensions(self):
        with pytest.raises(MismatchedDimension):
            validate([[[1, 2]], [[1, 2, 3]]])

    def test_nan_rejected(self):
        with pytest.raises(NonFiniteValue):
            validate([[[1.0], [np.nan]], [[2.0]]])

    def test_infinite_rejected(self):
        with pytest.raises(NonFiniteValue):
            validate([[np.inf], [1.0]])

    def test_empty_group(self):
        with pytest.raises(EmptyGroup):
            validate([[[1.0]], []])

    def test_no_groups(self):
        with pytest.raises(InputError):
            validate([])

    def test_idempotent(self, small_dataset):
        assert validate(small_dataset) == small_dataset

    def test_arrays_are_read_only(self, small_dataset):
        with pytest.raises(ValueError):
            small_dataset.groups[0][0, 0] = 99.0

    def test_input_is_copied(self):
        raw = np.zeros((3, 2))
        ds = validate([raw, raw + 1])
        raw[0, 0] = 5.0
        assert ds.groups[0][0, 0] == 0.0

    def test_label_lengths_checked(self):
        with pytest.raises(MismatchedDimension):
            validate([[[1, 2]], [[3, 4]]], labels=["x"])
        with pytest.raises(MismatchedDimension):
            validate([[[1, 2]], [[3, 4]]], group_names=["g"])

    def test_pooled_and_offsets(self, small_dataset):
        assert small_dataset.pooled.shape == (9, 2)
        assert list(small_dataset.offsets) == [0, 3, 5, 9]
        np.testing.assert_array_equal(small_dataset.pooled[3:5], small_dataset.groups[1])

    def test_map_components(self, small_dataset):
        out = small_dataset.map_components([np.exp, lambda x: -x])
        np.testing.assert_allclose(out.groups[2][:, 1], -small_dataset.groups[2][:, 1])


class TestFlatIndex:
    @pytest.mark.parametrize("i, j, expected", [(1, 1, 0), (2, 1, 4), (2, 4, 7)])
    def test_examples(self, i, j, expected):
        assert flat_index(i, j, 2, 4) == expected

    @pytest.mark.parametrize("i, j", [(0, 1), (3, 1), (1, 0), (1, 5)])
    def test_out_of_range(self, i, j):
        with pytest.raises(OutOfRange):
            flat_index(i, j, 2, 4)

    def test_bijection(self):
        seen = {flat_index(i, j, 3, 5) for i in range(1, 4) for j in range(1, 6)}
        assert seen == set(range(15))


class TestFactorialLayout:
    def test_last_factor_fastest(self):
        lay = FactorialLayout(("A", "B"), (2, 3))
        assert lay.cells()[:4] == [(0, 0), (0, 1), (0, 2), (1, 0)]
        assert lay.cell(4) == (1, 1)

    def test_roundtrip(self):
        lay = FactorialLayout(("A", "B", "C"), (2, 3, 2))
        assert lay.n_cells == 12
        for i in range(lay.n_cells):
            assert lay.index(lay.cell(i)) == i

    def test_cell_names(self):
        lay = FactorialLayout(("sex", "lang"), (2, 2), (("f", "m"), ("en", "es")))
        assert lay.cell_name(1) == "f:es"
        assert FactorialLayout.one_way(3).cell_name(2) == "group3"

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            FactorialLayout.one_way(2).cell(2)

    def test_bad_labels(self):
        with pytest.raises(InputError):
            FactorialLayout(("A",), (2,), (("x",),))
