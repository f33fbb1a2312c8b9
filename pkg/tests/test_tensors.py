import numpy as np
import pytest

from int8mm import (
    DenseMatrix,
    HiddenStateStack,
    Int8Matrix,
    Int32Matrix,
    seeded_random_matrix,
)


class TestDenseMatrix:
    def test_stores_float32_row_major(self):
        m = DenseMatrix([[1, 2, 3], [4, 5, 6]])
        assert m.shape == (2, 3)
        assert m.data.dtype == np.float32
        assert m.data.flags["C_CONTIGUOUS"]

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(ValueError):
            DenseMatrix([[1.0, bad]])

    def test_rejects_wrong_rank_and_empty(self):
        with pytest.raises(ValueError):
            DenseMatrix([1.0, 2.0])
        with pytest.raises(ValueError):
            DenseMatrix(np.zeros((0, 3), dtype=np.float32))

    def test_immutable(self):
        m = DenseMatrix([[1.0]])
        with pytest.raises(ValueError):
            m.data[0, 0] = 2.0

    def test_constructor_copies_input(self):
        src = np.ones((2, 2), dtype=np.float32)
        m = DenseMatrix(src)
        src[0, 0] = 99.0
        assert m.data[0, 0] == 1.0

    def test_f16_simulation_rounds_to_representable(self):
        m = DenseMatrix([[1.0 + 2**-12, 3.3333]])
        half = m.to_f16_precision()
        assert np.array_equal(half.data, m.data.astype(np.float16).astype(np.float32))


class TestIntMatrices:
    def test_int8_accepts_full_code_range(self):
        m = Int8Matrix([[-127, 0, 127]])
        assert m.data.dtype == np.int8

    @pytest.mark.parametrize("value", [-128, 128, 1000])
    def test_int8_rejects_out_of_code_range(self, value):
        with pytest.raises(ValueError):
            Int8Matrix([[value]])

    def test_int8_rejects_floats(self):
        with pytest.raises(ValueError):
            Int8Matrix([[1.5]])

    def test_int32_range(self):
        Int32Matrix([[2**31 - 1, -(2**31)]])
        with pytest.raises(ValueError):
            Int32Matrix([[2**31]])

    def test_equality_is_bitwise(self):
        assert Int8Matrix([[1, 2]]) == Int8Matrix([[1, 2]])
        assert Int8Matrix([[1, 2]]) != Int8Matrix([[1, 3]])


class TestHiddenStateStack:
    def test_shape_bookkeeping(self):
        stack = HiddenStateStack([DenseMatrix(np.zeros((3, 4))) for _ in range(5)])
        assert (stack.layers, stack.seq, stack.hidden) == (5, 3, 4)
        assert stack.as_array().shape == (5, 3, 4)

    def test_rejects_mixed_shapes(self):
        with pytest.raises(ValueError):
            HiddenStateStack([DenseMatrix(np.zeros((3, 4))), DenseMatrix(np.zeros((3, 5)))])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            HiddenStateStack([])


class TestSeededRandomMatrix:
    def test_deterministic(self):
        a = seeded_random_matrix(2, 2, seed=42, stddev=1.0)
        b = seeded_random_matrix(2, 2, seed=42, stddev=1.0)
        assert np.array_equal(a.data, b.data)

    def test_seed_sensitivity(self):
        a = seeded_random_matrix(1, 1, seed=0, stddev=1.0)
        b = seeded_random_matrix(1, 1, seed=1, stddev=1.0)
        assert not np.array_equal(a.data, b.data)

    def test_sample_stddev_in_expected_band(self):
        # frozen from the fixed generator: stddev(seed=7, 3x4, 2.0) ~= 2.338
        m = seeded_random_matrix(3, 4, seed=7, stddev=2.0)
        assert 1.0 <= m.data.std(ddof=1) <= 3.0

    @pytest.mark.parametrize("rows,cols", [(0, 3), (3, 0)])
    def test_zero_dimension_rejected(self, rows, cols):
        with pytest.raises(ValueError):
            seeded_random_matrix(rows, cols, seed=0, stddev=1.0)

    @pytest.mark.parametrize("stddev", [0.0, -1.0, np.inf])
    def test_bad_stddev_rejected(self, stddev):
        with pytest.raises(ValueError):
            seeded_random_matrix(2, 2, seed=0, stddev=stddev)
