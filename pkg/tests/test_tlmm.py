"""Table-lookup ternary matmul vs the multiply-accumulate oracle."""

from __future__ import annotations

import numpy as np
import pytest

from swapsim.tlmm import (
    ActivationVector,
    PackedWeights,
    TernaryMatrix,
    build_lookup_table,
    dequantize,
    naive_ternary_gemv,
    pack_weights,
    tlmm_gemm,
    tlmm_gemv,
    unpack_weights,
)


def random_ternary(rng: np.random.Generator, rows: int, cols: int) -> TernaryMatrix:
    return TernaryMatrix.from_array(rng.integers(-1, 2, size=(rows, cols)))


def random_activations(rng: np.random.Generator, n: int) -> ActivationVector:
    return ActivationVector(rng.integers(-128, 128, size=n))


class TestPacking:
    def test_hand_packed_row(self):
        w = TernaryMatrix.from_array(np.array([[1, 0, -1, 0, 1]]))
        p = pack_weights(w, group_size=5)
        # digits (2,1,0,1,2) in base 3
        assert p.packed[0, 0] == 194

    def test_all_zero_row(self):
        w = TernaryMatrix.from_array(np.zeros((1, 5), dtype=int))
        assert pack_weights(w, 5).packed[0, 0] == 121  # 1+3+9+27+81

    def test_partial_group_zero_padded(self):
        w = TernaryMatrix.from_array(np.ones((1, 7), dtype=int))
        p = pack_weights(w, 5)
        assert p.packed.shape == (1, 2)
        # second group: digits (2, 2, 1, 1, 1) -> 2 + 6 + 9 + 27 + 81
        assert p.packed[0, 1] == 2 + 6 + 9 + 27 + 81
        assert (unpack_weights(p).values == w.values).all()

    @pytest.mark.parametrize("group_size", [0, 7, -1])
    def test_invalid_group_size(self, group_size):
        w = TernaryMatrix.from_array(np.zeros((2, 4), dtype=int))
        with pytest.raises(ValueError):
            pack_weights(w, group_size)

    @pytest.mark.parametrize("group_size", [1, 2, 3, 4, 5, 6])
    def test_roundtrip(self, group_size):
        rng = np.random.default_rng(group_size)
        for _ in range(20):
            rows = int(rng.integers(1, 40))
            cols = int(rng.integers(1, 70))
            w = random_ternary(rng, rows, cols)
            assert (unpack_weights(pack_weights(w, group_size)).values == w.values).all()

    def test_rejects_non_ternary_values(self):
        with pytest.raises(ValueError):
            TernaryMatrix.from_array(np.array([[0, 2]]))

    def test_rejects_out_of_range_index(self):
        with pytest.raises(ValueError):
            PackedWeights(1, 5, 5, np.array([[243]]))


class TestLookupTable:
    def test_single_activation_selects_first_weight(self):
        lut = build_lookup_table(np.array([1, 0, 0, 0, 0]))
        assert lut.entries[194] == 1  # weights (+1, 0, -1, 0, +1)

    def test_zero_weight_entry_is_zero(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            lut = build_lookup_table(rng.integers(-128, 128, size=5))
            assert lut.entries[lut.zero_index] == 0
            assert lut.zero_index == 121

    def test_all_plus_one_sums_activations(self):
        lut = build_lookup_table(np.array([3, -2, 1, 0, 5]))
        assert lut.entries[242] == 7

    def test_sign_symmetry(self):
        rng = np.random.default_rng(11)
        for g in range(1, 7):
            lut = build_lookup_table(rng.integers(-128, 128, size=g))
            idx = np.arange(3**g)
            assert (lut.entries[idx] == -lut.entries[3**g - 1 - idx]).all()

    def test_wrong_group_length(self):
        with pytest.raises(ValueError):
            build_lookup_table(np.array([1, 2, 3]), group_size=5)


class TestGemv:
    def test_identity_widens(self):
        rng = np.random.default_rng(5)
        w = TernaryMatrix.from_array(np.eye(16, dtype=int))
        x = random_activations(rng, 16)
        out = tlmm_gemv(pack_weights(w), x)
        assert out.dtype == np.int64
        assert (out == x.values.astype(np.int64)).all()

    def test_all_zero_weights(self):
        w = TernaryMatrix.from_array(np.zeros((8, 20), dtype=int))
        x = random_activations(np.random.default_rng(6), 20)
        assert (tlmm_gemv(pack_weights(w), x) == 0).all()

    def test_matches_oracle_64x160(self):
        rng = np.random.default_rng(7)
        w = random_ternary(rng, 64, 160)
        x = random_activations(rng, 160)
        assert (tlmm_gemv(pack_weights(w), x) == naive_ternary_gemv(w, x)).all()

    @pytest.mark.parametrize("group_size", [1, 3, 5, 6])
    def test_matches_oracle_random_dims(self, group_size):
        rng = np.random.default_rng(group_size + 100)
        for _ in range(10):
            rows = int(rng.integers(1, 130))
            cols = int(rng.integers(1, 300))
            w = random_ternary(rng, rows, cols)
            x = random_activations(rng, cols)
            got = tlmm_gemv(pack_weights(w, group_size), x)
            assert (got == naive_ternary_gemv(w, x)).all()

    def test_dimension_mismatch(self):
        w = pack_weights(TernaryMatrix.from_array(np.zeros((4, 10), dtype=int)))
        with pytest.raises(ValueError):
            tlmm_gemv(w, ActivationVector(np.zeros(11)))
        with pytest.raises(ValueError):
            naive_ternary_gemv(TernaryMatrix.from_array(np.zeros((4, 10), dtype=int)), ActivationVector(np.zeros(11)))

    def test_linearity_small_magnitudes(self):
        rng = np.random.default_rng(9)
        w = random_ternary(rng, 32, 80)
        p = pack_weights(w)
        a = rng.integers(-50, 51, size=80)
        b = rng.integers(-50, 51, size=80)
        combined = tlmm_gemv(p, ActivationVector(a + b))
        separate = tlmm_gemv(p, ActivationVector(a)) + tlmm_gemv(p, ActivationVector(b))
        assert (combined == separate).all()


class TestGemm:
    def test_single_column_is_gemv(self):
        rng = np.random.default_rng(13)
        w = random_ternary(rng, 12, 30)
        p = pack_weights(w)
        x = rng.integers(-128, 128, size=(30, 1))
        assert (tlmm_gemm(p, x)[:, 0] == tlmm_gemv(p, ActivationVector(x[:, 0]))).all()

    def test_batch_columnwise(self):
        rng = np.random.default_rng(14)
        w = random_ternary(rng, 24, 50)
        p = pack_weights(w)
        x = rng.integers(-128, 128, size=(50, 8))
        out = tlmm_gemm(p, x)
        for n in range(8):
            assert (out[:, n] == tlmm_gemv(p, ActivationVector(x[:, n]))).all()

    def test_all_ones_counts_cols(self):
        w = TernaryMatrix.from_array(np.ones((6, 37), dtype=int))
        x = np.ones((37, 3), dtype=int)
        assert (tlmm_gemm(pack_weights(w), x) == 37).all()

    def test_dimension_mismatch(self):
        w = pack_weights(TernaryMatrix.from_array(np.zeros((4, 10), dtype=int)))
        with pytest.raises(ValueError):
            tlmm_gemm(w, np.zeros((11, 2), dtype=int))


def test_activation_range_enforced():
    with pytest.raises(ValueError):
        ActivationVector(np.array([0, 200]))


def test_dequantize_is_separate_scaling():
    acc = np.array([2, -4], dtype=np.int64)
    out = dequantize(acc, 0.5)
    assert out.dtype == np.float64
    assert (out == np.array([1.0, -2.0])).all()
