import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monarchbench.tensorops import (
    Blocked4View,
    CONTRACT_PATTERNS,
    ShapeError,
    contract,
    frobenius_mse,
    softmax_rows,
    truncated_svd,
)
from oracles import loop_einsum, loop_mse, np_singular_values


class TestSoftmaxRows:
    def test_symmetric_pair(self):
        out = softmax_rows(np.array([[0.0, 0.0]]))
        assert np.allclose(out, [[0.5, 0.5]], atol=1e-15)

    @given(st.floats(min_value=-50, max_value=50))
    def test_constant_row_is_uniform(self, x):
        out = softmax_rows(np.array([[x, x, x]]))
        assert np.allclose(out, 1.0 / 3.0, atol=1e-15)

    def test_row_sums_direct_summation(self):
        rng = np.random.default_rng(0)
        m = rng.standard_normal((4, 4))
        out = softmax_rows(m)
        for row in out:
            assert abs(sum(float(x) for x in row) - 1.0) <= 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 1000), st.floats(min_value=-30, max_value=30))
    def test_shift_invariance_and_range(self, seed, shift):
        m = np.random.default_rng(seed).standard_normal((3, 5))
        base = softmax_rows(m)
        shifted = softmax_rows(m + shift)
        assert np.allclose(base, shifted, atol=1e-12)
        assert base.min() > 0.0 and base.max() <= 1.0


class TestTruncatedSvd:
    def test_identity_top_singular_value(self):
        res = truncated_svd(np.eye(2), 1)
        assert res.singular_values[0] == pytest.approx(1.0, abs=1e-12)

    def test_rank1_input_zero_residual(self):
        rng = np.random.default_rng(1)
        m = np.outer(rng.standard_normal(6), rng.standard_normal(4))
        res = truncated_svd(m, 1)
        assert np.abs(m - res.reconstruct()).max() < 1e-12

    def test_rank2_residual_matches_full_oracle(self):
        m = np.random.default_rng(2).standard_normal((5, 3))
        res = truncated_svd(m, 2)
        sv = np_singular_values(m)
        assert np.linalg.norm(m - res.reconstruct()) == pytest.approx(sv[2], rel=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 500), st.integers(2, 16), st.integers(2, 16))
    def test_discarded_sigma_identity(self, seed, rows, cols):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((rows, cols))
        rank = int(rng.integers(1, min(rows, cols) + 1))
        res = truncated_svd(m, rank)
        assert (np.diff(res.singular_values) <= 1e-9).all()
        sv = np_singular_values(m)
        expected = float(np.sum(sv[rank:] ** 2))
        got = float(np.linalg.norm(m - res.reconstruct()) ** 2)
        assert got == pytest.approx(expected, rel=1e-7, abs=1e-18)

    def test_full_rank_reconstruction(self):
        m = np.random.default_rng(3).standard_normal((6, 6))
        res = truncated_svd(m, 6)
        rel = np.linalg.norm(m - res.reconstruct()) / np.linalg.norm(m)
        assert rel < 1e-9

    def test_orthonormal_vectors(self):
        m = np.random.default_rng(4).standard_normal((7, 5))
        res = truncated_svd(m, 3)
        assert np.abs(res.u.T @ res.u - np.eye(3)).max() < 1e-10
        assert np.abs(res.v.T @ res.v - np.eye(3)).max() < 1e-10

    def test_sign_convention(self):
        m = np.random.default_rng(5).standard_normal((4, 4))
        res = truncated_svd(m, 2)
        for t in range(2):
            first = res.v[np.flatnonzero(res.v[:, t])[0], t]
            assert first >= 0

    def test_rank_bounds(self):
        with pytest.raises(IndexError):
            truncated_svd(np.eye(3), 4)
        with pytest.raises(IndexError):
            truncated_svd(np.eye(3), 0)


class TestFrobeniusMse:
    def test_equal_is_zero(self):
        m = np.random.default_rng(0).standard_normal((3, 3))
        assert frobenius_mse(m, m) == 0.0

    def test_forced_arithmetic(self):
        assert frobenius_mse(np.array([[1.0, 0.0]]), np.array([[0.0, 0.0]])) == pytest.approx(0.5)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(6)
        a, b = rng.standard_normal((5, 7)), rng.standard_normal((5, 7))
        assert frobenius_mse(a, b) == pytest.approx(loop_mse(a, b), abs=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            frobenius_mse(np.zeros((2, 2)), np.zeros((2, 3)))


def _random_operands(rng, spec):
    lhs, _ = spec.split("->")
    big = spec.count(",") and max(len(t) for t in lhs.split(",")) > 4
    dims = {label: int(rng.integers(2, 3 if big else 5)) for label in set(lhs.replace(",", ""))}
    return [rng.standard_normal(tuple(dims[l] for l in term)) for term in lhs.split(",")]


class TestContract:
    def test_identity_l_reduces_to_q(self):
        b1, b2, d = 3, 2, 4
        l = np.broadcast_to(np.eye(b1), (b2, b1, b1)).copy()
        q = np.random.default_rng(0).standard_normal((b1, b2, d))
        alpha = contract("alpha_r", l, q)
        assert np.array_equal(alpha, q)  # alpha_r[k,j,v] = Q[k,j,v] under identity L

    def test_one_hot_r_selects_rows(self):
        b1, b2, d = 2, 3, 4
        r = np.zeros((b1, b2, b2))
        r[:, np.arange(b2), (np.arange(b2) + 1) % b2] = 1.0
        v = np.random.default_rng(1).standard_normal((b1, b2, d))
        y = contract("y", r, v)
        for k in range(b1):
            for j in range(b2):
                assert np.array_equal(y[k, j], v[k, (j + 1) % b2])

    @pytest.mark.parametrize("pattern", sorted(CONTRACT_PATTERNS))
    def test_against_loop_oracle(self, pattern):
        rng = np.random.default_rng(hash(pattern) % 2**32)
        spec = CONTRACT_PATTERNS[pattern]
        reps = 3 if spec.startswith("a") else 8
        for _ in range(reps):
            ops = _random_operands(rng, spec)
            got = contract(pattern, *ops)
            want = loop_einsum(spec, *ops)
            assert np.abs(got - want).max() < 1e-12

    def test_unknown_pattern(self):
        with pytest.raises(KeyError):
            contract("nope", np.zeros((2, 2)))

    def test_shape_mismatch(self):
        l = np.zeros((2, 3, 3))
        q = np.zeros((4, 2, 5))  # l-dim 4 conflicts with 3
        with pytest.raises(ShapeError):
            contract("alpha_r", l, q)

    def test_operand_count_mismatch(self):
        with pytest.raises(ShapeError):
            contract("alpha_r", np.zeros((2, 3, 3)))


class TestBlocked4View:
    def test_indexing_identity(self):
        b1, b2 = 3, 4
        base = np.arange(144.0).reshape(12, 12)
        view = Blocked4View(b1, b2, base)
        t = view.tensor()
        for l in range(b1):
            for j in range(b2):
                for k in range(b1):
                    for i in range(b2):
                        assert t[l, j, k, i] == base[l * b2 + j, k * b2 + i]
        assert view.slice(1, 2).shape == (b1, b2)
        assert np.array_equal(view.slices()[1 * b1 + 2], view.slice(1, 2))

    def test_dimension_check(self):
        with pytest.raises(ShapeError):
            Blocked4View(3, 4, np.zeros((11, 11)))
