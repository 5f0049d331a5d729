import numpy as np
import pytest

from swinfer.engine import (
    conv2d_forward,
    flatten,
    linear_forward,
    maxpool2d_forward,
    relu,
    softmax,
)
from swinfer.engine import kernels_numba, kernels_numpy
from swinfer.errors import InvalidShapeError, NumericError

from oracles import conv2d_naive, linear_naive, maxpool2d_naive

BACKENDS = [("numpy", kernels_numpy), ("numba", kernels_numba)]


def f32(a):
    return np.asarray(a, dtype=np.float32)


class TestConv2d:
    def test_1x1_scale(self):
        x = f32([[[2.0]]])
        w = f32([[[[3.0]]]])
        b = f32([1.0])
        out = conv2d_forward(x, w, b, stride=1, pad=0)
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == pytest.approx(7.0)

    def test_zero_input_gives_bias_planes(self):
        rng = np.random.default_rng(0)
        x = np.zeros((3, 8, 8), np.float32)
        w = f32(rng.normal(size=(4, 3, 3, 3)))
        b = f32([0.5, -1.0, 2.0, 0.0])
        out = conv2d_forward(x, w, b, stride=1, pad=1)
        for n in range(4):
            assert np.all(out[n] == b[n])

    @pytest.mark.parametrize("name,kern", BACKENDS)
    def test_matches_naive_loop_oracle(self, name, kern):
        rng = np.random.default_rng(42)
        x = f32(rng.normal(size=(3, 5, 5)))
        w = f32(rng.normal(size=(4, 3, 3, 3)))
        b = f32(rng.normal(size=4))
        expected = conv2d_naive(x, w, b, stride=1, pad=1)
        got = kern.conv2d(x, w, b, 1, 1)
        assert got.shape == expected.shape
        np.testing.assert_allclose(got, expected, atol=1e-5)

    @pytest.mark.parametrize("name,kern", BACKENDS)
    def test_random_shapes_match_oracle(self, name, kern):
        rng = np.random.default_rng(7)
        for _ in range(12):
            c = int(rng.integers(1, 4))
            n = int(rng.integers(1, 5))
            h = int(rng.integers(3, 9))
            wd = int(rng.integers(3, 9))
            kh = int(rng.integers(1, min(4, h) + 1))
            kw = int(rng.integers(1, min(4, wd) + 1))
            stride = int(rng.integers(1, 3))
            pad = int(rng.integers(0, 2))
            if (h + 2 * pad - kh) // stride + 1 < 1 or (wd + 2 * pad - kw) // stride + 1 < 1:
                continue
            x = f32(rng.normal(size=(c, h, wd)))
            w = f32(rng.normal(size=(n, c, kh, kw)))
            b = f32(rng.normal(size=n))
            np.testing.assert_allclose(
                kern.conv2d(x, w, b, stride, pad),
                conv2d_naive(x, w, b, stride, pad),
                atol=1e-5,
            )

    def test_backends_agree(self):
        rng = np.random.default_rng(3)
        x = f32(rng.normal(size=(3, 16, 16)))
        w = f32(rng.normal(size=(8, 3, 3, 3)))
        b = f32(rng.normal(size=8))
        a = kernels_numpy.conv2d(x, w, b, 2, 1)
        bq = kernels_numba.conv2d(x, w, b, 2, 1)
        np.testing.assert_allclose(a, bq, atol=1e-5)

    def test_repeated_calls_bit_identical(self):
        rng = np.random.default_rng(5)
        x = f32(rng.normal(size=(2, 6, 6)))
        w = f32(rng.normal(size=(3, 2, 3, 3)))
        b = f32(rng.normal(size=3))
        first = conv2d_forward(x, w, b, 1, 1)
        second = conv2d_forward(x, w, b, 1, 1)
        assert np.array_equal(first, second)

    def test_channel_mismatch_raises(self):
        with pytest.raises(InvalidShapeError):
            conv2d_forward(np.zeros((2, 4, 4), np.float32), np.zeros((1, 3, 3, 3), np.float32), np.zeros(1, np.float32), 1, 0)

    def test_kernel_too_large_raises(self):
        with pytest.raises(InvalidShapeError):
            conv2d_forward(np.zeros((1, 2, 2), np.float32), np.zeros((1, 1, 5, 5), np.float32), np.zeros(1, np.float32), 1, 0)

    def test_non_finite_input_raises(self):
        x = np.full((1, 2, 2), np.nan, np.float32)
        with pytest.raises(NumericError):
            conv2d_forward(x, np.ones((1, 1, 1, 1), np.float32), np.zeros(1, np.float32), 1, 0)


class TestMaxpool:
    def test_single_window(self):
        x = f32([[[1.0, 2.0], [3.0, 4.0]]])
        out = maxpool2d_forward(x, 2, 2, 2)
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == 4.0

    def test_constant_input(self):
        x = np.full((2, 6, 6), 1.25, np.float32)
        out = maxpool2d_forward(x, 2, 2, 2)
        assert np.all(out == np.float32(1.25))
        assert out.shape == (2, 3, 3)

    @pytest.mark.parametrize("name,kern", BACKENDS)
    def test_matches_naive_oracle(self, name, kern):
        rng = np.random.default_rng(11)
        x = f32(rng.normal(size=(3, 6, 6)))
        expected = maxpool2d_naive(x, 3, 3, 2)
        np.testing.assert_allclose(kern.maxpool2d(x, 3, 3, 2), expected, atol=1e-5)

    def test_window_too_large_raises(self):
        with pytest.raises(InvalidShapeError):
            maxpool2d_forward(np.zeros((1, 2, 2), np.float32), 3, 3, 1)


class TestLinear:
    def test_identity(self):
        x = f32([1.0, -2.0, 3.0])
        out = linear_forward(x, np.eye(3, dtype=np.float32), np.zeros(3, np.float32))
        np.testing.assert_array_equal(out, x)

    def test_zero_input_gives_bias(self):
        w = f32(np.random.default_rng(1).normal(size=(3, 4)))
        b = f32([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(linear_forward(np.zeros(4, np.float32), w, b), b)

    def test_matches_hand_multiply(self):
        rng = np.random.default_rng(9)
        x = f32(rng.normal(size=4))
        w = f32(rng.normal(size=(3, 4)))
        b = f32(rng.normal(size=3))
        np.testing.assert_allclose(linear_forward(x, w, b), linear_naive(x, w, b), atol=1e-5)

    def test_length_mismatch_raises(self):
        with pytest.raises(InvalidShapeError):
            linear_forward(np.zeros(3, np.float32), np.zeros((2, 4), np.float32), np.zeros(2, np.float32))


class TestPointwise:
    def test_relu(self):
        np.testing.assert_array_equal(relu(f32([-1.0, 0.0, 2.0])), f32([0.0, 0.0, 2.0]))

    def test_softmax_two_zeros(self):
        np.testing.assert_allclose(softmax(f32([0.0, 0.0])), [0.5, 0.5], atol=1e-6)

    def test_softmax_sums_to_one(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            v = f32(rng.normal(scale=5.0, size=int(rng.integers(2, 40))))
            assert abs(float(softmax(v).sum()) - 1.0) < 1e-6

    def test_flatten_row_major(self):
        x = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
        np.testing.assert_array_equal(flatten(x), np.arange(24, dtype=np.float32))
