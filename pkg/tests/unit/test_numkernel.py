"""Tests for the dense tensor kernels."""

import math

import numpy as np
import pytest

from src.core.exceptions import ArgumentError
from src.kernels import numkernel as nk
from src.kernels.numkernel import BatchNormParams, ConvParams, LinearParams


class TestAsTensor:
    """Tests for tensor validation."""

    def test_converts_to_contiguous_float64(self):
        """Nested lists become float64 arrays."""
        tensor = nk.as_tensor([[1, 2], [3, 4]])
        assert tensor.dtype == np.float64
        assert tensor.flags["C_CONTIGUOUS"]
        assert tensor.size == 4

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_rejects_non_finite_values(self, bad):
        """NaN and Inf are rejected at construction."""
        with pytest.raises(ArgumentError, match="non-finite"):
            nk.as_tensor([1.0, bad])


class TestSoftmax:
    """Tests for softmax."""

    def test_uniform_pair(self):
        """[0, 0] -> [0.5, 0.5]."""
        assert np.array_equal(nk.softmax([0.0, 0.0]), [0.5, 0.5])

    @pytest.mark.parametrize("value", [-1e3, 0.0, 7.5, 1e3])
    def test_single_element_is_one(self, value):
        """A single element always normalizes to 1."""
        assert nk.softmax([value])[0] == 1.0

    def test_ln2_example(self):
        """[0, ln 2] -> [1/3, 2/3]."""
        out = nk.softmax([0.0, math.log(2.0)])
        assert out[0] == pytest.approx(1 / 3, abs=1e-15)
        assert out[1] == pytest.approx(2 / 3, abs=1e-15)

    def test_rows_sum_to_one_and_order_is_preserved(self, rng):
        """Slices along the axis sum to 1 and the argmax is unchanged."""
        x = rng.uniform(-30, 30, (50, 9))
        out = nk.softmax(x, axis=1)
        assert np.max(np.abs(out.sum(axis=1) - 1.0)) <= 1e-12
        assert np.array_equal(np.argmax(out, axis=1), np.argmax(x, axis=1))

    def test_large_logits_are_stable(self):
        """Max subtraction keeps large inputs finite."""
        out = nk.softmax([1000.0, 1000.0])
        assert np.array_equal(out, [0.5, 0.5])

    def test_invalid_axis(self):
        """An axis outside the tensor is an argument error."""
        with pytest.raises(ArgumentError, match="axis"):
            nk.softmax(np.zeros((2, 2)), axis=2)


class TestConv2d:
    """Tests for 2-D cross-correlation."""

    def test_identity_kernel(self, rng):
        """1x1 identity kernel returns the input exactly."""
        x = rng.normal(size=(3, 5, 4))
        assert np.array_equal(nk.conv2d(x, ConvParams.identity(3)), x)

    def test_zero_kernel(self, rng):
        """Zero kernel and bias give an all-zero map."""
        out = nk.conv2d(rng.normal(size=(2, 4, 4)), ConvParams.zeros(3, 2, 3))
        assert out.shape == (3, 4, 4)
        assert not np.any(out)

    def test_ones_kernel_interior(self):
        """3x3 ones, pad 1, constant input: interior 9, edge 6, corner 4."""
        params = ConvParams.same(np.ones((1, 1, 3, 3)), np.zeros(1))
        out = nk.conv2d(np.ones((1, 5, 5)), params)
        assert out[0, 2, 2] == 9.0
        assert out[0, 0, 2] == 6.0
        assert out[0, 0, 0] == 4.0

    def test_output_size_with_stride(self):
        """(H + 2 pad - k) // stride + 1."""
        params = ConvParams(
            kernel=np.ones((1, 1, 3, 3)), bias=np.zeros(1), stride=2, padding=1
        )
        assert nk.conv2d(np.ones((1, 5, 7)), params).shape == (1, 3, 4)

    def test_bias_is_added_per_channel(self):
        """Each output channel receives its own bias."""
        params = ConvParams(kernel=np.zeros((2, 1, 1, 1)), bias=np.array([1.5, -2.0]))
        out = nk.conv2d(np.ones((1, 2, 2)), params)
        assert np.all(out[0] == 1.5) and np.all(out[1] == -2.0)

    def test_channel_mismatch(self):
        """Input channels must match the kernel."""
        with pytest.raises(ArgumentError, match="channel mismatch"):
            nk.conv2d(np.ones((2, 4, 4)), ConvParams.identity(3))

    def test_non_positive_output_size(self):
        """A kernel larger than the unpadded input is rejected."""
        params = ConvParams(kernel=np.ones((1, 1, 3, 3)), bias=np.zeros(1))
        with pytest.raises(ArgumentError, match="not positive"):
            nk.conv2d(np.ones((1, 2, 2)), params)

    def test_same_requires_odd_kernel(self):
        """'same' padding is only defined for odd kernels."""
        with pytest.raises(ArgumentError, match="odd"):
            ConvParams.same(np.ones((1, 1, 2, 2)), np.zeros(1))

    def test_bias_shape_is_validated(self):
        """One bias per output channel."""
        with pytest.raises(ArgumentError, match="bias"):
            ConvParams(kernel=np.ones((2, 1, 1, 1)), bias=np.zeros(3))


class TestPooling:
    """Tests for average pooling."""

    def test_window_mean(self):
        """2x2 window over [[1, 2], [3, 4]] -> 2.5."""
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        assert nk.avg_pool2d(x, 2, 2)[0, 0, 0] == 2.5

    def test_stride_layout(self):
        """Non-overlapping 2x2 windows over a 4x4 map."""
        x = np.arange(16.0).reshape(1, 4, 4)
        expected = np.array([[[2.5, 4.5], [10.5, 12.5]]])
        assert np.array_equal(nk.avg_pool2d(x, 2, 2), expected)

    def test_window_larger_than_input(self):
        """Window larger than the input without padding is rejected."""
        with pytest.raises(ArgumentError, match="larger than input"):
            nk.avg_pool2d(np.ones((1, 2, 2)), 3, 1)

    def test_global_average(self):
        """Per-channel spatial mean."""
        x = np.stack([np.full((3, 3), 2.0), np.arange(9.0).reshape(3, 3)])
        assert np.array_equal(nk.global_avg_pool(x), [2.0, 4.0])


class TestDenseAndActivations:
    """Tests for linear layers, activations and normalization."""

    def test_linear_matvec(self):
        """[[1, 2], [3, 4]] @ [1, 1] = [3, 7]."""
        params = LinearParams(weight=np.array([[1.0, 2.0], [3.0, 4.0]]), bias=np.zeros(2))
        assert np.array_equal(nk.linear(np.ones(2), params), [3.0, 7.0])

    def test_linear_rows(self, rng):
        """Row-wise application equals the per-row matvec."""
        params = LinearParams.random(3, 4, rng)
        x = rng.normal(size=(5, 4))
        expected = np.stack([params.weight @ row + params.bias for row in x])
        assert np.allclose(nk.linear(x, params), expected, atol=1e-14)

    def test_linear_dimension_mismatch(self):
        with pytest.raises(ArgumentError, match="dimension mismatch"):
            nk.linear(np.ones(3), LinearParams.identity(2))

    def test_sigmoid_values(self):
        """sigmoid(0) = 0.5, sigmoid(ln 3) = 0.75, no overflow far out."""
        assert nk.sigmoid(0.0) == 0.5
        assert float(nk.sigmoid(math.log(3.0))) == pytest.approx(0.75, abs=1e-15)
        assert float(nk.sigmoid(-1000.0)) == 0.0
        assert float(nk.sigmoid(1000.0)) == 1.0

    def test_gelu_values(self):
        """gelu(0) = 0 and gelu(1) = Phi(1)."""
        assert float(nk.gelu(0.0)) == 0.0
        assert float(nk.gelu(1.0)) == pytest.approx(0.841345, abs=1e-6)

    def test_matmul_associativity(self, rng):
        a, b, c = rng.normal(size=(3, 4)), rng.normal(size=(4, 5)), rng.normal(size=(5, 2))
        left = nk.matmul(nk.matmul(a, b), c)
        right = nk.matmul(a, nk.matmul(b, c))
        assert np.allclose(left, right, atol=1e-12)

    def test_matmul_shape_mismatch(self):
        with pytest.raises(ArgumentError):
            nk.matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_elementwise_shape_mismatch(self):
        with pytest.raises(ArgumentError, match="shape mismatch"):
            nk.add(np.ones(2), np.ones(3))

    def test_batch_norm_unit(self, rng):
        """Unit statistics divide by sqrt(1 + eps)."""
        x = rng.normal(size=(2, 3, 3))
        out = nk.batch_norm_infer(x, BatchNormParams.unit(2))
        assert np.allclose(out, x / math.sqrt(1.0 + 1e-5), atol=1e-15)

    def test_batch_norm_rejects_negative_variance(self):
        with pytest.raises(ArgumentError, match="running_var"):
            BatchNormParams(
                gamma=np.ones(1),
                beta=np.zeros(1),
                running_mean=np.zeros(1),
                running_var=-np.ones(1),
            )

    def test_layer_norm_rows(self, rng):
        """Rows have zero mean and (nearly) unit variance."""
        out = nk.layer_norm(rng.normal(3.0, 2.0, (4, 16)))
        assert np.allclose(out.mean(axis=1), 0.0, atol=1e-12)
        assert np.allclose(out.var(axis=1), 1.0, atol=1e-5)


class TestAttention:
    """Tests for scaled dot-product attention."""

    def test_weights_are_row_stochastic(self, rng):
        q, k, v = rng.normal(size=(3, 4)), rng.normal(size=(5, 4)), rng.normal(size=(5, 2))
        values, weights = nk.scaled_dot_product_attention(q, k, v)
        assert values.shape == (3, 2)
        assert np.allclose(weights.sum(axis=1), 1.0, atol=1e-12)

    def test_scaling(self):
        """Logits are divided by sqrt(d_k) only when requested."""
        q = np.array([[1.0, 0.0]])
        k = np.array([[1.0, 0.0], [0.0, 1.0]])
        _, scaled = nk.scaled_dot_product_attention(q, k, k)
        _, unscaled = nk.scaled_dot_product_attention(q, k, k, scale=False)
        assert scaled[0, 0] == pytest.approx(1 / (1 + math.exp(-1 / math.sqrt(2))), abs=1e-15)
        assert unscaled[0, 0] == pytest.approx(1 / (1 + math.exp(-1.0)), abs=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ArgumentError, match="shape mismatch"):
            nk.scaled_dot_product_attention(np.ones((1, 2)), np.ones((2, 3)), np.ones((2, 3)))


class TestUpsample:
    def test_nearest_neighbour(self):
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        out = nk.upsample_nearest(x, 4, 4)
        assert out.shape == (1, 4, 4)
        assert np.array_equal(out[0, :2, :2], np.ones((2, 2)))
        assert np.array_equal(out[0, 2:, 2:], np.full((2, 2), 4.0))
