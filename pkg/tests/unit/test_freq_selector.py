"""Tests for the frequency selector."""

from dataclasses import replace

import numpy as np
import pytest

from src.core.exceptions import ArgumentError
from src.kernels.numkernel import BatchNormParams, ConvParams, LinearParams
from src.services import freq_selector as fs


def _identity_selector(channels: int, pool_window: int = 2) -> fs.FreqSelectorParams:
    return fs.FreqSelectorParams(
        decomp_conv=ConvParams.identity(channels),
        decomp_bn=BatchNormParams.unit(channels),
        fc_global=LinearParams.identity(channels),
        fc_high=LinearParams.identity(channels),
        fc_low=LinearParams.identity(channels),
        pool_window=pool_window,
    )


class TestDecompose:
    """Tests for the high/low split."""

    def test_reconstruction_is_exact(self, rng):
        """high + low reproduces the input for random shapes and weights."""
        for _ in range(1000):
            c = int(rng.integers(1, 9))
            h, w = int(rng.integers(1, 17)), int(rng.integers(1, 17))
            params = fs.FreqSelectorParams.random(c, rng, pool_window=int(rng.integers(1, 4)))
            f = rng.normal(size=(c, h, w))
            pair = fs.decompose(f, params)
            assert np.max(np.abs(pair.high + pair.low - f)) <= 1e-12

    def test_single_pixel_map(self):
        """A 1x1 map is all high frequency: attention is 1."""
        f = np.array([[[3.5]]])
        pair = fs.decompose(f, _identity_selector(1))
        assert np.array_equal(pair.high, f)
        assert np.array_equal(pair.low, np.zeros_like(f))

    def test_attention_is_spatial_distribution_without_pooling(self, rng):
        """With pool window 1 every channel's attention sums to 1."""
        params = fs.FreqSelectorParams.random(3, rng, pool_window=1)
        attention = fs.high_frequency_attention(rng.normal(size=(3, 5, 6)), params)
        assert attention.shape == (3, 5, 6)
        assert np.allclose(attention.sum(axis=(1, 2)), 1.0, atol=1e-12)
        assert np.all(attention > 0)

    def test_pooled_attention_is_upsampled(self, rng):
        """A pooled attention map is resized back to the input resolution."""
        params = fs.FreqSelectorParams.random(2, rng, pool_window=2)
        attention = fs.high_frequency_attention(rng.normal(size=(2, 4, 4)), params)
        assert attention.shape == (2, 4, 4)
        # Each pooled cell covers a 2x2 block of equal values.
        assert np.array_equal(attention[:, 0, 0], attention[:, 1, 1])

    def test_channel_mismatch(self, rng):
        params = fs.FreqSelectorParams.random(2, rng)
        with pytest.raises(ArgumentError, match="channels"):
            fs.decompose(np.ones((3, 4, 4)), params)


class TestSelectFuse:
    """Tests for the gated re-fusion."""

    def test_zero_gates_halve_the_input(self, rng):
        """Zero gate weights give sigma(0) = 0.5 for both parts."""
        f = rng.normal(size=(2, 4, 4))
        out = fs.frequency_select(f, fs.FreqSelectorParams.zeros(2))
        assert np.allclose(out, 0.5 * f, atol=1e-15)

    def test_saturated_gates_select_high(self, rng):
        """Gate logits of +/-40 keep the high part and drop the low part."""
        base = fs.FreqSelectorParams.random(2, rng)
        params = fs.FreqSelectorParams(
            decomp_conv=base.decomp_conv,
            decomp_bn=base.decomp_bn,
            fc_global=base.fc_global,
            fc_high=LinearParams(weight=np.zeros((2, 2)), bias=np.full(2, 40.0)),
            fc_low=LinearParams(weight=np.zeros((2, 2)), bias=np.full(2, -40.0)),
        )
        pair = fs.decompose(rng.normal(size=(2, 6, 6)), params)
        assert np.allclose(fs.select_fuse(pair, params), pair.high, atol=1e-12)

    def test_gates_lie_in_unit_interval(self, rng):
        params = fs.FreqSelectorParams.random(4, rng, scale=5.0)
        pair = fs.decompose(rng.normal(size=(4, 3, 3)), params)
        gate_high, gate_low = fs.frequency_gates(pair, params)
        for gate in (gate_high, gate_low):
            assert gate.shape == (4,)
            assert np.all((gate >= 0.0) & (gate <= 1.0))

    def test_high_gate_is_monotone_in_its_bias(self, rng):
        """Raising the fc_high bias never shrinks the high-frequency contribution."""
        for _ in range(50):
            c = int(rng.integers(1, 5))
            base = fs.FreqSelectorParams.random(c, rng)
            pair = fs.decompose(rng.normal(size=(c, 4, 4)), base)
            previous_gate = np.zeros(c)
            previous_part = np.zeros_like(pair.high)
            for shift in np.linspace(-6.0, 6.0, 13):
                fc_high = LinearParams(weight=base.fc_high.weight, bias=base.fc_high.bias + shift)
                params = replace(base, fc_high=fc_high)
                gate_high, _ = fs.frequency_gates(pair, params)
                part = np.abs(gate_high[:, None, None] * pair.high)
                assert np.all(gate_high >= previous_gate)
                assert np.all(part >= previous_part)
                previous_gate, previous_part = gate_high, part


class TestParams:
    """Tests for selector parameter validation."""

    def test_decomposition_conv_must_be_same(self, rng):
        with pytest.raises(ArgumentError, match="same"):
            fs.FreqSelectorParams(
                decomp_conv=ConvParams(kernel=np.ones((1, 1, 3, 3)), bias=np.zeros(1)),
                decomp_bn=BatchNormParams.unit(1),
                fc_global=LinearParams.identity(1),
                fc_high=LinearParams.identity(1),
                fc_low=LinearParams.identity(1),
            )

    def test_gate_shapes(self):
        with pytest.raises(ArgumentError, match="fc_high"):
            fs.FreqSelectorParams(
                decomp_conv=ConvParams.identity(2),
                decomp_bn=BatchNormParams.unit(2),
                fc_global=LinearParams.identity(2),
                fc_high=LinearParams.identity(3),
                fc_low=LinearParams.identity(2),
            )
