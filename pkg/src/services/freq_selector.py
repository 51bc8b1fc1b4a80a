"""Frequency selector: split a feature map into high/low-frequency parts and re-fuse them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.core.exceptions import ArgumentError
from src.kernels import numkernel as nk
from src.kernels.numkernel import BatchNormParams, ConvParams, LinearParams, Tensor


@dataclass(frozen=True)
class FreqSelectorParams:
    """Weights of one frequency selector (decomposition conv/BN, pooling, gates)."""

    decomp_conv: ConvParams
    decomp_bn: BatchNormParams
    fc_global: LinearParams
    fc_high: LinearParams
    fc_low: LinearParams
    pool_window: int = 2

    def __post_init__(self) -> None:
        c = self.decomp_conv.in_channels
        if self.decomp_conv.out_channels != c:
            raise ArgumentError("decomposition conv must preserve the channel count")
        conv = self.decomp_conv
        if conv.stride != 1 or 2 * conv.padding != conv.kernel_size - 1:
            raise ArgumentError("decomposition conv must be a stride-1 'same' convolution")
        if self.decomp_bn.channels != c:
            raise ArgumentError("decomposition batch norm channel mismatch")
        if self.fc_global.in_features != c:
            raise ArgumentError("fc_global must read the per-channel global vector")
        for name in ("fc_high", "fc_low"):
            gate = getattr(self, name)
            if gate.in_features != self.fc_global.out_features or gate.out_features != c:
                raise ArgumentError(f"{name} must map the global vector to per-channel logits")
        if self.pool_window < 1:
            raise ArgumentError("pool_window must be positive", argument="pool_window")

    @property
    def channels(self) -> int:
        return self.decomp_conv.in_channels

    @classmethod
    def random(
        cls,
        channels: int,
        rng: np.random.Generator,
        kernel_size: int = 3,
        pool_window: int = 2,
        scale: float = 1.0,
    ) -> "FreqSelectorParams":
        return cls(
            decomp_conv=ConvParams.random(channels, channels, kernel_size, rng, scale),
            decomp_bn=BatchNormParams.unit(channels),
            fc_global=LinearParams.random(channels, channels, rng, scale),
            fc_high=LinearParams.random(channels, channels, rng, scale),
            fc_low=LinearParams.random(channels, channels, rng, scale),
            pool_window=pool_window,
        )

    @classmethod
    def zeros(
        cls, channels: int, kernel_size: int = 3, pool_window: int = 2
    ) -> "FreqSelectorParams":
        return cls(
            decomp_conv=ConvParams.zeros(channels, channels, kernel_size),
            decomp_bn=BatchNormParams.unit(channels),
            fc_global=LinearParams.zeros(channels, channels),
            fc_high=LinearParams.zeros(channels, channels),
            fc_low=LinearParams.zeros(channels, channels),
            pool_window=pool_window,
        )


@dataclass(frozen=True)
class FreqPair:
    """High- and low-frequency parts of one feature map."""

    high: Tensor
    low: Tensor

    def __post_init__(self) -> None:
        if self.high.shape != self.low.shape:
            raise ArgumentError("high and low parts must share a shape")


def _check_input(f_ori: Tensor, params: FreqSelectorParams) -> None:
    if f_ori.ndim != 3 or f_ori.shape[0] != params.channels:
        raise ArgumentError(
            "feature map does not match the selector channels",
            expected=params.channels,
            received=f_ori.shape,
        )


def high_frequency_attention(f_ori: Tensor, params: FreqSelectorParams) -> Tensor:
    """
    Spatial attention map softmax(BN(Conv(Ap(F)))) at the input resolution.

    The softmax runs over the spatial positions of each channel. When the
    pooling window reduced the map, the attention is upsampled back by
    nearest neighbour. Maps smaller than the window are not pooled.
    """
    _check_input(f_ori, params)
    _, h, w = f_ori.shape
    window = params.pool_window
    if window > 1 and h >= window and w >= window:
        pooled = nk.avg_pool2d(f_ori, window, window)
    else:
        pooled = f_ori
    logits = nk.batch_norm_infer(nk.conv2d(pooled, params.decomp_conv), params.decomp_bn)
    attention = nk.spatial_softmax(logits)
    if attention.shape[1:] != (h, w):
        attention = nk.upsample_nearest(attention, h, w)
    return attention


def decompose(f_ori: Tensor, params: FreqSelectorParams) -> FreqPair:
    """
    Separate a feature map into high- and low-frequency components.

    Args:
        f_ori: Input map (C, H, W)
        params: Selector weights

    Returns:
        FreqPair with high = F * attention and low = F - high

    Raises:
        ArgumentError: If the map does not match the parameters
    """
    high = f_ori * high_frequency_attention(f_ori, params)
    return FreqPair(high=high, low=f_ori - high)


def frequency_gates(pair: FreqPair, params: FreqSelectorParams) -> Tuple[Tensor, Tensor]:
    """Per-channel gates (sigma(FC_high(g)), sigma(FC_low(g))) with g = FC(GAP(high + low))."""
    _check_input(pair.high, params)
    g = nk.linear(nk.global_avg_pool(nk.add(pair.high, pair.low)), params.fc_global)
    return nk.sigmoid(nk.linear(g, params.fc_high)), nk.sigmoid(nk.linear(g, params.fc_low))


def select_fuse(pair: FreqPair, params: FreqSelectorParams) -> Tensor:
    """Gate each frequency part per channel and add them back together."""
    gate_high, gate_low = frequency_gates(pair, params)
    return gate_high[:, None, None] * pair.high + gate_low[:, None, None] * pair.low


def frequency_select(f_ori: Tensor, params: FreqSelectorParams) -> Tensor:
    return select_fuse(decompose(f_ori, params), params)
