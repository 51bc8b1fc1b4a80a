"""
Multi-modal fusion module (MFM) and its frequency-guided first-layer variant (FMFM).

Both modules turn an RGB feature map and an auxiliary feature map of the
same shape into one fused prompt map. ``inject`` adds fused prompts onto the
encoder's token sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.core.exceptions import ArgumentError
from src.kernels import numkernel as nk
from src.kernels.numkernel import ConvParams, LinearParams, Tensor
from src.services.freq_selector import FreqSelectorParams, frequency_select
from src.services.tokens import TokenSequence, map_to_tokens


@dataclass(frozen=True)
class FusionBranches:
    """Which visual-adapter branches are active."""

    spatial: bool = True
    channel: bool = True
    frequency: bool = True


ALL_BRANCHES = FusionBranches()


@dataclass(frozen=True)
class MfmParams:
    """Per-modality input convs, channel-attention FC and the combining conv."""

    conv_rgb: ConvParams
    conv_x: ConvParams
    fc_channel: LinearParams
    conv_out: ConvParams

    def __post_init__(self) -> None:
        if self.conv_rgb.kernel.shape != self.conv_x.kernel.shape:
            raise ArgumentError("conv_rgb and conv_x must share their shape")
        c = self.conv_rgb.out_channels
        if self.fc_channel.in_features != c or self.fc_channel.out_features != c:
            raise ArgumentError("fc_channel must map C -> C", expected=c)
        if self.conv_out.in_channels != c:
            raise ArgumentError("conv_out must read the branch channels", expected=c)

    @property
    def in_channels(self) -> int:
        return self.conv_rgb.in_channels

    @classmethod
    def random(
        cls, channels: int, rng: np.random.Generator, kernel_size: int = 3, scale: float = 1.0
    ) -> "MfmParams":
        return cls(
            conv_rgb=ConvParams.random(channels, channels, kernel_size, rng, scale),
            conv_x=ConvParams.random(channels, channels, kernel_size, rng, scale),
            fc_channel=LinearParams.random(channels, channels, rng, scale),
            conv_out=ConvParams.random(channels, channels, kernel_size, rng, scale),
        )

    @classmethod
    def zeros(cls, channels: int, kernel_size: int = 3) -> "MfmParams":
        return cls(
            conv_rgb=ConvParams.zeros(channels, channels, kernel_size),
            conv_x=ConvParams.zeros(channels, channels, kernel_size),
            fc_channel=LinearParams.zeros(channels, channels),
            conv_out=ConvParams.zeros(channels, channels, kernel_size),
        )


@dataclass(frozen=True)
class FmfmParams:
    freq_rgb: FreqSelectorParams
    freq_x: FreqSelectorParams
    mfm: MfmParams

    def __post_init__(self) -> None:
        channels = {self.freq_rgb.channels, self.freq_x.channels, self.mfm.in_channels}
        if len(channels) != 1:
            raise ArgumentError("FMFM components disagree on channel count", received=channels)

    @classmethod
    def random(
        cls,
        channels: int,
        rng: np.random.Generator,
        kernel_size: int = 3,
        pool_window: int = 2,
        scale: float = 1.0,
    ) -> "FmfmParams":
        return cls(
            freq_rgb=FreqSelectorParams.random(channels, rng, kernel_size, pool_window, scale),
            freq_x=FreqSelectorParams.random(channels, rng, kernel_size, pool_window, scale),
            mfm=MfmParams.random(channels, rng, kernel_size, scale),
        )

    @classmethod
    def zeros(cls, channels: int, kernel_size: int = 3, pool_window: int = 2) -> "FmfmParams":
        return cls(
            freq_rgb=FreqSelectorParams.zeros(channels, kernel_size, pool_window),
            freq_x=FreqSelectorParams.zeros(channels, kernel_size, pool_window),
            mfm=MfmParams.zeros(channels, kernel_size),
        )


def spatial_branch(features: Tensor) -> Tensor:
    """F * softmax(F), softmax over spatial positions per channel."""
    return features * nk.spatial_softmax(features)


def channel_branch(f_rgb: Tensor, f_x: Tensor, fc_channel: LinearParams) -> Tensor:
    """Per-channel vector F^g * sigma(FC(F^g)) with F^g = GAP(F_rgb + F_x)."""
    f_global = nk.global_avg_pool(nk.add(f_rgb, f_x))
    return f_global * nk.sigmoid(nk.linear(f_global, fc_channel))


def mfm(
    i_rgb: Tensor,
    i_x: Tensor,
    params: MfmParams,
    branches: FusionBranches = ALL_BRANCHES,
) -> Tensor:
    """
    Fuse two modalities from spatial and channel perspectives.

    Args:
        i_rgb: RGB input map (C, H, W)
        i_x: Auxiliary input map, same shape
        params: MFM weights
        branches: Active branches; a disabled spatial branch passes F_i through
            unchanged, a disabled channel branch contributes nothing

    Returns:
        Fused map Conv_out(F^s_rgb + F^s_x + F^c)

    Raises:
        ArgumentError: If the modality maps differ in shape
    """
    if i_rgb.shape != i_x.shape:
        raise ArgumentError("modality shape mismatch", expected=i_rgb.shape, received=i_x.shape)

    f_rgb = nk.conv2d(i_rgb, params.conv_rgb)
    f_x = nk.conv2d(i_x, params.conv_x)

    if branches.spatial:
        combined = spatial_branch(f_rgb) + spatial_branch(f_x)
    else:
        combined = f_rgb + f_x

    if branches.channel:
        combined = combined + channel_branch(f_rgb, f_x, params.fc_channel)[:, None, None]

    return nk.conv2d(combined, params.conv_out)


def fmfm(
    i_rgb: Tensor,
    i_x: Tensor,
    params: FmfmParams,
    branches: FusionBranches = ALL_BRANCHES,
) -> Tensor:
    """MFM applied to the frequency-selected modalities (first adapter layer)."""
    if branches.frequency:
        i_rgb = frequency_select(i_rgb, params.freq_rgb)
        i_x = frequency_select(i_x, params.freq_x)
    return mfm(i_rgb, i_x, params.mfm, branches)


def inject(fused: Sequence[Tensor], vit_out: TokenSequence) -> TokenSequence:
    """
    Add fused prompt maps onto the visual regions of a token sequence.

    Args:
        fused: One (H, g, g) map per visual region, in region order
        vit_out: Token sequence produced by the previous encoder block

    Returns:
        New sequence; the cue slot is untouched

    Raises:
        ArgumentError: If the flattened prompts do not match the visual tokens
    """
    regions = vit_out.visual_regions
    if len(fused) != len(regions):
        raise ArgumentError(
            "one fused map per visual region", expected=len(regions), received=len(fused)
        )
    tokens = vit_out.tokens.copy()
    for region, prompt in zip(regions, fused):
        flat = map_to_tokens(prompt)
        if flat.shape != (region.size, vit_out.dim):
            raise ArgumentError(
                f"fused map does not match the {region.name} region",
                expected=(region.size, vit_out.dim),
                received=flat.shape,
            )
        tokens[region.start : region.stop] += flat
    return vit_out.with_tokens(tokens)
