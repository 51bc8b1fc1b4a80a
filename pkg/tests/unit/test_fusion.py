"""Tests for MFM, FMFM, prompt injection and token reshaping."""

import numpy as np
import pytest

from src.core.exceptions import ArgumentError
from src.kernels import numkernel as nk
from src.kernels.numkernel import ConvParams, LinearParams
from src.services import fusion
from src.services.fusion import FmfmParams, FusionBranches, MfmParams
from src.services.tokens import TokenSequence, grid_side, map_to_tokens, tokens_to_map


def _pass_through(channels: int) -> MfmParams:
    """Identity convolutions and a zero channel FC."""
    return MfmParams(
        conv_rgb=ConvParams.identity(channels),
        conv_x=ConvParams.identity(channels),
        fc_channel=LinearParams.zeros(channels, channels),
        conv_out=ConvParams.identity(channels),
    )


class TestMfm:
    """Tests for the multi-modal fusion module."""

    def test_output_shape(self, rng):
        params = MfmParams.random(4, rng)
        out = fusion.mfm(rng.normal(size=(4, 3, 3)), rng.normal(size=(4, 3, 3)), params)
        assert out.shape == (4, 3, 3)

    def test_branches_off_adds_modalities(self, rng):
        """Without spatial and channel branches the fused map is F_rgb + F_x."""
        a, b = rng.normal(size=(2, 3, 3)), rng.normal(size=(2, 3, 3))
        off = FusionBranches(spatial=False, channel=False)
        assert np.array_equal(fusion.mfm(a, b, _pass_through(2), off), a + b)

    def test_spatial_branch(self, rng):
        """Spatial attention weights each map by its own spatial softmax."""
        a, b = rng.normal(size=(2, 3, 3)), rng.normal(size=(2, 3, 3))
        spatial_only = FusionBranches(spatial=True, channel=False)
        expected = a * nk.spatial_softmax(a) + b * nk.spatial_softmax(b)
        out = fusion.mfm(a, b, _pass_through(2), spatial_only)
        assert np.allclose(out, expected, atol=1e-15)

    def test_channel_branch(self, rng):
        """A zero channel FC gates F^g with sigma(0) = 0.5."""
        a, b = rng.normal(size=(2, 3, 3)), rng.normal(size=(2, 3, 3))
        channel_only = FusionBranches(spatial=False, channel=True)
        f_global = (a + b).mean(axis=(1, 2))
        expected = a + b + 0.5 * f_global[:, None, None]
        out = fusion.mfm(a, b, _pass_through(2), channel_only)
        assert np.allclose(out, expected, atol=1e-14)

    def test_modality_symmetry(self, rng):
        """Swapping inputs and the per-modality convs leaves the output unchanged."""
        params = MfmParams.random(3, rng)
        swapped = MfmParams(
            conv_rgb=params.conv_x,
            conv_x=params.conv_rgb,
            fc_channel=params.fc_channel,
            conv_out=params.conv_out,
        )
        a, b = rng.normal(size=(3, 4, 4)), rng.normal(size=(3, 4, 4))
        diff = fusion.mfm(a, b, params) - fusion.mfm(b, a, swapped)
        assert np.max(np.abs(diff)) <= 1e-12

    def test_shape_mismatch(self, rng):
        with pytest.raises(ArgumentError, match="modality shape mismatch"):
            fusion.mfm(np.ones((2, 3, 3)), np.ones((2, 4, 4)), MfmParams.random(2, rng))


class TestFmfm:
    """Tests for the frequency-guided variant."""

    def test_zero_parameters_give_zero_prompt(self, rng):
        a, b = rng.normal(size=(3, 4, 4)), rng.normal(size=(3, 4, 4))
        out = fusion.fmfm(a, b, FmfmParams.zeros(3))
        assert out.shape == (3, 4, 4)
        assert not np.any(out)

    def test_frequency_off_equals_mfm(self, rng):
        """Disabling the frequency branch reduces FMFM to its MFM."""
        params = FmfmParams.random(2, rng)
        a, b = rng.normal(size=(2, 4, 4)), rng.normal(size=(2, 4, 4))
        branches = FusionBranches(frequency=False)
        assert np.array_equal(
            fusion.fmfm(a, b, params, branches), fusion.mfm(a, b, params.mfm, branches)
        )

    def test_component_channels_must_agree(self, rng):
        with pytest.raises(ArgumentError, match="channel count"):
            FmfmParams(
                freq_rgb=FmfmParams.random(2, rng).freq_rgb,
                freq_x=FmfmParams.random(2, rng).freq_x,
                mfm=MfmParams.random(3, rng),
            )


class TestInject:
    """Tests for adding prompts onto the token sequence."""

    def test_adds_flattened_prompts(self, rng):
        search = rng.integers(-4, 5, (4, 3)).astype(float)
        template = rng.integers(-4, 5, (1, 3)).astype(float)
        cue = rng.normal(size=3)
        sequence = TokenSequence.assemble(search, [template], cue)
        prompts = [
            rng.integers(-4, 5, (3, 2, 2)).astype(float),
            rng.integers(-4, 5, (3, 1, 1)).astype(float),
        ]
        out = fusion.inject(prompts, sequence)
        assert np.array_equal(out.search, search + prompts[0].reshape(3, -1).T)
        assert np.array_equal(out.tokens[4], template[0] + prompts[1][:, 0, 0])
        assert np.array_equal(out.cue, cue)

    def test_zero_prompts_leave_tokens_unchanged(self, rng):
        sequence = TokenSequence.assemble(rng.normal(size=(4, 2)), [], rng.normal(size=2))
        out = fusion.inject([np.zeros((2, 2, 2))], sequence)
        assert np.array_equal(out.tokens, sequence.tokens)

    def test_region_count_mismatch(self, rng):
        sequence = TokenSequence.assemble(rng.normal(size=(4, 2)), [], np.zeros(2))
        with pytest.raises(ArgumentError, match="one fused map per visual region"):
            fusion.inject([np.zeros((2, 2, 2)), np.zeros((2, 2, 2))], sequence)

    def test_prompt_shape_mismatch(self, rng):
        sequence = TokenSequence.assemble(rng.normal(size=(4, 2)), [], np.zeros(2))
        with pytest.raises(ArgumentError, match="search region"):
            fusion.inject([np.zeros((2, 3, 3))], sequence)


class TestTokens:
    """Tests for token sequences and reshaping."""

    def test_map_round_trip(self, rng):
        tokens = rng.normal(size=(9, 5))
        feature_map = tokens_to_map(tokens)
        assert feature_map.shape == (5, 3, 3)
        assert np.array_equal(feature_map[:, 0, 1], tokens[1])
        assert np.array_equal(map_to_tokens(feature_map), tokens)

    def test_non_square_count(self):
        with pytest.raises(ArgumentError, match="perfect square"):
            grid_side(8)

    def test_assemble_regions(self, rng):
        sequence = TokenSequence.assemble(
            rng.normal(size=(4, 2)), [rng.normal(size=(1, 2)), rng.normal(size=(1, 2))], np.ones(2)
        )
        assert [r.name for r in sequence.regions] == ["search", "template", "template", "cue"]
        assert sequence.tokens.shape == (7, 2)
        assert np.array_equal(sequence.cue, np.ones(2))
        assert len(sequence.visual_regions) == 3

    def test_with_cue_copies(self, rng):
        sequence = TokenSequence.assemble(rng.normal(size=(1, 2)), [], np.zeros(2))
        updated = sequence.with_cue(np.ones(2))
        assert np.array_equal(updated.cue, np.ones(2))
        assert np.array_equal(sequence.cue, np.zeros(2))
