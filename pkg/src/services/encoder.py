"""
Surrogate vision-transformer encoder: patch embedding, pre-norm blocks and a box head.

The encoder stands in for a frozen pretrained backbone. Its weights are drawn
once from the run seed and never change; only the adapters act on its token
stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.core.exceptions import ArgumentError
from src.kernels import numkernel as nk
from src.kernels.numkernel import LinearParams, Tensor
from src.schemas.boxes import BoundingBox
from src.schemas.run_config import EncoderConfig
from src.services.tokens import TEMPLATE, TokenSequence, grid_side


@dataclass(frozen=True)
class BlockParams:
    """Self-attention and feed-forward weights of one encoder block."""

    query: LinearParams
    key: LinearParams
    value: LinearParams
    proj: LinearParams
    mlp_in: LinearParams
    mlp_out: LinearParams
    heads: int = 1

    def __post_init__(self) -> None:
        dim = self.query.in_features
        for name in ("query", "key", "value", "proj"):
            params: LinearParams = getattr(self, name)
            if params.weight.shape != (dim, dim):
                raise ArgumentError(f"{name} must be (H, H)", expected=(dim, dim))
        if self.mlp_in.in_features != dim or self.mlp_out.out_features != dim:
            raise ArgumentError("feed-forward must map H -> H", expected=dim)
        if self.mlp_in.out_features != self.mlp_out.in_features:
            raise ArgumentError("feed-forward hidden widths disagree")
        if self.heads < 1 or dim % self.heads != 0:
            raise ArgumentError("heads must divide H", argument="heads", received=self.heads)

    @property
    def dim(self) -> int:
        return self.query.in_features

    @classmethod
    def random(
        cls,
        dim: int,
        rng: np.random.Generator,
        heads: int = 1,
        mlp_ratio: int = 2,
        scale: float = 1.0,
    ) -> "BlockParams":
        hidden = dim * mlp_ratio
        return cls(
            query=LinearParams.random(dim, dim, rng, scale),
            key=LinearParams.random(dim, dim, rng, scale),
            value=LinearParams.random(dim, dim, rng, scale),
            proj=LinearParams.random(dim, dim, rng, scale),
            mlp_in=LinearParams.random(hidden, dim, rng, scale),
            mlp_out=LinearParams.random(dim, hidden, rng, scale),
            heads=heads,
        )


@dataclass(frozen=True)
class EncoderParams:
    """Patch embedding shared by both modalities plus L blocks."""

    patch_embed: LinearParams
    blocks: Tuple[BlockParams, ...]
    patch_size: int

    def __post_init__(self) -> None:
        if not self.blocks:
            raise ArgumentError("encoder needs at least one block")
        if any(block.dim != self.dim for block in self.blocks):
            raise ArgumentError("every block must act on the embedding width", expected=self.dim)
        if self.patch_size < 1 or self.patch_embed.in_features % (self.patch_size**2) != 0:
            raise ArgumentError("patch_embed input must be C * p * p", received=self.patch_size)

    @property
    def dim(self) -> int:
        return self.patch_embed.out_features

    @property
    def layers(self) -> int:
        return len(self.blocks)

    @property
    def channels(self) -> int:
        return self.patch_embed.in_features // (self.patch_size**2)

    @classmethod
    def random(
        cls, config: EncoderConfig, channels: int, rng: np.random.Generator
    ) -> "EncoderParams":
        p = config.patch_size
        patch_embed = LinearParams.random(config.hidden, channels * p * p, rng)
        blocks = tuple(
            BlockParams.random(
                config.hidden, rng, config.heads, config.mlp_ratio, config.init_scale
            )
            for _ in range(config.layers)
        )
        return cls(patch_embed=patch_embed, blocks=blocks, patch_size=p)


@dataclass(frozen=True)
class HeadParams:
    """Linear map from the peak search token to log-scale size offsets (dw, dh)."""

    size: LinearParams

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator, scale: float = 0.1) -> "HeadParams":
        return cls(size=LinearParams.random(2, dim, rng, scale))

    @classmethod
    def zeros(cls, dim: int) -> "HeadParams":
        return cls(size=LinearParams.zeros(2, dim))


def patchify(image: Tensor, patch_size: int) -> Tensor:
    """
    Split a (C, S, S) image into non-overlapping patches.

    Returns:
        (g*g, C*p*p) matrix, patches in row-major grid order, each patch
        flattened (C, p, p) row-major

    Raises:
        ArgumentError: If the spatial extent is not divisible by the patch size
    """
    if image.ndim != 3:
        raise ArgumentError("image must be (C, H, W)", received=image.shape)
    channels, height, width = image.shape
    p = patch_size
    if p < 1 or height % p or width % p:
        raise ArgumentError(
            "image size must be divisible by the patch size",
            argument="patch_size",
            expected=p,
            received=(height, width),
        )
    gh, gw = height // p, width // p
    patches = image.reshape(channels, gh, p, gw, p).transpose(1, 3, 0, 2, 4)
    return np.ascontiguousarray(patches.reshape(gh * gw, channels * p * p))


def embed(image: Tensor, params: EncoderParams) -> Tensor:
    """Patchify and project one modality to (N, H) tokens."""
    return nk.linear(patchify(image, params.patch_size), params.patch_embed)


def self_attention(tokens: Tensor, block: BlockParams) -> Tensor:
    """Multi-head self-attention followed by the output projection."""
    q = nk.linear(tokens, block.query)
    k = nk.linear(tokens, block.key)
    v = nk.linear(tokens, block.value)
    width = block.dim // block.heads
    outputs = []
    for head in range(block.heads):
        cols = slice(head * width, (head + 1) * width)
        values, _ = nk.scaled_dot_product_attention(q[:, cols], k[:, cols], v[:, cols])
        outputs.append(values)
    return nk.linear(np.hstack(outputs), block.proj)


def encoder_block(tokens: Tensor, block: BlockParams) -> Tensor:
    """Pre-norm transformer block: h + attn(LN h), then h + MLP(LN h)."""
    hidden = tokens + self_attention(nk.layer_norm(tokens), block)
    mlp = nk.linear(nk.gelu(nk.linear(nk.layer_norm(hidden), block.mlp_in)), block.mlp_out)
    return hidden + mlp


def score_map(sequence: TokenSequence) -> Tensor:
    """Search-token scores: dot product with the mean template token over sqrt(H)."""
    templates = [sequence.region_tokens(r) for r in sequence.regions if r.name == TEMPLATE]
    if not templates:
        raise ArgumentError("sequence has no template region")
    reference = np.vstack(templates).mean(axis=0)
    return sequence.search @ reference / np.sqrt(sequence.dim)


def head(
    sequence: TokenSequence,
    params: HeadParams,
    patch_size: int,
    base_size: Tuple[float, float],
) -> Tuple[BoundingBox, Tensor]:
    """
    Box prediction stub.

    The centre is the centre of the highest-scoring search patch; the size is
    the initial target size scaled by exp(clip(FC(token), -1, 1)).

    Args:
        sequence: Final-layer token sequence
        params: Size-regression weights
        patch_size: Patch side in pixels
        base_size: (w, h) of the initial target box

    Returns:
        Tuple of (predicted box, search score vector)
    """
    scores = score_map(sequence)
    side = grid_side(scores.shape[0])
    peak = int(np.argmax(scores))
    row, col = divmod(peak, side)
    offsets = np.clip(nk.linear(sequence.search[peak], params.size), -1.0, 1.0)
    w = base_size[0] * float(np.exp(offsets[0]))
    h = base_size[1] * float(np.exp(offsets[1]))
    box = BoundingBox.from_center((col + 0.5) * patch_size, (row + 0.5) * patch_size, w, h)
    return box, scores
