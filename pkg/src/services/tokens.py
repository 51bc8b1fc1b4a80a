"""Token sequences with labelled regions, and token <-> feature-map reshaping."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.core.exceptions import ArgumentError
from src.kernels.numkernel import Tensor

SEARCH = "search"
TEMPLATE = "template"
CUE = "cue"


@dataclass(frozen=True)
class Region:
    """Contiguous block of rows [start, stop) of a token matrix."""

    name: str
    start: int
    stop: int

    @property
    def size(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class TokenSequence:
    """
    Token matrix (N_tok, H) partitioned into regions.

    Regions are a search region, one or more template regions and exactly
    one cue slot, in that order.
    """

    tokens: Tensor
    regions: Tuple[Region, ...]

    def __post_init__(self) -> None:
        if self.tokens.ndim != 2:
            raise ArgumentError("tokens must be a (N, H) matrix")
        position = 0
        for region in self.regions:
            if region.start != position or region.stop < region.start:
                raise ArgumentError("regions must tile the token matrix in order")
            position = region.stop
        if position != self.tokens.shape[0]:
            raise ArgumentError("regions do not cover every token", received=position)
        cue_slots = [r for r in self.regions if r.name == CUE]
        if len(cue_slots) != 1 or cue_slots[0].size != 1:
            raise ArgumentError("a token sequence carries exactly one cue slot")

    @classmethod
    def assemble(cls, search: Tensor, templates: List[Tensor], cue: Tensor) -> "TokenSequence":
        """Concatenate [search, template_0, ..., cue] and label the regions."""
        blocks = [(SEARCH, search)] + [(TEMPLATE, t) for t in templates] + [(CUE, cue[None, :])]
        regions = []
        start = 0
        for name, block in blocks:
            regions.append(Region(name, start, start + block.shape[0]))
            start += block.shape[0]
        return cls(tokens=np.vstack([b for _, b in blocks]), regions=tuple(regions))

    @property
    def dim(self) -> int:
        return int(self.tokens.shape[1])

    @property
    def cue_region(self) -> Region:
        return next(r for r in self.regions if r.name == CUE)

    @property
    def cue(self) -> Tensor:
        return self.tokens[self.cue_region.start]

    @property
    def visual_regions(self) -> Tuple[Region, ...]:
        """Search and template regions, in order."""
        return tuple(r for r in self.regions if r.name != CUE)

    @property
    def search(self) -> Tensor:
        return self.region_tokens(self.regions[0])

    def region_tokens(self, region: Region) -> Tensor:
        return self.tokens[region.start : region.stop]

    def with_tokens(self, tokens: Tensor) -> "TokenSequence":
        return TokenSequence(tokens=tokens, regions=self.regions)

    def with_cue(self, cue: Tensor) -> "TokenSequence":
        tokens = self.tokens.copy()
        tokens[self.cue_region.start] = cue
        return self.with_tokens(tokens)


def grid_side(count: int) -> int:
    """Side of the square grid holding ``count`` tokens."""
    side = math.isqrt(count)
    if side * side != count:
        raise ArgumentError("token count is not a perfect square", received=count)
    return side


def tokens_to_map(tokens: Tensor) -> Tensor:
    """Reshape (g*g, H) row-major tokens to a (H, g, g) feature map."""
    side = grid_side(tokens.shape[0])
    return np.ascontiguousarray(tokens.T.reshape(tokens.shape[1], side, side))


def map_to_tokens(feature_map: Tensor) -> Tensor:
    """Flatten a (H, g, g) feature map back to (g*g, H) tokens."""
    channels = feature_map.shape[0]
    return np.ascontiguousarray(feature_map.reshape(channels, -1).T)
