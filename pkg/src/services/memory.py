"""
Memory adapter: tiered cue-token storage with attention update and similarity read-out.

The pool holds three banks. The short tier is a FIFO of recent cue tokens;
the long and permanent tiers are refined in place by scaled dot-product
attention over the tier below them. Retrieval reads every enabled tier with
the latest cue as query and sums the reads. The memory filter is the
bottleneck map applied to the cue slot after each encoder block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.core.exceptions import ArgumentError, StateError
from src.core.logging_config import get_logger
from src.kernels import numkernel as nk
from src.kernels.numkernel import LinearParams, Tensor
from src.schemas.run_config import MemoryConfig

logger = get_logger(__name__)

SHORT = "short"
LONG = "long"
PERMANENT = "permanent"


@dataclass(frozen=True)
class FilterParams:
    """Down projection H -> H/r and up projection H/r -> H."""

    down: LinearParams
    up: LinearParams

    def __post_init__(self) -> None:
        if self.down.out_features != self.up.in_features:
            raise ArgumentError(
                "filter bottleneck widths disagree",
                expected=self.down.out_features,
                received=self.up.in_features,
            )
        if self.up.out_features != self.down.in_features:
            raise ArgumentError("filter must map H -> H", expected=self.down.in_features)
        if self.dim % self.bottleneck != 0:
            raise ArgumentError("bottleneck width must divide H", received=self.bottleneck)

    @property
    def dim(self) -> int:
        return self.down.in_features

    @property
    def bottleneck(self) -> int:
        return self.down.out_features

    @property
    def ratio(self) -> int:
        return self.dim // self.bottleneck

    @classmethod
    def random(
        cls, dim: int, ratio: int, rng: np.random.Generator, scale: float = 1.0
    ) -> "FilterParams":
        width = _bottleneck_width(dim, ratio)
        return cls(
            down=LinearParams.random(width, dim, rng, scale),
            up=LinearParams.random(dim, width, rng, scale),
        )

    @classmethod
    def zeros(cls, dim: int, ratio: int) -> "FilterParams":
        width = _bottleneck_width(dim, ratio)
        return cls(down=LinearParams.zeros(width, dim), up=LinearParams.zeros(dim, width))

    @classmethod
    def identity(cls, dim: int) -> "FilterParams":
        """r = 1 with identity projections, so the filter reduces to GELU."""
        return cls(down=LinearParams.identity(dim), up=LinearParams.identity(dim))


def _bottleneck_width(dim: int, ratio: int) -> int:
    if ratio < 1 or dim % ratio != 0:
        raise ArgumentError("filter ratio must divide H", argument="ratio", received=ratio)
    return dim // ratio


def filter_cue(cue: Tensor, params: FilterParams) -> Tensor:
    """
    Memory filter up(gelu(down(c))).

    Raises:
        ArgumentError: If the cue dimension differs from the filter's H
    """
    if cue.shape != (params.dim,):
        raise ArgumentError("cue dimension mismatch", expected=params.dim, received=cue.shape)
    return nk.linear(nk.gelu(nk.linear(cue, params.down)), params.up)


class MemoryBank:
    """Capacity-bounded, ordered (oldest first) store of cue tokens."""

    def __init__(self, name: str, capacity: int, dim: int):
        if capacity < 1:
            raise ArgumentError("bank capacity must be positive", argument=name)
        self.name = name
        self.capacity = capacity
        self.dim = dim
        self._tokens: List[Tensor] = []

    def __len__(self) -> int:
        return len(self._tokens)

    @property
    def tokens(self) -> Tensor:
        """Stored tokens stacked into an (N, H) matrix."""
        if not self._tokens:
            return np.zeros((0, self.dim))
        return np.vstack(self._tokens)

    def append(self, token: Tensor) -> None:
        """FIFO append; the oldest token is evicted once capacity is exceeded."""
        self._check(token)
        self._tokens.append(np.array(token, dtype=np.float64))
        if len(self._tokens) > self.capacity:
            self._tokens.pop(0)

    def replace(self, tokens: Tensor) -> None:
        """Overwrite every stored token (row count must fit the capacity)."""
        if tokens.ndim != 2 or tokens.shape[1] != self.dim:
            raise ArgumentError(
                "bank tokens must be (N, H)", expected=self.dim, received=tokens.shape
            )
        if tokens.shape[0] > self.capacity:
            raise ArgumentError(
                f"{self.name} bank holds at most {self.capacity} tokens", received=tokens.shape[0]
            )
        self._tokens = [np.array(row, dtype=np.float64) for row in tokens]

    def copy(self) -> "MemoryBank":
        bank = MemoryBank(self.name, self.capacity, self.dim)
        bank._tokens = [token.copy() for token in self._tokens]
        return bank

    def _check(self, token: Tensor) -> None:
        if token.shape != (self.dim,):
            raise ArgumentError(
                f"token dimension mismatch for {self.name} bank",
                expected=self.dim,
                received=token.shape,
            )


def attn_update(target: MemoryBank, source: MemoryBank) -> Tensor:
    """
    Refine every target token with attention over the source bank.

    Q = target tokens, K = V = source tokens; each target token gains the
    matching row of softmax(Q K^T / sqrt(H)) V.

    Returns:
        The attention weights (n_target, n_source)

    Raises:
        StateError: If either bank is empty
        ArgumentError: If the banks disagree on H
    """
    if len(source) == 0:
        raise StateError(f"cannot update from the empty {source.name} bank", state="empty")
    if len(target) == 0:
        raise StateError(f"{target.name} bank is empty", state="empty")
    if target.dim != source.dim:
        raise ArgumentError("bank dimensions differ", expected=target.dim, received=source.dim)

    memory = source.tokens
    queries = target.tokens
    delta, weights = nk.scaled_dot_product_attention(queries, memory, memory, scale=True)
    target.replace(queries + delta)
    return weights


def read_bank(
    bank: MemoryBank, query: Tensor, readout: str = "similarity"
) -> Tuple[Tensor, Tensor]:
    """
    Read one tier: W = softmax(q M^T) (or uniform weights), C = W M.

    Returns:
        Tuple of (read token (H,), weights (N,))

    Raises:
        StateError: If the bank holds no tokens
    """
    if len(bank) == 0:
        raise StateError(f"cannot read the empty {bank.name} bank", state="empty")
    memory = bank.tokens
    if readout == "mean":
        weights = np.full(memory.shape[0], 1.0 / memory.shape[0])
    else:
        weights = nk.softmax(memory @ query)
    return weights @ memory, weights


@dataclass(frozen=True)
class MemorySnapshot:
    """Tier contents at one point of a session."""

    dim: int
    short: Tensor
    long: Tensor
    permanent: Tensor

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return (self.short.shape[0], self.long.shape[0], self.permanent.shape[0])

    def tier(self, name: str) -> Tensor:
        return {SHORT: self.short, LONG: self.long, PERMANENT: self.permanent}[name]


class MemoryPool:
    """
    Three-tier memory of one tracking session.

    The short tier is always maintained because it receives every new cue.
    ``config.tiers`` selects which tiers are read on retrieval and which of
    the long and permanent tiers are refreshed on update.
    """

    def __init__(
        self,
        dim: int,
        filter_params: FilterParams,
        config: Optional[MemoryConfig] = None,
    ):
        """
        Initialize an empty pool.

        Args:
            dim: Cue-token dimension H
            filter_params: Memory filter weights
            config: Capacities, strides, readout and tier selection

        Raises:
            ArgumentError: If the filter does not act on H-dimensional cues
        """
        self.config = config or MemoryConfig()
        if filter_params.dim != dim:
            raise ArgumentError(
                "filter dimension must equal H", expected=dim, received=filter_params.dim
            )
        self.dim = dim
        self.filter_params = filter_params
        short_cap, long_cap, permanent_cap = self.config.capacities
        self.short = MemoryBank(SHORT, short_cap, dim)
        self.long = MemoryBank(LONG, long_cap, dim)
        self.permanent = MemoryBank(PERMANENT, permanent_cap, dim)
        self._updates = 0
        self._norm_total = 0.0
        self._norm_count = 0

    @property
    def banks(self) -> Dict[str, MemoryBank]:
        return {SHORT: self.short, LONG: self.long, PERMANENT: self.permanent}

    @property
    def initialized(self) -> bool:
        return len(self.short) > 0

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return (len(self.short), len(self.long), len(self.permanent))

    @property
    def updates(self) -> int:
        """Number of update() calls since init or restore."""
        return self._updates

    def init(self, c0: Tensor) -> None:
        """
        Store the initial cue once in every tier.

        Raises:
            StateError: If the pool already holds tokens
        """
        if self.initialized:
            raise StateError("memory pool is already initialized", state="initialized")
        for name, bank in self.banks.items():
            if name == SHORT or name in self.config.tiers:
                bank.append(c0)
        self._track_norm(c0)
        logger.debug("Memory pool initialized", extra={"dim": self.dim, "sizes": self.sizes})

    def push_short(self, cue: Tensor) -> None:
        """
        FIFO append to the short tier.

        Raises:
            StateError: If the pool was never initialized
            ArgumentError: On a dimension mismatch
        """
        self._require_initialized()
        self.short.append(cue)
        self._track_norm(cue)

    def update(self, c_prev: Tensor) -> None:
        """
        Per-frame update: push the cue, then refresh long from short and
        permanent from long at their configured strides.
        """
        self.push_short(c_prev)
        self._updates += 1
        tiers = self.config.tiers
        # Permanent reads the long tier as it stood before this frame's refresh.
        permanent_source = self.long.copy() if LONG in tiers else self.short

        if LONG in tiers and self._updates % self.config.long_stride == 0:
            attn_update(self.long, self.short)
            self._renormalize(self.long)

        if PERMANENT in tiers and self._updates % self.config.permanent_stride == 0:
            attn_update(self.permanent, permanent_source)
            self._renormalize(self.permanent)

    def retrieve(self, query: Tensor) -> Tensor:
        """Sum of the per-tier reads with ``query`` as the attention query."""
        cue, _ = self.retrieve_with_weights(query)
        return cue

    def retrieve_with_weights(self, query: Tensor) -> Tuple[Tensor, Dict[str, Tensor]]:
        """
        Retrieve the combined cue and the per-tier read-out weights.

        Raises:
            StateError: If the pool was never initialized
            ArgumentError: If the query dimension differs from H
        """
        self._require_initialized()
        if query.shape != (self.dim,):
            raise ArgumentError("query dimension mismatch", expected=self.dim, received=query.shape)

        combined = np.zeros(self.dim)
        weights: Dict[str, Tensor] = {}
        for name in self.config.tiers:
            read, weights[name] = read_bank(self.banks[name], query, self.config.readout)
            combined = combined + read
        return combined, weights

    def filter(self, cue: Tensor) -> Tensor:
        return filter_cue(cue, self.filter_params)

    def snapshot(self) -> MemorySnapshot:
        return MemorySnapshot(
            dim=self.dim,
            short=self.short.tokens,
            long=self.long.tokens,
            permanent=self.permanent.tokens,
        )

    def restore(self, snapshot: MemorySnapshot) -> None:
        """
        Replace the tier contents with a snapshot.

        Raises:
            ArgumentError: If H or a tier size does not fit this pool
            StateError: If the short tier or an enabled tier would be left empty
        """
        if snapshot.dim != self.dim:
            raise ArgumentError(
                "snapshot dimension mismatch", expected=self.dim, received=snapshot.dim
            )
        for name in (SHORT, *self.config.tiers):
            if snapshot.tier(name).shape[0] == 0:
                raise StateError(f"snapshot leaves the {name} tier empty", state="empty")
        for name, bank in self.banks.items():
            bank.replace(snapshot.tier(name))
        self._updates = 0
        self._norm_total = 0.0
        self._norm_count = 0
        for token in self.short.tokens:
            self._track_norm(token)

    def _require_initialized(self) -> None:
        if not self.initialized:
            raise StateError("memory pool used before init", state="uninitialized")

    def _track_norm(self, cue: Tensor) -> None:
        self._norm_total += float(np.linalg.norm(cue))
        self._norm_count += 1

    def _renormalize(self, bank: MemoryBank) -> None:
        # Rescale refined tokens to the running mean norm of the pushed cues.
        if not self.config.renormalize or self._norm_count == 0:
            return
        target_norm = self._norm_total / self._norm_count
        tokens = bank.tokens
        norms = np.linalg.norm(tokens, axis=1, keepdims=True)
        scale = np.divide(target_norm, norms, out=np.ones_like(norms), where=norms > 0)
        bank.replace(tokens * scale)
