"""
Tracking session: frame-by-frame orchestration of encoder, adapters and memory.

Per frame the session
  1. retrieves a cue from the memory pool with the previous cue as query
     and passes it through the memory filter,
  2. embeds both modalities and fuses them with FMFM at the input,
  3. runs every encoder block followed by MFM prompt injection and the
     memory filter on the cue slot,
  4. predicts a box with the head stub,
  5. pushes the output cue into the memory pool.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.core.exceptions import ArgumentError, StateError
from src.core.logging_config import get_logger
from src.kernels import numkernel as nk
from src.kernels.numkernel import Tensor
from src.schemas.boxes import BoundingBox
from src.schemas.run_config import RunConfig
from src.services import encoder as enc
from src.services import losses
from src.services.encoder import EncoderParams, HeadParams
from src.services.frames import Frame, Template, crop_template
from src.services.fusion import FmfmParams, FusionBranches, MfmParams, fmfm, inject, mfm
from src.services.memory import FilterParams, MemoryPool, filter_cue
from src.services.tokens import TokenSequence, map_to_tokens, tokens_to_map

logger = get_logger(__name__)


@dataclass(frozen=True)
class AdapterParams:
    """Visual adapter (FMFM + one MFM per block) and memory filter weights."""

    fmfm: FmfmParams
    mfm_layers: Tuple[MfmParams, ...]
    filter: FilterParams

    @classmethod
    def random(cls, config: RunConfig, rng: np.random.Generator) -> "AdapterParams":
        hidden = config.encoder.hidden
        adapter = config.adapter
        return cls(
            fmfm=FmfmParams.random(
                hidden, rng, adapter.kernel_size, adapter.pool_window, adapter.init_scale
            ),
            mfm_layers=tuple(
                MfmParams.random(hidden, rng, adapter.kernel_size, adapter.init_scale)
                for _ in range(config.encoder.layers)
            ),
            filter=FilterParams.random(
                hidden, config.memory.filter_ratio, rng, config.memory.filter_init_scale
            ),
        )

    @classmethod
    def zeros(cls, config: RunConfig) -> "AdapterParams":
        hidden = config.encoder.hidden
        adapter = config.adapter
        return cls(
            fmfm=FmfmParams.zeros(hidden, adapter.kernel_size, adapter.pool_window),
            mfm_layers=tuple(
                MfmParams.zeros(hidden, adapter.kernel_size) for _ in range(config.encoder.layers)
            ),
            filter=FilterParams.zeros(hidden, config.memory.filter_ratio),
        )


@dataclass(frozen=True)
class TrackerParams:
    """Every weight a session needs."""

    encoder: EncoderParams
    head: HeadParams
    adapter: AdapterParams

    def __post_init__(self) -> None:
        if len(self.adapter.mfm_layers) != self.encoder.layers:
            raise ArgumentError(
                "one MFM per encoder block",
                expected=self.encoder.layers,
                received=len(self.adapter.mfm_layers),
            )
        if self.adapter.filter.dim != self.encoder.dim:
            raise ArgumentError("memory filter must act on H", expected=self.encoder.dim)

    @classmethod
    def initialize(cls, config: RunConfig, seed: Optional[int] = None) -> "TrackerParams":
        """
        Draw all weights from the run seed.

        Encoder, head and adapters use independent child streams, so the
        frozen encoder is the same whatever the adapter configuration.
        """
        seed = config.seed if seed is None else seed
        encoder_rng, head_rng, adapter_rng = (
            np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(3)
        )
        return cls(
            encoder=EncoderParams.random(config.encoder, config.scene.channels, encoder_rng),
            head=HeadParams.random(config.encoder.hidden, head_rng),
            adapter=AdapterParams.random(config, adapter_rng),
        )

    def with_adapter(self, adapter: AdapterParams) -> "TrackerParams":
        return TrackerParams(encoder=self.encoder, head=self.head, adapter=adapter)


@dataclass
class TemplateTokens:
    """Embedded template of both modalities."""

    template: Template
    rgb: Tensor
    aux: Tensor


@dataclass
class FrameResult:
    """Outcome of one tracked frame."""

    index: int
    box: BoundingBox
    scores: Tensor
    cue: Tensor
    memory_sizes: Tuple[int, int, int]
    focal: Optional[float] = None
    regression: Optional[float] = None
    clamped: bool = False


@dataclass
class SessionStats:
    """Running sums of the per-frame training signals."""

    focal_sum: float = 0.0
    regression_sum: float = 0.0
    loss_frames: int = 0
    clamped_frames: int = 0
    results: List[FrameResult] = field(default_factory=list)

    @property
    def mean_focal(self) -> Optional[float]:
        return self.focal_sum / self.loss_frames if self.loss_frames else None

    @property
    def mean_regression(self) -> Optional[float]:
        return self.regression_sum / self.loss_frames if self.loss_frames else None


class TrackerSession:
    """
    One tracking session: single writer, owns its memory pool.

    Fusion modes:
        adapter: FMFM at the input, MFM after every block, memory cue
        add: auxiliary tokens added to RGB tokens at the input, no adapters
        none: RGB-only surrogate encoder
    In ``add`` and ``none`` mode the cue slot holds a null cue that is reset
    after every block, which is what a zero memory filter produces.
    """

    def __init__(self, params: TrackerParams, config: RunConfig, sequence_name: str = ""):
        self.params = params
        self.config = config
        self.sequence_name = sequence_name
        self.branches = FusionBranches(
            spatial=config.adapter.spatial,
            channel=config.adapter.channel,
            frequency=config.adapter.frequency,
        )
        self.pool = MemoryPool(params.encoder.dim, params.adapter.filter, config.memory)
        self.templates: List[TemplateTokens] = []
        self.stats = SessionStats()
        self._prev_cue: Optional[Tensor] = None
        self._base_size: Tuple[float, float] = (0.0, 0.0)

    @property
    def initialized(self) -> bool:
        return self._prev_cue is not None

    @property
    def uses_adapters(self) -> bool:
        return self.config.adapter.fusion == "adapter"

    @property
    def uses_memory_pool(self) -> bool:
        return self.uses_adapters and self.config.memory.enabled

    # ------------------------------------------------------------------
    # Lifecycle
    # ------------------------------------------------------------------

    def initialize(self, frame: Frame, box: BoundingBox) -> None:
        """
        Build the initial template and seed the memory with the initial cue.

        The initial cue is the mean of the template's embedded RGB tokens.

        Raises:
            StateError: If the session was already initialized
            ArgumentError: If the box has zero area
        """
        if self.initialized:
            raise StateError("tracker session is already initialized", state="initialized")
        if box.w <= 0 or box.h <= 0:
            raise ArgumentError("initial box must have a positive area", argument="box")

        first = self._embed_template(crop_template(frame, box, self.config.encoder.template_size))
        self.templates = [first]
        self._base_size = (box.w, box.h)
        c0 = first.rgb.mean(axis=0)
        if self.uses_memory_pool:
            self.pool.init(c0)
        self._prev_cue = c0
        logger.info(
            "Tracker session initialized",
            extra={
                "sequence": self.sequence_name,
                "frame": frame.index,
                "fusion": self.config.adapter.fusion,
                "memory": self.uses_memory_pool,
            },
        )

    def add_template(self, frame: Frame, box: BoundingBox) -> None:
        """
        Append a template; beyond max_templates the oldest non-initial one is dropped.

        Raises:
            StateError: If the session is not initialized
        """
        self._require_initialized()
        template = self._embed_template(
            crop_template(frame, box, self.config.encoder.template_size)
        )
        self.templates.append(template)
        if len(self.templates) > self.config.encoder.max_templates:
            # The initial template is never dropped.
            del self.templates[1]
        logger.debug(
            "Template added",
            extra={
                "sequence": self.sequence_name,
                "frame": frame.index,
                "count": len(self.templates),
            },
        )

    # ------------------------------------------------------------------
    # Tracking
    # ------------------------------------------------------------------

    def track_frame(self, frame: Frame, groundtruth: Optional[BoundingBox] = None) -> BoundingBox:
        """
        Track one frame.

        Args:
            frame: Next frame of the sequence
            groundtruth: Optional target box; when present the frame's focal
                and regression losses are recorded

        Returns:
            Predicted box

        Raises:
            StateError: If the session was not initialized
        """
        self._require_initialized()
        assert self._prev_cue is not None
        dim = self.params.encoder.dim

        # Step 1: Cue for this frame
        if self.uses_memory_pool:
            cue = self.pool.filter(self.pool.retrieve(self._prev_cue))
        elif self.uses_adapters:
            cue = filter_cue(self._prev_cue, self.params.adapter.filter)
        else:
            cue = np.zeros(dim)

        # Step 2: Embed and fuse at the input
        rgb_regions = [enc.embed(frame.rgb, self.params.encoder)] + [t.rgb for t in self.templates]
        aux_regions = [enc.embed(frame.aux, self.params.encoder)] + [t.aux for t in self.templates]
        aux_maps: List[Tensor] = []
        visual = []
        for rgb_tokens, aux_tokens in zip(rgb_regions, aux_regions):
            if self.uses_adapters:
                prompt = fmfm(
                    tokens_to_map(rgb_tokens),
                    tokens_to_map(aux_tokens),
                    self.params.adapter.fmfm,
                    self.branches,
                )
                aux_maps.append(prompt)
                visual.append(rgb_tokens + map_to_tokens(prompt))
            elif self.config.adapter.fusion == "add":
                visual.append(rgb_tokens + aux_tokens)
            else:
                visual.append(rgb_tokens)
        sequence = TokenSequence.assemble(visual[0], visual[1:], cue)

        # Step 3: Encoder blocks with adapters
        for layer, block in enumerate(self.params.encoder.blocks):
            sequence = sequence.with_tokens(enc.encoder_block(sequence.tokens, block))
            if self.uses_adapters:
                prompts = [
                    mfm(
                        tokens_to_map(sequence.region_tokens(region)),
                        aux_map,
                        self.params.adapter.mfm_layers[layer],
                        self.branches,
                    )
                    for region, aux_map in zip(sequence.visual_regions, aux_maps)
                ]
                sequence = inject(prompts, sequence)
                aux_maps = prompts
                sequence = sequence.with_cue(filter_cue(sequence.cue, self.params.adapter.filter))
            else:
                sequence = sequence.with_cue(np.zeros(dim))

        # Step 4: Head
        box, scores = enc.head(
            sequence, self.params.head, self.params.encoder.patch_size, self._base_size
        )

        # Step 5: Memory update with the output cue
        output_cue = sequence.cue.copy()
        if self.uses_memory_pool:
            self.pool.update(output_cue)
        self._prev_cue = output_cue

        result = FrameResult(
            index=frame.index,
            box=box,
            scores=scores,
            cue=output_cue,
            memory_sizes=self.pool.sizes,
        )
        if groundtruth is not None:
            self._record_losses(result, groundtruth)
        self.stats.results.append(result)
        logger.debug(
            "Frame tracked",
            extra={
                "sequence": self.sequence_name,
                "frame": frame.index,
                "box": [box.x, box.y, box.w, box.h],
                "memory_sizes": list(self.pool.sizes),
            },
        )
        return box

    def _record_losses(self, result: FrameResult, groundtruth: BoundingBox) -> None:
        if groundtruth.w <= 0 or groundtruth.h <= 0:
            return
        side = int(np.sqrt(result.scores.shape[0]))
        patch = self.params.encoder.patch_size
        cx, cy = groundtruth.center
        row = min(max(int(cy // patch), 0), side - 1)
        col = min(max(int(cx // patch), 0), side - 1)
        labels = np.zeros(result.scores.shape[0], dtype=int)
        labels[row * side + col] = 1
        probabilities = nk.sigmoid(result.scores)

        result.focal, result.clamped = losses.focal_loss_with_flag(
            probabilities, labels, self.config.loss
        )
        result.regression = losses.regression_loss(groundtruth, result.box, self.config.loss)
        self.stats.focal_sum += result.focal
        self.stats.regression_sum += result.regression
        self.stats.loss_frames += 1
        self.stats.clamped_frames += int(result.clamped)

    def _embed_template(self, template: Template) -> TemplateTokens:
        return TemplateTokens(
            template=template,
            rgb=enc.embed(template.rgb, self.params.encoder),
            aux=enc.embed(template.aux, self.params.encoder),
        )

    def _require_initialized(self) -> None:
        if not self.initialized:
            raise StateError("tracker session used before initialize()", state="uninitialized")
