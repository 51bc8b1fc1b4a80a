"""Run configuration schemas (one model per module section)."""

from enum import Enum
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.schemas.validators import (
    TIER_NAMES,
    validate_divisor,
    validate_perfect_square,
    validate_tiers,
    validate_windows,
)

CONFIG_VERSION = 1


class PathKind(str, Enum):
    """Parametric target motion."""

    LINEAR = "linear"
    SINUSOIDAL = "sinusoidal"


class OcclusionWindow(BaseModel):
    """Frames [start, stop) during which the target is hidden."""

    model_config = ConfigDict(frozen=True)

    start: int = Field(..., ge=0)
    stop: int = Field(..., ge=1)


class SceneConfig(BaseModel):
    """Synthetic dual-modality scene."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    image_size: int = Field(default=64, ge=4, description="Square frame side in pixels")
    channels: int = Field(default=2, ge=1, description="Channels per modality")
    n_frames: int = Field(default=64, ge=1)
    target_size: Tuple[float, float] = Field(default=(12.0, 12.0), description="(w, h)")
    path: PathKind = PathKind.LINEAR
    start: Tuple[float, float] = Field(default=(8.0, 26.0), description="Top-left at frame 0")
    velocity: Tuple[float, float] = Field(default=(0.5, 0.0), description="Pixels per frame")
    amplitude: float = Field(default=0.0, ge=0.0, description="Sinusoid amplitude (y) in pixels")
    period: float = Field(default=32.0, gt=0.0, description="Sinusoid period in frames")
    occlusions: List[OcclusionWindow] = Field(default_factory=list)
    noise_rgb: float = Field(default=0.05, ge=0.0)
    noise_aux: float = Field(default=0.05, ge=0.0)
    texture_cell: int = Field(default=2, ge=1, description="Checker cell of the RGB texture")
    seed: int = 0

    @field_validator("target_size")
    @classmethod
    def validate_target_size(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        """Target must have a positive area."""
        if v[0] <= 0 or v[1] <= 0:
            raise ValueError("target_size must be positive")
        return v

    @model_validator(mode="after")
    def validate_occlusions(self) -> "SceneConfig":
        validate_windows([(w.start, w.stop) for w in self.occlusions], self.n_frames)
        return self

    def is_occluded(self, frame: int) -> bool:
        return any(w.start <= frame < w.stop for w in self.occlusions)


class EncoderConfig(BaseModel):
    """Surrogate encoder size."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    layers: int = Field(default=4, ge=1)
    hidden: int = Field(default=64, ge=1, description="Token dimension H")
    heads: int = Field(default=1, ge=1)
    patch_size: int = Field(default=8, ge=1)
    template_size: int = Field(default=32, ge=1, description="Square template crop side")
    max_templates: int = Field(default=1, ge=1)
    mlp_ratio: int = Field(default=2, ge=1)
    init_scale: float = Field(default=0.5, gt=0.0)


class AdapterConfig(BaseModel):
    """Visual adapter settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    fusion: Literal["adapter", "add", "none"] = "adapter"
    spatial: bool = True
    channel: bool = True
    frequency: bool = True
    kernel_size: int = Field(default=3, ge=1)
    pool_window: int = Field(default=2, ge=1)
    init_scale: float = Field(default=0.1, ge=0.0)
    param_source: Literal["random", "file"] = "random"
    param_path: Optional[str] = None

    @field_validator("kernel_size")
    @classmethod
    def validate_kernel_size(cls, v: int) -> int:
        """'Same' convolutions need an odd kernel."""
        if v % 2 == 0:
            raise ValueError("kernel_size must be odd")
        return v

    @model_validator(mode="after")
    def validate_param_source(self) -> "AdapterConfig":
        if self.param_source == "file" and not self.param_path:
            raise ValueError("param_path is required when param_source is 'file'")
        return self


class MemoryConfig(BaseModel):
    """Memory adapter settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    enabled: bool = True
    capacities: Tuple[int, int, int] = Field(
        default=(8, 8, 3), description="Short, long and permanent capacities"
    )
    filter_ratio: int = Field(default=4, ge=1)
    long_stride: int = Field(default=1, ge=1, description="Refresh long tier every N frames")
    permanent_stride: int = Field(default=1, ge=1)
    renormalize: bool = False
    readout: Literal["similarity", "mean"] = "similarity"
    tiers: Tuple[str, ...] = TIER_NAMES
    filter_init_scale: float = Field(default=1.0, ge=0.0)

    @field_validator("capacities")
    @classmethod
    def validate_capacities(cls, v: Tuple[int, int, int]) -> Tuple[int, int, int]:
        """Every tier holds at least one token."""
        if min(v) < 1:
            raise ValueError("Memory capacities must be positive")
        return v

    @field_validator("tiers", mode="before")
    @classmethod
    def normalize_tiers(cls, v: object) -> Tuple[str, ...]:
        """Accept a single name or a sequence; store in canonical order."""
        if isinstance(v, str):
            v = [v]
        return validate_tiers(list(v))  # type: ignore[arg-type]


class LossConfig(BaseModel):
    """Focal and regression loss coefficients."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(default=0.25, gt=0.0, le=1.0)
    gamma: float = Field(default=2.0, ge=0.0)
    lambda1: float = Field(default=5.0, gt=0.0, description="L1 weight")
    lambda2: float = Field(default=2.0, gt=0.0, description="GIoU weight")


class RunConfig(BaseModel):
    """Complete configuration of a tracking run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    version: int = CONFIG_VERSION
    seed: int = 0
    output_dir: str = "runs/default"
    sequences: int = Field(default=1, ge=1, description="Scene replicas (seed offset per replica)")
    checkpoints: List[int] = Field(
        default_factory=list, description="Frames that get a memory snapshot (default: last)"
    )
    scene_source: Optional[str] = Field(
        default=None, description="Sequence directory to load instead of generating"
    )
    scene: SceneConfig = Field(default_factory=SceneConfig)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    adapter: AdapterConfig = Field(default_factory=AdapterConfig)
    memory: MemoryConfig = Field(default_factory=MemoryConfig)
    loss: LossConfig = Field(default_factory=LossConfig)

    @field_validator("version")
    @classmethod
    def validate_version(cls, v: int) -> int:
        """Only the current document version is understood."""
        if v != CONFIG_VERSION:
            raise ValueError(f"Unsupported config version {v}; expected {CONFIG_VERSION}")
        return v

    @model_validator(mode="after")
    def validate_cross_section(self) -> "RunConfig":
        enc = self.encoder
        validate_divisor(enc.hidden, self.memory.filter_ratio, "memory.filter_ratio")
        validate_divisor(enc.hidden, enc.heads, "encoder.heads")
        validate_divisor(self.scene.image_size, enc.patch_size, "encoder.patch_size (scene)")
        validate_divisor(enc.template_size, enc.patch_size, "encoder.patch_size (template)")
        validate_perfect_square((self.scene.image_size // enc.patch_size) ** 2, "search region")
        validate_perfect_square((enc.template_size // enc.patch_size) ** 2, "template region")
        if enc.template_size > self.scene.image_size:
            raise ValueError("encoder.template_size may not exceed scene.image_size")
        for frame in self.checkpoints:
            if not 0 <= frame < self.scene.n_frames:
                raise ValueError(f"Checkpoint frame {frame} outside the sequence")
        return self

    @property
    def snapshot_frames(self) -> List[int]:
        return sorted(set(self.checkpoints)) or [self.scene.n_frames - 1]
