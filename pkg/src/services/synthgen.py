"""
Deterministic synthetic dual-modality sequences.

The RGB modality shows a checker-textured target over a fixed cluttered
background, so its target signal is dominated by high frequencies. The
auxiliary modality shows a smooth Gaussian blob on a dark background, a
low-frequency, high-contrast signal like a thermal or depth view.
"""

from typing import List, Optional, Tuple

import numpy as np

from src.core.exceptions import ArgumentError
from src.core.logging_config import get_logger
from src.kernels.numkernel import Tensor
from src.schemas.boxes import BoundingBox
from src.schemas.run_config import PathKind, SceneConfig
from src.services.frames import Frame, TrackingSequence

logger = get_logger(__name__)

BACKGROUND_LEVEL = 0.3
TEXTURE_LEVELS = (1.0, 0.4)


def target_position(config: SceneConfig, frame: int) -> Tuple[float, float]:
    """Top-left corner of the target at ``frame``."""
    x0, y0 = config.start
    vx, vy = config.velocity
    x = x0 + vx * frame
    y = y0 + vy * frame
    if config.path == PathKind.SINUSOIDAL:
        y += config.amplitude * np.sin(2.0 * np.pi * frame / config.period)
    return float(x), float(y)


def target_box(config: SceneConfig, frame: int) -> BoundingBox:
    x, y = target_position(config, frame)
    w, h = config.target_size
    return BoundingBox(x=x, y=y, w=w, h=h)


def validate_scene(config: SceneConfig) -> None:
    """
    Check that the target stays inside the image on every visible frame.

    Raises:
        ArgumentError: If the path leaves the image or the target is larger than it
    """
    size = config.image_size
    w, h = config.target_size
    if w > size or h > size:
        raise ArgumentError("target larger than the image", argument="target_size", expected=size)
    for t in range(config.n_frames):
        if config.is_occluded(t):
            continue
        x, y = target_position(config, t)
        if x < 0 or y < 0 or x + w > size or y + h > size:
            raise ArgumentError(
                f"target leaves the image at frame {t}",
                argument="path",
                received=(round(x, 3), round(y, 3)),
            )


def _pixel_grid(size: int) -> Tuple[Tensor, Tensor]:
    centres = np.arange(size) + 0.5
    return np.meshgrid(centres, centres, indexing="xy")


def _render_rgb(
    box: Optional[BoundingBox], background: Tensor, config: SceneConfig, xs: Tensor, ys: Tensor
) -> Tensor:
    image = background.copy()
    if box is None:
        return image
    inside = (xs >= box.x) & (xs < box.x + box.w) & (ys >= box.y) & (ys < box.y + box.h)
    cell = config.texture_cell
    checker = (np.floor((xs - box.x) / cell) + np.floor((ys - box.y) / cell)) % 2
    texture = np.where(checker == 0, TEXTURE_LEVELS[0], TEXTURE_LEVELS[1])
    for channel in range(config.channels):
        # Odd channels carry the inverted texture.
        values = texture if channel % 2 == 0 else 1.0 - texture
        image[channel] = np.where(inside, values, image[channel])
    return image


def _render_aux(box: Optional[BoundingBox], config: SceneConfig, xs: Tensor, ys: Tensor) -> Tensor:
    image = np.zeros((config.channels, config.image_size, config.image_size))
    if box is None:
        return image
    cx, cy = box.center
    sx, sy = box.w / 2.0, box.h / 2.0
    blob = np.exp(-((xs - cx) ** 2 / (2 * sx**2) + (ys - cy) ** 2 / (2 * sy**2)))
    for channel in range(config.channels):
        image[channel] = blob ** (channel + 1)
    return image


def generate(config: SceneConfig) -> TrackingSequence:
    """
    Generate a sequence from a scene configuration.

    All randomness comes from ``numpy.random.default_rng(config.seed)``.

    Args:
        config: Scene description

    Returns:
        TrackingSequence with one Frame and one ground-truth entry per frame;
        ground truth is None on occluded frames

    Raises:
        ArgumentError: If the target path leaves the image on a visible frame
    """
    validate_scene(config)
    rng = np.random.default_rng(config.seed)
    size, channels = config.image_size, config.channels
    background = rng.uniform(0.0, BACKGROUND_LEVEL, (channels, size, size))
    xs, ys = _pixel_grid(size)

    frames: List[Frame] = []
    groundtruth: List[Optional[BoundingBox]] = []
    for t in range(config.n_frames):
        box = None if config.is_occluded(t) else target_box(config, t)
        rgb = _render_rgb(box, background, config, xs, ys)
        aux = _render_aux(box, config, xs, ys)
        rgb = rgb + rng.normal(0.0, config.noise_rgb, rgb.shape)
        aux = aux + rng.normal(0.0, config.noise_aux, aux.shape)
        frames.append(Frame(index=t, rgb=rgb, aux=aux))
        groundtruth.append(box)

    logger.info(
        "Synthetic sequence generated",
        extra={
            "frames": config.n_frames,
            "image_size": size,
            "occluded": sum(box is None for box in groundtruth),
            "seed": config.seed,
        },
    )
    return TrackingSequence(frames=frames, groundtruth=groundtruth, scene=config)
