"""Frame and template records shared by the generator and the tracker."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.core.exceptions import ArgumentError
from src.kernels.numkernel import Tensor, as_tensor
from src.schemas.boxes import BoundingBox
from src.schemas.run_config import SceneConfig


@dataclass(frozen=True)
class Frame:
    """One time step of both modalities, each (C, S, S)."""

    index: int
    rgb: Tensor
    aux: Tensor

    def __post_init__(self) -> None:
        rgb = as_tensor(self.rgb, "rgb")
        aux = as_tensor(self.aux, "aux")
        if rgb.ndim != 3 or rgb.shape != aux.shape:
            raise ArgumentError(
                "rgb and aux must be equally shaped (C, H, W) maps",
                expected=rgb.shape,
                received=aux.shape,
            )
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "aux", aux)

    @property
    def channels(self) -> int:
        return int(self.rgb.shape[0])

    @property
    def size(self) -> int:
        return int(self.rgb.shape[1])


@dataclass(frozen=True)
class Template:
    """Square crop of both modalities around a source box."""

    rgb: Tensor
    aux: Tensor
    box: BoundingBox

    def __post_init__(self) -> None:
        if self.rgb.shape != self.aux.shape or self.rgb.shape[1] != self.rgb.shape[2]:
            raise ArgumentError("template crops must be equal squares", received=self.rgb.shape)


@dataclass(frozen=True)
class TrackingSequence:
    """Frames with their optional (absent = None) ground-truth boxes and the scene, if known."""

    frames: List[Frame]
    groundtruth: List[Optional[BoundingBox]]
    scene: Optional[SceneConfig] = None

    def __post_init__(self) -> None:
        if len(self.frames) != len(self.groundtruth):
            raise ArgumentError(
                "one ground-truth entry per frame",
                expected=len(self.frames),
                received=len(self.groundtruth),
            )
        if not self.frames:
            raise ArgumentError("a sequence needs at least one frame")
        if self.groundtruth[0] is None:
            raise ArgumentError("the first frame must carry the target box")

    def __len__(self) -> int:
        return len(self.frames)


def _crop(image: Tensor, top: int, left: int, size: int) -> Tensor:
    channels, height, width = image.shape
    out = np.zeros((channels, size, size))
    y0, x0 = max(top, 0), max(left, 0)
    y1, x1 = min(top + size, height), min(left + size, width)
    if y1 > y0 and x1 > x0:
        out[:, y0 - top : y1 - top, x0 - left : x1 - left] = image[:, y0:y1, x0:x1]
    return out


def crop_template(frame: Frame, box: BoundingBox, size: int) -> Template:
    """
    Cut a size x size window centred on the box from both modalities.

    Pixels outside the frame are zero.

    Args:
        frame: Source frame
        box: Target box in that frame
        size: Template side in pixels

    Returns:
        Template holding both crops and the source box
    """
    cx, cy = box.center
    top = int(np.floor(cy)) - size // 2
    left = int(np.floor(cx)) - size // 2
    return Template(
        rgb=_crop(frame.rgb, top, left, size),
        aux=_crop(frame.aux, top, left, size),
        box=box,
    )
