"""Bounding box record."""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class BoundingBox(BaseModel):
    """
    Axis-aligned box in pixels: (x, y) is the top-left corner.

    Width and height may be zero at construction so that degenerate tracker
    outputs can be represented; operations that need a positive area check it.
    """

    model_config = ConfigDict(frozen=True)

    x: float = Field(..., description="Left edge")
    y: float = Field(..., description="Top edge")
    w: float = Field(..., ge=0.0, description="Width")
    h: float = Field(..., ge=0.0, description="Height")

    @field_validator("x", "y", "w", "h")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        """Reject NaN and infinite coordinates."""
        if not np.isfinite(v):
            raise ValueError("Box coordinates must be finite")
        return float(v)

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return cls(x=cx - w / 2.0, y=cy - h / 2.0, w=w, h=h)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "BoundingBox":
        x, y, w, h = (float(v) for v in values)
        return cls(x=x, y=y, w=w, h=h)

    @property
    def center(self) -> Tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def corners(self) -> Tuple[float, float, float, float]:
        """(x1, y1, x2, y2)."""
        return self.x, self.y, self.x + self.w, self.y + self.h

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)
