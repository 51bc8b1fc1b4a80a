"""Pydantic records: boxes, run configuration and evaluation reports."""

from src.schemas.boxes import BoundingBox
from src.schemas.reports import AggregateReport, PrfResult, RunReport, SequenceReport
from src.schemas.run_config import (
    AdapterConfig,
    EncoderConfig,
    LossConfig,
    MemoryConfig,
    RunConfig,
    SceneConfig,
)

__all__ = [
    "BoundingBox",
    "AggregateReport",
    "PrfResult",
    "RunReport",
    "SequenceReport",
    "AdapterConfig",
    "EncoderConfig",
    "LossConfig",
    "MemoryConfig",
    "RunConfig",
    "SceneConfig",
]
