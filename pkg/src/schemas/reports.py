"""Evaluation report records, serialized as JSON."""

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field


class PrfResult(BaseModel):
    """Long-term tracking precision, recall and F-score."""

    precision: float = Field(..., ge=0.0, le=1.0)
    recall: float = Field(..., ge=0.0, le=1.0)
    f_score: float = Field(..., ge=0.0, le=1.0)
    warnings: List[str] = Field(default_factory=list)


class SequenceReport(BaseModel):
    """Metrics of one tracked sequence."""

    name: str = ""
    frames: int = Field(..., ge=1)
    precision_rate: float = Field(..., ge=0.0, le=1.0, description="PR at pr_threshold")
    pr_threshold: float
    success_rate: float = Field(..., ge=0.0, le=1.0, description="SR at sr_threshold")
    sr_threshold: float
    success_auc: float = Field(..., ge=0.0, le=1.0, description="Mean SR over 21 thresholds")
    success_curve: List[float] = Field(default_factory=list)
    precision: float = Field(..., ge=0.0, le=1.0)
    recall: float = Field(..., ge=0.0, le=1.0)
    f_score: float = Field(..., ge=0.0, le=1.0)
    warnings: List[str] = Field(default_factory=list)
    mean_focal_loss: Optional[float] = None
    mean_regression_loss: Optional[float] = None
    clamped_frames: int = 0
    memory_sizes: Optional[Tuple[int, int, int]] = None


class AggregateReport(BaseModel):
    """Unweighted means over sequence reports."""

    sequences: int = Field(..., ge=1)
    frames: int
    precision_rate: float
    success_rate: float
    success_auc: float
    precision: float
    recall: float
    f_score: float
    warnings: List[str] = Field(default_factory=list)


class RunReport(BaseModel):
    """Everything a ``run`` writes to report.json."""

    version: int = 1
    seed: int
    fusion: str
    records: List[SequenceReport]
    aggregate: AggregateReport
    parameter_counts: Dict[str, int] = Field(default_factory=dict)
