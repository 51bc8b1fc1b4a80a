"""
Tracking evaluation metrics.

Predictions and ground truth are per-frame lists of optional boxes; ``None``
marks a frame where the tracker reported the target lost or where the
target is not visible. PR and SR are computed over frames whose ground truth
is present; an absent prediction on such a frame is a failure.
"""

from typing import List, Optional, Sequence

import numpy as np

from src.core.exceptions import ArgumentError
from src.core.logging_config import get_logger
from src.schemas.boxes import BoundingBox
from src.schemas.reports import AggregateReport, PrfResult, SequenceReport

logger = get_logger(__name__)

DEFAULT_PR_THRESHOLD = 20.0
DEFAULT_SR_THRESHOLD = 0.5
AUC_THRESHOLDS = np.linspace(0.0, 1.0, 21)

BoxTrack = Sequence[Optional[BoundingBox]]


def _intersection(a: BoundingBox, b: BoundingBox) -> float:
    ax1, ay1, ax2, ay2 = a.corners
    bx1, by1, bx2, by2 = b.corners
    return max(0.0, min(ax2, bx2) - max(ax1, bx1)) * max(0.0, min(ay2, by2) - max(ay1, by1))


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """
    Intersection over union of two boxes.

    Raises:
        ArgumentError: If either box has zero area
    """
    if a.area <= 0 or b.area <= 0:
        raise ArgumentError("IoU needs positive-area boxes", received=(a.area, b.area))
    inter = _intersection(a, b)
    return inter / (a.area + b.area - inter)


def center_error(a: BoundingBox, b: BoundingBox) -> float:
    """Euclidean distance between box centres."""
    (ax, ay), (bx, by) = a.center, b.center
    return float(np.hypot(ax - bx, ay - by))


def overlap(prediction: Optional[BoundingBox], groundtruth: Optional[BoundingBox]) -> float:
    """Per-frame overlap: IoU when both boxes exist with positive area, else 0."""
    if prediction is None or groundtruth is None:
        return 0.0
    if prediction.area <= 0 or groundtruth.area <= 0:
        return 0.0
    return iou(prediction, groundtruth)


def _check_pair(results: BoxTrack, groundtruth: BoxTrack) -> None:
    if len(results) != len(groundtruth):
        raise ArgumentError(
            "results and ground truth differ in length",
            expected=len(groundtruth),
            received=len(results),
        )
    if not results:
        raise ArgumentError("cannot evaluate an empty sequence")


def _visible(groundtruth: BoxTrack) -> List[int]:
    return [t for t, box in enumerate(groundtruth) if box is not None]


def precision_rate(
    results: BoxTrack, groundtruth: BoxTrack, threshold: float = DEFAULT_PR_THRESHOLD
) -> float:
    """
    Fraction of visible-target frames whose centre error is below ``threshold`` pixels.

    Raises:
        ArgumentError: On length mismatch, an empty sequence or a negative threshold
    """
    _check_pair(results, groundtruth)
    if threshold < 0:
        raise ArgumentError("PR threshold must be non-negative", received=threshold)
    frames = _visible(groundtruth)
    if not frames:
        logger.warning("No visible ground truth; PR defined as 0")
        return 0.0
    hits = 0
    for t in frames:
        prediction, target = results[t], groundtruth[t]
        if prediction is not None and target is not None:
            hits += center_error(prediction, target) < threshold
    return hits / len(frames)


def success_curve(
    results: BoxTrack,
    groundtruth: BoxTrack,
    thresholds: Sequence[float] = tuple(AUC_THRESHOLDS),
) -> np.ndarray:
    """
    Success rate at every threshold: fraction of visible-target frames with IoU >= tau.

    Raises:
        ArgumentError: On length mismatch, an empty sequence or a threshold outside [0, 1]
    """
    _check_pair(results, groundtruth)
    taus = np.asarray(thresholds, dtype=np.float64)
    if np.any((taus < 0.0) | (taus > 1.0)):
        raise ArgumentError("IoU thresholds must lie in [0, 1]", received=thresholds)
    frames = _visible(groundtruth)
    if not frames:
        logger.warning("No visible ground truth; SR defined as 0")
        return np.zeros(taus.shape[0])
    # Absent predictions never count as a success, not even at tau = 0.
    overlaps = np.array(
        [overlap(results[t], groundtruth[t]) for t in frames if results[t] is not None],
        dtype=np.float64,
    )
    successes = (overlaps[None, :] >= taus[:, None]).sum(axis=1)
    return successes / len(frames)


def success_rate(
    results: BoxTrack, groundtruth: BoxTrack, iou_threshold: float = DEFAULT_SR_THRESHOLD
) -> float:
    """SR at one IoU threshold."""
    return float(success_curve(results, groundtruth, [iou_threshold])[0])


def success_auc(results: BoxTrack, groundtruth: BoxTrack) -> float:
    """Mean SR over the thresholds 0, 0.05, ..., 1."""
    return float(success_curve(results, groundtruth).mean())


def precision_recall_f(results: BoxTrack, groundtruth: BoxTrack) -> PrfResult:
    """
    Long-term precision, recall and F-score.

    Pre averages the per-frame overlap over frames with a prediction, Re
    over frames with visible ground truth; an overlap against a missing box
    is 0. A metric with an empty denominator is 0 and flagged.
    """
    _check_pair(results, groundtruth)
    overlaps = [overlap(p, g) for p, g in zip(results, groundtruth)]
    predicted = [t for t, box in enumerate(results) if box is not None]
    visible = _visible(groundtruth)
    warnings: List[str] = []

    if predicted:
        precision = sum(overlaps[t] for t in predicted) / len(predicted)
    else:
        precision = 0.0
        warnings.append("no_predictions")
    if visible:
        recall = sum(overlaps[t] for t in visible) / len(visible)
    else:
        recall = 0.0
        warnings.append("no_visible_groundtruth")

    f_score = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    if warnings:
        logger.warning("Degenerate precision/recall denominator", extra={"flags": warnings})
    return PrfResult(precision=precision, recall=recall, f_score=f_score, warnings=warnings)


def evaluate_sequence(
    results: BoxTrack,
    groundtruth: BoxTrack,
    pr_threshold: float = DEFAULT_PR_THRESHOLD,
    sr_threshold: float = DEFAULT_SR_THRESHOLD,
    name: str = "",
) -> SequenceReport:
    """
    Compute every metric of one sequence.

    Args:
        results: Predicted boxes (None = target reported lost)
        groundtruth: Ground-truth boxes (None = target not visible)
        pr_threshold: Centre-error threshold in pixels
        sr_threshold: IoU threshold of the reported SR
        name: Sequence name for the report

    Returns:
        SequenceReport; PR/SR computed without a visible frame are 0 and flagged
    """
    prf = precision_recall_f(results, groundtruth)
    curve = success_curve(results, groundtruth)
    warnings = list(prf.warnings)
    if not _visible(groundtruth):
        warnings += ["precision_rate_undefined", "success_rate_undefined"]
    return SequenceReport(
        name=name,
        frames=len(results),
        precision_rate=precision_rate(results, groundtruth, pr_threshold),
        pr_threshold=pr_threshold,
        success_rate=success_rate(results, groundtruth, sr_threshold),
        sr_threshold=sr_threshold,
        success_auc=float(curve.mean()),
        success_curve=[float(v) for v in curve],
        precision=prf.precision,
        recall=prf.recall,
        f_score=prf.f_score,
        warnings=warnings,
    )


def aggregate_reports(reports: Sequence[SequenceReport]) -> AggregateReport:
    """
    Average sequence reports with equal weight per sequence.

    Raises:
        ArgumentError: If no reports are given
    """
    if not reports:
        raise ArgumentError("nothing to aggregate")

    def mean(attribute: str) -> float:
        return float(np.mean([getattr(report, attribute) for report in reports]))

    warnings = sorted({f"{r.name}:{w}" for r in reports for w in r.warnings})
    return AggregateReport(
        sequences=len(reports),
        frames=sum(r.frames for r in reports),
        precision_rate=mean("precision_rate"),
        success_rate=mean("success_rate"),
        success_auc=mean("success_auc"),
        precision=mean("precision"),
        recall=mean("recall"),
        f_score=mean("f_score"),
        warnings=warnings,
    )
