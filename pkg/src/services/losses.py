"""
Training losses of the tracker head and their analytic gradients.

Classification uses focal loss over per-token foreground probabilities;
box regression combines an L1 term with a GIoU term. Boxes are (x, y, w, h)
with (x, y) the top-left corner; GIoU is evaluated on corners.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from src.core.exceptions import ArgumentError, NonDifferentiableError
from src.core.logging_config import get_logger
from src.kernels.numkernel import Tensor
from src.schemas.boxes import BoundingBox
from src.schemas.run_config import LossConfig

logger = get_logger(__name__)

PROBABILITY_FLOOR = 1e-12
KINK_TOLERANCE = 1e-6
BOX_COMPONENTS = ("x", "y", "w", "h")

DEFAULT_LOSS = LossConfig()


@dataclass(frozen=True)
class LossGradients:
    """Partial derivatives of the total loss."""

    box: Tensor
    probabilities: Optional[Tensor] = None


def _true_class_probabilities(
    probabilities: npt.ArrayLike, labels: npt.ArrayLike
) -> Tuple[Tensor, Tensor]:
    p = np.atleast_1d(np.asarray(probabilities, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels))
    if p.shape != y.shape:
        raise ArgumentError("one label per probability", expected=p.shape, received=y.shape)
    if not np.all(np.isin(y, (0, 1))):
        raise ArgumentError("labels must be 0 or 1", argument="labels")
    if not np.all((p >= 0.0) & (p <= 1.0)):
        raise ArgumentError("probabilities must lie in [0, 1]", argument="probabilities")
    return np.where(y == 1, p, 1.0 - p), y


def focal_loss_with_flag(
    probabilities: npt.ArrayLike,
    labels: npt.ArrayLike,
    config: LossConfig = DEFAULT_LOSS,
) -> Tuple[float, bool]:
    """
    Focal loss and whether any p_t had to be clamped.

    Args:
        probabilities: Foreground probability per sample
        labels: 1 for foreground, 0 for background
        config: alpha and gamma

    Returns:
        Tuple of (loss, clamped)

    Raises:
        ArgumentError: On shape mismatch, non-binary labels or p outside [0, 1]
    """
    p_t, _ = _true_class_probabilities(probabilities, labels)
    clamped = bool(np.any(p_t < PROBABILITY_FLOOR))
    if clamped:
        logger.warning(
            "Focal loss probability clamped",
            extra={"floor": PROBABILITY_FLOOR, "count": int(np.sum(p_t < PROBABILITY_FLOOR))},
        )
        p_t = np.maximum(p_t, PROBABILITY_FLOOR)
    terms = config.alpha * (1.0 - p_t) ** config.gamma * np.log(p_t)
    return float(-np.sum(terms)), clamped


def focal_loss(
    probabilities: npt.ArrayLike,
    labels: npt.ArrayLike,
    config: LossConfig = DEFAULT_LOSS,
) -> float:
    """-sum alpha (1 - p_t)^gamma log p_t, with p_t the probability of the true class."""
    loss, _ = focal_loss_with_flag(probabilities, labels, config)
    return loss


def _require_area(box: BoundingBox, name: str) -> None:
    if box.w <= 0 or box.h <= 0:
        raise ArgumentError(f"{name} has zero area", argument=name, received=(box.w, box.h))


def giou(a: BoundingBox, b: BoundingBox) -> float:
    """
    Generalized IoU, in (-1, 1] for positive-area boxes.

    Raises:
        ArgumentError: If a box has zero area
    """
    _require_area(a, "a")
    _require_area(b, "b")
    ax1, ay1, ax2, ay2 = a.corners
    bx1, by1, bx2, by2 = b.corners
    inter = max(0.0, min(ax2, bx2) - max(ax1, bx1)) * max(0.0, min(ay2, by2) - max(ay1, by1))
    union = a.area + b.area - inter
    enclosing = (max(ax2, bx2) - min(ax1, bx1)) * (max(ay2, by2) - min(ay1, by1))
    return inter / union - (enclosing - union) / enclosing


def regression_loss(
    target: BoundingBox, predicted: BoundingBox, config: LossConfig = DEFAULT_LOSS
) -> float:
    """
    lambda1 * L1(b, b_hat) + lambda2 * (1 - GIoU(b, b_hat)).

    Raises:
        ArgumentError: If either box has zero area
    """
    l1 = float(np.sum(np.abs(target.as_array() - predicted.as_array())))
    return config.lambda1 * l1 + config.lambda2 * (1.0 - giou(target, predicted))


def total_loss(
    cls_inputs: Tuple[npt.ArrayLike, npt.ArrayLike],
    reg_inputs: Sequence[Tuple[BoundingBox, BoundingBox]],
    config: LossConfig = DEFAULT_LOSS,
) -> float:
    """
    Classification plus regression loss.

    Args:
        cls_inputs: (probabilities, labels) for the focal term
        reg_inputs: (target, predicted) box pairs for the regression term
        config: Loss coefficients

    Returns:
        focal_loss + sum of regression losses
    """
    probabilities, labels = cls_inputs
    cls = focal_loss(probabilities, labels, config) if np.size(probabilities) else 0.0
    reg = sum(regression_loss(target, predicted, config) for target, predicted in reg_inputs)
    return cls + reg


def giou_gradient(target: BoundingBox, predicted: BoundingBox) -> Tensor:
    """
    d GIoU / d (x, y, w, h) of the predicted box.

    Written in corner form: GIoU = I/U - 1 + U/C, so
    dGIoU = dI/U - I dU/U^2 + dU/C - U dC/C^2 with dU = dA - dI.
    """
    _require_area(target, "target")
    _require_area(predicted, "predicted")
    px1, py1, px2, py2 = predicted.corners
    gx1, gy1, gx2, gy2 = target.corners

    iw = max(0.0, min(px2, gx2) - max(px1, gx1))
    ih = max(0.0, min(py2, gy2) - max(py1, gy1))
    cw = max(px2, gx2) - min(px1, gx1)
    ch = max(py2, gy2) - min(py1, gy1)
    inter = iw * ih
    union = predicted.area + target.area - inter
    enclosing = cw * ch

    # Corner order: x1, x2, y1, y2
    d_area = np.array([-predicted.h, predicted.h, -predicted.w, predicted.w])
    d_inter = np.array(
        [
            -ih if (iw > 0 and px1 > gx1) else 0.0,
            ih if (iw > 0 and px2 < gx2) else 0.0,
            -iw if (ih > 0 and py1 > gy1) else 0.0,
            iw if (ih > 0 and py2 < gy2) else 0.0,
        ]
    )
    d_enclosing = np.array(
        [
            -ch if px1 < gx1 else 0.0,
            ch if px2 > gx2 else 0.0,
            -cw if py1 < gy1 else 0.0,
            cw if py2 > gy2 else 0.0,
        ]
    )
    d_union = d_area - d_inter
    d_corners = (
        d_inter / union
        - inter * d_union / union**2
        + d_union / enclosing
        - union * d_enclosing / enclosing**2
    )
    dx1, dx2, dy1, dy2 = d_corners
    return np.array([dx1 + dx2, dy1 + dy2, dx2, dy2])


def focal_gradient(
    probabilities: npt.ArrayLike,
    labels: npt.ArrayLike,
    config: LossConfig = DEFAULT_LOSS,
) -> Tensor:
    """
    d focal_loss / d p per sample.

    d/dp_t = alpha [gamma (1-p_t)^(gamma-1) log p_t - (1-p_t)^gamma / p_t];
    the first term is zero at p_t = 1. The sign flips for label 0.
    """
    p_t, y = _true_class_probabilities(probabilities, labels)
    p_t = np.maximum(p_t, PROBABILITY_FLOOR)
    rest = 1.0 - p_t
    first = np.zeros_like(p_t)
    open_mask = rest > 0
    if config.gamma > 0:
        first[open_mask] = (
            config.gamma * rest[open_mask] ** (config.gamma - 1.0) * np.log(p_t[open_mask])
        )
    d_pt = config.alpha * (first - rest**config.gamma / p_t)
    return np.where(y == 1, d_pt, -d_pt)


def loss_gradients(
    target: BoundingBox,
    predicted: BoundingBox,
    config: LossConfig = DEFAULT_LOSS,
    probabilities: Optional[npt.ArrayLike] = None,
    labels: Optional[npt.ArrayLike] = None,
) -> LossGradients:
    """
    Analytic gradient of total_loss w.r.t. the predicted box and the probabilities.

    Args:
        target: Ground-truth box b
        predicted: Predicted box b_hat (the differentiation variable)
        config: Loss coefficients
        probabilities: Optional foreground probabilities of the focal term
        labels: Labels paired with ``probabilities``

    Returns:
        LossGradients with d/d(x, y, w, h) and, if given, d/dp

    Raises:
        NonDifferentiableError: If a box component sits on an L1 kink
    """
    difference = predicted.as_array() - target.as_array()
    for component, value in zip(BOX_COMPONENTS, difference):
        if abs(value) <= KINK_TOLERANCE:
            raise NonDifferentiableError(component, float(value))

    box_grad = config.lambda1 * np.sign(difference) - config.lambda2 * giou_gradient(
        target, predicted
    )
    prob_grad = None
    if probabilities is not None:
        if labels is None:
            raise ArgumentError("labels are required with probabilities", argument="labels")
        prob_grad = focal_gradient(probabilities, labels, config)
    return LossGradients(box=box_grad, probabilities=prob_grad)
