"""Tests for the tracking metrics."""

import math

import numpy as np
import pytest

from src.core.exceptions import ArgumentError
from src.schemas.boxes import BoundingBox
from src.services.metrics import (
    AUC_THRESHOLDS,
    aggregate_reports,
    center_error,
    evaluate_sequence,
    iou,
    precision_rate,
    precision_recall_f,
    success_auc,
    success_curve,
    success_rate,
)


def _box(x, y, w, h) -> BoundingBox:
    return BoundingBox(x=x, y=y, w=w, h=h)


def _shifted(dx: float) -> BoundingBox:
    return _box(10.0 + dx, 10.0, 4.0, 4.0)


def _grid_cells(box):
    x, y, w, h = (int(v) for v in box)
    return {(i, j) for i in range(x, x + w) for j in range(y, y + h)}


def _brute_force(predictions, groundtruth, pr_threshold):
    """Metrics by cell counting on integer boxes, written without the library."""
    overlaps = []
    for p, g in zip(predictions, groundtruth):
        if p is None or g is None:
            overlaps.append(0.0)
            continue
        a, b = _grid_cells(p), _grid_cells(g)
        overlaps.append(len(a & b) / len(a | b))

    visible = [t for t, g in enumerate(groundtruth) if g is not None]
    predicted = [t for t, p in enumerate(predictions) if p is not None]
    n = len(visible)
    hits = 0
    for t in visible:
        p, g = predictions[t], groundtruth[t]
        if p is not None:
            dx = (p[0] + p[2] / 2) - (g[0] + g[2] / 2)
            dy = (p[1] + p[3] / 2) - (g[1] + g[3] / 2)
            hits += math.hypot(dx, dy) < pr_threshold
    pr = hits / n if n else 0.0
    curve = []
    for tau in AUC_THRESHOLDS:
        count = sum(1 for t in visible if predictions[t] is not None and overlaps[t] >= tau)
        curve.append(count / n if n else 0.0)
    pre = sum(overlaps[t] for t in predicted) / len(predicted) if predicted else 0.0
    re = sum(overlaps[t] for t in visible) / n if n else 0.0
    f = 2 * pre * re / (pre + re) if pre + re > 0 else 0.0
    return pr, curve, pre, re, f


class TestIou:
    """Tests for iou and center_error."""

    def test_hand_case(self):
        assert iou(_box(0, 0, 2, 2), _box(1, 0, 2, 2)) == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_identical_and_disjoint(self):
        assert iou(_box(1, 1, 3, 3), _box(1, 1, 3, 3)) == 1.0
        assert iou(_box(0, 0, 1, 1), _box(5, 5, 1, 1)) == 0.0

    def test_zero_area(self):
        with pytest.raises(ArgumentError, match="positive-area"):
            iou(_box(0, 0, 0, 2), _box(0, 0, 2, 2))

    def test_center_error(self):
        assert center_error(_box(0, 0, 2, 2), _box(3, 4, 2, 2)) == 5.0


class TestPrecisionRate:
    """Tests for PR."""

    def test_count_example(self):
        """Centre errors 5, 25, 10, 30 at threshold 20 give 0.5."""
        gt = [_shifted(0.0)] * 4
        res = [_shifted(dx) for dx in (5.0, 25.0, 10.0, 30.0)]
        assert precision_rate(res, gt) == 0.5

    def test_threshold_is_strict(self):
        assert precision_rate([_shifted(20.0)], [_shifted(0.0)]) == 0.0
        assert precision_rate([_shifted(19.5)], [_shifted(0.0)]) == 1.0

    def test_perfect_tracking(self):
        gt = [_shifted(float(t)) for t in range(5)]
        assert precision_rate(gt, gt) == 1.0

    def test_absent_prediction_is_a_failure(self):
        assert precision_rate([None, _shifted(0.0)], [_shifted(0.0)] * 2) == 0.5

    def test_invisible_frames_are_skipped(self):
        assert precision_rate([_shifted(50.0), _shifted(0.0)], [None, _shifted(0.0)]) == 1.0

    def test_empty_sequence(self):
        with pytest.raises(ArgumentError, match="empty"):
            precision_rate([], [])

    def test_length_mismatch(self):
        with pytest.raises(ArgumentError, match="differ in length"):
            precision_rate([None], [None, None])


class TestSuccessRate:
    """Tests for SR and its AUC."""

    def test_count_example(self):
        """IoUs 0.2, 0.6 and 0.8 at threshold 0.5 give 2/3."""
        gt = [_box(0, 0, 10, 10)] * 3
        res = [_box(0, 0, 2, 10), _box(0, 0, 6, 10), _box(0, 0, 8, 10)]
        assert success_rate(res, gt, 0.5) == pytest.approx(2.0 / 3.0, abs=1e-15)

    def test_perfect_tracking(self):
        gt = [_box(1, 2, 3, 4)] * 3
        assert np.all(success_curve(gt, gt) == 1.0)
        assert success_auc(gt, gt) == 1.0

    def test_disjoint_predictions(self):
        curve = success_curve([_box(20, 20, 2, 2)], [_box(0, 0, 2, 2)])
        assert curve[0] == 1.0
        assert np.all(curve[1:] == 0.0)

    def test_curve_is_non_increasing(self, rng):
        gt = [_box(*rng.uniform(0, 5, 2), 4.0, 4.0) for _ in range(20)]
        res = [_box(*rng.uniform(0, 5, 2), 4.0, 4.0) for _ in range(20)]
        assert np.all(np.diff(success_curve(res, gt)) <= 0.0)

    def test_threshold_range(self):
        with pytest.raises(ArgumentError, match=r"\[0, 1\]"):
            success_rate([_shifted(0.0)], [_shifted(0.0)], 1.5)

    def test_auc_thresholds(self):
        assert len(AUC_THRESHOLDS) == 21
        assert AUC_THRESHOLDS[0] == 0.0 and AUC_THRESHOLDS[-1] == 1.0


class TestPrecisionRecallF:
    """Tests for long-term precision, recall and F-score."""

    def test_four_frame_case(self):
        """gt on frames 0-2, predictions on 1-3 with IoUs 0.5 and 1.0 where both exist."""
        full = _box(0, 0, 2, 2)
        gt = [full, full, full, None]
        res = [None, _box(0, 0, 2, 1), full, _box(5, 5, 1, 1)]
        result = precision_recall_f(res, gt)
        assert result.precision == 0.5
        assert result.recall == 0.5
        assert result.f_score == 0.5
        assert result.warnings == []

    def test_perfect_tracking(self):
        gt = [_box(1, 1, 2, 2)] * 4
        result = precision_recall_f(gt, gt)
        assert (result.precision, result.recall, result.f_score) == (1.0, 1.0, 1.0)

    def test_no_predictions(self):
        result = precision_recall_f([None, None], [_box(0, 0, 1, 1)] * 2)
        assert (result.precision, result.recall, result.f_score) == (0.0, 0.0, 0.0)
        assert result.warnings == ["no_predictions"]

    def test_no_visible_groundtruth(self):
        result = precision_recall_f([_box(0, 0, 1, 1)], [None])
        assert result.recall == 0.0
        assert "no_visible_groundtruth" in result.warnings

    def test_harmonic_mean_bounds(self, rng):
        for _ in range(200):
            gt = [_box(*rng.uniform(0, 4, 2), 3.0, 3.0) if rng.random() < 0.8 else None
                  for _ in range(6)]
            res = [_box(*rng.uniform(0, 4, 2), 3.0, 3.0) if rng.random() < 0.8 else None
                   for _ in range(6)]
            result = precision_recall_f(res, gt)
            assert result.f_score <= min(2 * result.precision, 2 * result.recall) + 1e-12


class TestEvaluateSequence:
    """Tests for the per-sequence report flags."""

    def test_undefined_rates_are_flagged(self):
        """Without a visible frame PR and SR are 0 and the report says so."""
        report = evaluate_sequence([_box(0, 0, 1, 1), None], [None, None])
        assert report.precision_rate == 0.0
        assert report.success_rate == 0.0
        assert "precision_rate_undefined" in report.warnings
        assert "success_rate_undefined" in report.warnings

    def test_defined_rates_are_not_flagged(self):
        gt = [_box(0, 0, 2, 2), None]
        report = evaluate_sequence([_box(0, 0, 2, 2), None], gt)
        assert report.precision_rate == 1.0
        assert report.warnings == []


class TestBruteForce:
    """Every metric against cell counting on a 4x4 integer grid."""

    def test_random_sequences(self):
        rng = np.random.default_rng(7)
        pr_threshold = 1.5

        def draw():
            if rng.random() < 0.2:
                return None
            x, y = (int(v) for v in rng.integers(0, 4, size=2))
            return (x, y, int(rng.integers(1, 5 - x)), int(rng.integers(1, 5 - y)))

        for _ in range(10_000):
            length = int(rng.integers(1, 7))
            raw_res = [draw() for _ in range(length)]
            raw_gt = [draw() for _ in range(length)]
            res = [None if b is None else _box(*b) for b in raw_res]
            gt = [None if b is None else _box(*b) for b in raw_gt]

            pr, curve, pre, re, f = _brute_force(raw_res, raw_gt, pr_threshold)
            report = evaluate_sequence(res, gt, pr_threshold=pr_threshold)
            assert report.precision_rate == pytest.approx(pr, abs=1e-12)
            assert report.success_curve == pytest.approx(curve, abs=1e-12)
            assert report.precision == pytest.approx(pre, abs=1e-12)
            assert report.recall == pytest.approx(re, abs=1e-12)
            assert report.f_score == pytest.approx(f, abs=1e-12)

    def test_permutation_covariance(self, rng):
        gt = [_box(*rng.uniform(0, 10, 2), 4.0, 4.0) for _ in range(8)]
        res = [_box(*rng.uniform(0, 10, 2), 4.0, 4.0) for _ in range(8)]
        order = rng.permutation(8)
        first = evaluate_sequence(res, gt)
        second = evaluate_sequence([res[i] for i in order], [gt[i] for i in order])
        assert second.precision_rate == first.precision_rate
        assert second.success_curve == pytest.approx(first.success_curve, abs=1e-15)
        assert second.f_score == pytest.approx(first.f_score, abs=1e-12)


class TestAggregate:
    """Tests for aggregate_reports."""

    def test_equal_weight_mean(self):
        gt = [_box(0, 0, 2, 2)] * 2
        perfect = evaluate_sequence(gt, gt, name="a")
        lost = evaluate_sequence([None, None], gt, name="b")
        aggregate = aggregate_reports([perfect, lost])
        assert aggregate.sequences == 2
        assert aggregate.frames == 4
        assert aggregate.precision_rate == 0.5
        assert aggregate.warnings == ["b:no_predictions"]

    def test_nothing_to_aggregate(self):
        with pytest.raises(ArgumentError):
            aggregate_reports([])
