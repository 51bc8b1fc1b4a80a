"""Tests for the focal and regression losses and their analytic gradients."""

import math

import numpy as np
import pytest

from src.core.exceptions import ArgumentError, NonDifferentiableError
from src.schemas.boxes import BoundingBox
from src.schemas.run_config import LossConfig
from src.services.losses import (
    PROBABILITY_FLOOR,
    focal_gradient,
    focal_loss,
    focal_loss_with_flag,
    giou,
    loss_gradients,
    regression_loss,
    total_loss,
)

STEP = 1e-6


def _box(x, y, w, h) -> BoundingBox:
    return BoundingBox(x=x, y=y, w=w, h=h)


def _random_box(rng: np.random.Generator) -> BoundingBox:
    return _box(*rng.uniform(0.0, 10.0, size=2), *rng.uniform(1.0, 6.0, size=2))


class TestFocalLoss:
    """Tests for focal_loss."""

    def test_half_probability(self):
        """alpha 0.25, gamma 2, p_t = 0.5 gives 0.25 * 0.25 * ln 2."""
        assert focal_loss([0.5], [1]) == pytest.approx(0.0433217, abs=1e-6)

    def test_label_zero_uses_complement(self):
        assert focal_loss([0.5], [0]) == pytest.approx(focal_loss([0.5], [1]), abs=1e-15)

    def test_certain_predictions(self):
        assert focal_loss([1.0, 0.0], [1, 0]) == 0.0

    def test_reduces_to_negative_log_likelihood(self):
        config = LossConfig(alpha=1.0, gamma=0.0)
        p = np.array([0.9, 0.3, 0.6])
        y = np.array([1, 0, 1])
        expected = -(math.log(0.9) + math.log(0.7) + math.log(0.6))
        assert focal_loss(p, y, config) == pytest.approx(expected, abs=1e-12)

    def test_non_negative(self, rng):
        for _ in range(100):
            p = rng.uniform(0.0, 1.0, size=5)
            assert focal_loss(p, rng.integers(0, 2, size=5)) >= 0.0

    def test_zero_probability_is_clamped(self):
        loss, clamped = focal_loss_with_flag([0.0], [1])
        assert clamped
        assert loss == pytest.approx(-0.25 * math.log(PROBABILITY_FLOOR), rel=1e-9)

    def test_no_clamp_flag_on_regular_input(self):
        assert focal_loss_with_flag([0.4], [1])[1] is False

    def test_rejects_bad_inputs(self):
        with pytest.raises(ArgumentError, match="0 or 1"):
            focal_loss([0.5], [2])
        with pytest.raises(ArgumentError, match=r"\[0, 1\]"):
            focal_loss([1.5], [1])
        with pytest.raises(ArgumentError, match="one label per probability"):
            focal_loss([0.5, 0.5], [1])


class TestRegressionLoss:
    """Tests for giou and regression_loss."""

    def test_disjoint_hand_case(self):
        """Unit boxes two pixels apart diagonally: GIoU -7/9, loss 23.5556."""
        target, predicted = _box(0, 0, 1, 1), _box(2, 2, 1, 1)
        assert giou(target, predicted) == pytest.approx(-7.0 / 9.0, abs=1e-12)
        assert regression_loss(target, predicted) == pytest.approx(23.5556, abs=1e-3)

    def test_identical_boxes(self):
        box = _box(1.5, 2.0, 3.0, 4.0)
        assert giou(box, box) == 1.0
        assert regression_loss(box, box) == 0.0

    def test_giou_range(self, rng):
        for _ in range(500):
            value = giou(_random_box(rng), _random_box(rng))
            assert -1.0 < value <= 1.0

    def test_zero_area(self):
        with pytest.raises(ArgumentError, match="zero area"):
            regression_loss(_box(0, 0, 0, 1), _box(0, 0, 1, 1))

    def test_total_loss_is_sum(self, rng):
        p = rng.uniform(0.05, 0.95, size=4)
        y = np.array([1, 0, 0, 1])
        pairs = [(_random_box(rng), _random_box(rng)) for _ in range(3)]
        expected = focal_loss(p, y) + sum(regression_loss(a, b) for a, b in pairs)
        assert total_loss((p, y), pairs) == pytest.approx(expected, abs=1e-12)

    def test_total_loss_empty(self):
        assert total_loss(([], []), []) == 0.0


class TestGradients:
    """Analytic gradients against central finite differences."""

    def test_box_gradient(self, rng):
        checked = 0
        while checked < 20:
            target, predicted = _random_box(rng), _random_box(rng)
            try:
                analytic = loss_gradients(target, predicted).box
            except NonDifferentiableError:
                continue
            base = predicted.as_array()
            for k in range(4):
                step = np.zeros(4)
                step[k] = STEP
                plus = regression_loss(target, BoundingBox.from_array(base + step))
                minus = regression_loss(target, BoundingBox.from_array(base - step))
                numeric = (plus - minus) / (2 * STEP)
                assert abs(analytic[k] - numeric) <= 1e-5 * max(1.0, abs(numeric))
            checked += 1

    def test_focal_gradient(self, rng):
        p = rng.uniform(0.05, 0.95, size=20)
        y = rng.integers(0, 2, size=20)
        analytic = focal_gradient(p, y)
        for k in range(20):
            step = np.zeros(20)
            step[k] = STEP
            numeric = (focal_loss(p + step, y) - focal_loss(p - step, y)) / (2 * STEP)
            assert abs(analytic[k] - numeric) <= 1e-5 * max(1.0, abs(numeric))

    def test_focal_gradient_without_focusing(self):
        """gamma 0: d/dp_t = -alpha / p_t."""
        config = LossConfig(alpha=0.5, gamma=0.0)
        assert focal_gradient([0.25], [1], config)[0] == pytest.approx(-2.0, abs=1e-12)

    def test_focal_gradient_at_certainty(self):
        assert focal_gradient([1.0], [1])[0] == 0.0

    def test_x_gradient_antisymmetric_under_swap(self):
        a, b = _box(0.3, 1.0, 2.0, 2.0), _box(1.1, 1.7, 2.5, 1.5)
        forward = loss_gradients(a, b).box[0]
        backward = loss_gradients(b, a).box[0]
        assert forward == pytest.approx(-backward, abs=1e-9)

    def test_kink_is_rejected(self):
        box = _box(1.0, 1.0, 2.0, 2.0)
        with pytest.raises(NonDifferentiableError) as info:
            loss_gradients(box, _box(1.0, 2.0, 3.0, 4.0))
        assert info.value.component == "x"

    def test_probability_gradient_needs_labels(self):
        with pytest.raises(ArgumentError, match="labels"):
            loss_gradients(_box(0, 0, 1, 1), _box(0.5, 0.5, 2, 2), probabilities=[0.5])

    def test_probability_gradient_returned(self):
        grads = loss_gradients(
            _box(0, 0, 1, 1), _box(0.5, 0.5, 2, 2), probabilities=[0.5], labels=[1]
        )
        assert grads.probabilities is not None
        assert grads.probabilities.shape == (1,)
