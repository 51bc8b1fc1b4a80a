"""Tests for the synthetic sequence generator."""

import numpy as np
import pytest

from src.core.exceptions import ArgumentError
from src.schemas.run_config import OcclusionWindow, PathKind, SceneConfig
from src.services import synthgen


def _quiet(scene: SceneConfig, **update) -> SceneConfig:
    return scene.model_copy(update={"noise_rgb": 0.0, "noise_aux": 0.0, **update})


class TestGenerate:
    """Tests for generate()."""

    def test_shapes(self, small_scene, small_sequence):
        assert len(small_sequence) == small_scene.n_frames
        for t, frame in enumerate(small_sequence.frames):
            assert frame.index == t
            assert frame.rgb.shape == (2, 16, 16)
            assert frame.aux.shape == (2, 16, 16)

    def test_deterministic(self, small_scene):
        first = synthgen.generate(small_scene)
        second = synthgen.generate(small_scene)
        for a, b in zip(first.frames, second.frames):
            assert np.array_equal(a.rgb, b.rgb)
            assert np.array_equal(a.aux, b.aux)
        assert first.groundtruth == second.groundtruth

    def test_seed_changes_frames(self, small_scene):
        first = synthgen.generate(small_scene)
        second = synthgen.generate(small_scene.model_copy(update={"seed": 1}))
        assert not np.array_equal(first.frames[0].rgb, second.frames[0].rgb)

    def test_linear_groundtruth(self, small_sequence):
        for t, box in enumerate(small_sequence.groundtruth):
            assert (box.x, box.y, box.w, box.h) == (2.0 + t, 6.0, 4.0, 4.0)

    def test_sinusoidal_path(self):
        scene = SceneConfig(
            image_size=32,
            n_frames=9,
            target_size=(4.0, 4.0),
            start=(4.0, 12.0),
            velocity=(1.0, 0.0),
            path=PathKind.SINUSOIDAL,
            amplitude=4.0,
            period=8.0,
        )
        assert synthgen.target_position(scene, 2) == pytest.approx((6.0, 16.0), abs=1e-12)
        assert synthgen.target_position(scene, 6) == pytest.approx((10.0, 8.0), abs=1e-12)

    def test_texture_and_background(self, small_scene):
        sequence = synthgen.generate(_quiet(small_scene))
        rgb = sequence.frames[0].rgb
        # Target covers x in [2, 6), y in [6, 10); checker cells are 2 px.
        assert rgb[0, 6, 2] == 1.0 and rgb[0, 6, 4] == 0.4
        assert rgb[1, 6, 2] == 0.0 and rgb[1, 6, 4] == pytest.approx(0.6, abs=1e-15)
        outside = np.ones((16, 16), dtype=bool)
        outside[6:10, 2:6] = False
        assert np.all(rgb[:, outside] >= 0.0)
        assert np.all(rgb[:, outside] < synthgen.BACKGROUND_LEVEL)

    def test_aux_blob_peaks_inside_target(self, small_scene):
        aux = synthgen.generate(_quiet(small_scene)).frames[3].aux
        row, col = np.unravel_index(np.argmax(aux[0]), aux[0].shape)
        assert 6 <= row < 10 and 5 <= col < 9
        assert np.all(aux[1] <= aux[0] + 1e-15)

    def test_occluded_frames(self, small_scene):
        scene = _quiet(small_scene, occlusions=[OcclusionWindow(start=3, stop=5)])
        sequence = synthgen.generate(scene)
        assert [t for t, box in enumerate(sequence.groundtruth) if box is None] == [3, 4]
        assert not np.any(sequence.frames[3].aux)
        assert np.all(sequence.frames[4].rgb < synthgen.BACKGROUND_LEVEL)

    def test_target_leaving_image(self, small_scene):
        scene = small_scene.model_copy(update={"n_frames": 20})
        with pytest.raises(ArgumentError, match="leaves the image at frame 11"):
            synthgen.generate(scene)

    def test_occlusion_hides_out_of_bounds_frames(self, small_scene):
        scene = small_scene.model_copy(
            update={"n_frames": 14, "occlusions": [OcclusionWindow(start=11, stop=14)]}
        )
        synthgen.validate_scene(scene)

    def test_target_larger_than_image(self):
        scene = SceneConfig(image_size=8, n_frames=2, target_size=(9.0, 2.0), start=(0.0, 0.0))
        with pytest.raises(ArgumentError, match="larger than the image"):
            synthgen.generate(scene)

    def test_occlusion_of_first_frame_is_rejected(self):
        with pytest.raises(ValueError, match="frame 0"):
            SceneConfig(occlusions=[OcclusionWindow(start=0, stop=2)])
