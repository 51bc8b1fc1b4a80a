"""Shared fixtures."""

import numpy as np
import pytest

from src.schemas.run_config import EncoderConfig, RunConfig, SceneConfig
from src.services import synthgen
from src.services.frames import TrackingSequence


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_scene() -> SceneConfig:
    """16 px frames, 4 px target moving one pixel per frame to the right."""
    return SceneConfig(
        image_size=16,
        n_frames=8,
        target_size=(4.0, 4.0),
        start=(2.0, 6.0),
        velocity=(1.0, 0.0),
    )


@pytest.fixture
def small_config(small_scene: SceneConfig) -> RunConfig:
    """Two blocks, H = 8, 4x4 search grid and 2x2 template grid."""
    return RunConfig(
        scene=small_scene,
        encoder=EncoderConfig(layers=2, hidden=8, patch_size=4, template_size=8),
    )


@pytest.fixture
def small_sequence(small_scene: SceneConfig) -> TrackingSequence:
    return synthgen.generate(small_scene)
