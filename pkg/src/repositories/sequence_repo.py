"""
Sequence directories.

    frames.npz       arrays ``rgb`` and ``aux`` of shape (T, C, S, S)
    groundtruth.txt  box file, ``absent`` on frames without a visible target
    scene.toon       scene configuration that produced the frames (optional)
"""

from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.core.exceptions import BoxFileError, ConfigurationError
from src.core.logging_config import get_logger
from src.repositories.box_file_repo import read_box_file, write_box_file
from src.repositories.config_document import dump_scene_config, parse_scene_config
from src.schemas.run_config import SceneConfig
from src.services.frames import Frame, TrackingSequence

logger = get_logger(__name__)

FRAMES_FILE = "frames.npz"
GROUNDTRUTH_FILE = "groundtruth.txt"
SCENE_FILE = "scene.toon"


def write_sequence(
    directory: Union[str, Path],
    sequence: TrackingSequence,
    scene: Optional[SceneConfig] = None,
) -> Path:
    """Write a sequence directory, creating it if needed; ``scene`` defaults to the sequence's."""
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    np.savez(
        target / FRAMES_FILE,
        rgb=np.stack([frame.rgb for frame in sequence.frames]),
        aux=np.stack([frame.aux for frame in sequence.frames]),
    )
    write_box_file(target / GROUNDTRUTH_FILE, sequence.groundtruth)
    scene = scene or sequence.scene
    if scene is not None:
        (target / SCENE_FILE).write_text(dump_scene_config(scene), encoding="utf-8")
    logger.info("Sequence written", extra={"path": str(target), "frames": len(sequence)})
    return target


def _read_scene(path: Path, rgb: np.ndarray) -> Optional[SceneConfig]:
    if not path.exists():
        return None
    scene = parse_scene_config(path.read_text(encoding="utf-8"))
    frames, channels, size = rgb.shape[0], rgb.shape[1], rgb.shape[2]
    if (scene.n_frames, scene.channels, scene.image_size) != (frames, channels, size):
        raise ConfigurationError(
            f"'{path}' describes {scene.n_frames} frames of {scene.channels}x{scene.image_size}, "
            f"archive holds {frames} of {channels}x{size}"
        )
    return scene


def read_sequence(directory: Union[str, Path]) -> TrackingSequence:
    """
    Load a sequence directory, with its scene when ``scene.toon`` is present.

    Raises:
        ConfigurationError: If the frame archive is missing or malformed, or
            scene.toon is invalid or disagrees with the frames
        BoxFileError: If the ground truth is malformed or its length differs
    """
    source = Path(directory)
    try:
        with np.load(source / FRAMES_FILE, allow_pickle=False) as archive:
            rgb, aux = archive["rgb"], archive["aux"]
    except (OSError, KeyError, ValueError) as e:
        raise ConfigurationError(f"cannot read frames from '{source}': {e}") from e
    if rgb.ndim != 4 or rgb.shape != aux.shape:
        raise ConfigurationError(f"frames in '{source}' must be two (T, C, S, S) arrays")

    groundtruth = read_box_file(source / GROUNDTRUTH_FILE)
    if len(groundtruth) != rgb.shape[0]:
        raise BoxFileError(
            f"{rgb.shape[0]} frames but {len(groundtruth)} ground-truth lines",
            path=str(source / GROUNDTRUTH_FILE),
        )
    if groundtruth[0] is None:
        raise BoxFileError(
            "first frame needs a target box", path=str(source / GROUNDTRUTH_FILE), line=1
        )
    scene = _read_scene(source / SCENE_FILE, rgb)
    frames = [Frame(index=t, rgb=rgb[t], aux=aux[t]) for t in range(rgb.shape[0])]
    return TrackingSequence(frames=frames, groundtruth=groundtruth, scene=scene)
