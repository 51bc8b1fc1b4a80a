"""Run orchestration: generate or load sequences, track them, evaluate and write outputs."""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.core.exceptions import ConfigurationError, StateError
from src.core.logging_config import get_logger
from src.repositories import box_file_repo, param_repo, snapshot_repo
from src.repositories.config_document import dump_run_config
from src.repositories.sequence_repo import read_sequence
from src.schemas.boxes import BoundingBox
from src.schemas.reports import RunReport, SequenceReport
from src.schemas.run_config import RunConfig
from src.services import synthgen
from src.services.frames import TrackingSequence
from src.services.memory import MemorySnapshot
from src.services.metrics import aggregate_reports, evaluate_sequence
from src.services.tracker import TrackerParams, TrackerSession

logger = get_logger(__name__)

REPORT_FILE = "report.json"
RESOLVED_CONFIG_FILE = "config.resolved.toon"


@dataclass
class SequenceOutcome:
    """Everything produced for one sequence."""

    name: str
    predictions: List[Optional[BoundingBox]]
    groundtruth: List[Optional[BoundingBox]]
    report: SequenceReport
    snapshots: Dict[int, MemorySnapshot] = field(default_factory=dict)


def sequence_name(replica: int) -> str:
    return f"seq_{replica:03d}"


def build_params(config: RunConfig) -> TrackerParams:
    """
    Tracker weights for a run: drawn from the seed, adapter optionally from a file.

    Raises:
        ParameterFileError: If the adapter file does not match the configuration
    """
    params = TrackerParams.initialize(config)
    if config.adapter.param_source == "file":
        assert config.adapter.param_path is not None
        adapter = param_repo.load_params(config.adapter.param_path, params.adapter)
        params = params.with_adapter(adapter)
    return params


def load_sequence(config: RunConfig, replica: int) -> TrackingSequence:
    """
    Load ``scene_source`` or generate replica ``replica`` (scene seed + replica).

    Raises:
        ConfigurationError: If loaded frames do not match the configured scene shape
    """
    if config.scene_source:
        sequence = read_sequence(config.scene_source)
        first = sequence.frames[0]
        if (first.channels, first.size) != (config.scene.channels, config.scene.image_size):
            raise ConfigurationError(
                f"frames in '{config.scene_source}' are {first.channels}x{first.size}, "
                f"config expects {config.scene.channels}x{config.scene.image_size}"
            )
        return sequence
    scene = config.scene.model_copy(update={"seed": config.scene.seed + replica})
    return synthgen.generate(scene)


def _check_invariants(session: TrackerSession, frame: int) -> None:
    capacities = session.config.memory.capacities
    sizes = session.pool.sizes
    if any(size > cap for size, cap in zip(sizes, capacities)):
        raise StateError(f"memory capacity exceeded at frame {frame}: {sizes}", state="capacity")
    results = session.stats.results
    if results and not np.all(np.isfinite(results[-1].cue)):
        raise StateError(f"non-finite cue token at frame {frame}", state="cue")


def track_sequence(
    config: RunConfig, params: TrackerParams, sequence: TrackingSequence, name: str
) -> SequenceOutcome:
    """
    Track one sequence from its first-frame box.

    Frame 0 provides the template; its reported box is the initial box.

    Args:
        config: Run configuration
        params: Tracker weights
        sequence: Frames and ground truth
        name: Sequence name used in logs and reports

    Returns:
        SequenceOutcome with predictions, report and checkpoint snapshots
    """
    session = TrackerSession(params, config, sequence_name=name)
    first_box = sequence.groundtruth[0]
    assert first_box is not None
    session.initialize(sequence.frames[0], first_box)

    checkpoints = set(config.snapshot_frames)
    snapshots: Dict[int, MemorySnapshot] = {}
    predictions: List[Optional[BoundingBox]] = [first_box]
    if 0 in checkpoints:
        snapshots[0] = session.pool.snapshot()

    for frame, target in zip(sequence.frames[1:], sequence.groundtruth[1:]):
        predictions.append(session.track_frame(frame, target))
        _check_invariants(session, frame.index)
        if frame.index in checkpoints:
            snapshots[frame.index] = session.pool.snapshot()

    report = evaluate_sequence(predictions, sequence.groundtruth, name=name)
    report = report.model_copy(
        update={
            "mean_focal_loss": session.stats.mean_focal,
            "mean_regression_loss": session.stats.mean_regression,
            "clamped_frames": session.stats.clamped_frames,
            "memory_sizes": session.pool.sizes,
        }
    )
    logger.info(
        "Sequence tracked",
        extra={
            "sequence": name,
            "frames": len(sequence),
            "precision_rate": report.precision_rate,
            "success_auc": report.success_auc,
        },
    )
    return SequenceOutcome(
        name=name,
        predictions=predictions,
        groundtruth=list(sequence.groundtruth),
        report=report,
        snapshots=snapshots,
    )


def _track_replica(job: Tuple[RunConfig, int]) -> SequenceOutcome:
    config, replica = job
    params = build_params(config)
    return track_sequence(config, params, load_sequence(config, replica), sequence_name(replica))


def run(config: RunConfig, jobs: int = 1) -> Tuple[RunReport, List[SequenceOutcome]]:
    """
    Track every sequence replica of a run.

    Replicas are independent; with ``jobs > 1`` they run in worker
    processes and results are collected in replica order.

    Returns:
        Tuple of (run report, per-sequence outcomes)
    """
    work = [(config, replica) for replica in range(config.sequences)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_track_replica, work))
    else:
        outcomes = [_track_replica(job) for job in work]

    report = RunReport(
        seed=config.seed,
        fusion=config.adapter.fusion,
        records=[outcome.report for outcome in outcomes],
        aggregate=aggregate_reports([outcome.report for outcome in outcomes]),
        parameter_counts=param_repo.count_parameters(build_params(config)),
    )
    return report, outcomes


def write_outputs(
    output_dir: Path, config: RunConfig, report: RunReport, outcomes: List[SequenceOutcome]
) -> None:
    """Write per-sequence files, report.json and the resolved config."""
    output_dir.mkdir(parents=True, exist_ok=True)
    for outcome in outcomes:
        directory = output_dir / outcome.name
        (directory / "snapshots").mkdir(parents=True, exist_ok=True)
        box_file_repo.write_box_file(directory / "boxes.txt", outcome.predictions)
        box_file_repo.write_box_file(directory / "groundtruth.txt", outcome.groundtruth)
        for frame, snapshot in sorted(outcome.snapshots.items()):
            path = directory / "snapshots" / f"frame_{frame:04d}.txt"
            snapshot_repo.write_snapshot(path, snapshot)

    (output_dir / REPORT_FILE).write_text(
        json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    (output_dir / RESOLVED_CONFIG_FILE).write_text(dump_run_config(config), encoding="utf-8")
    logger.info(
        "Run outputs written",
        extra={"output_dir": str(output_dir), "sequences": len(outcomes)},
    )
