"""Command-line entry point: run, eval, gen and selftest."""

import argparse
import sys
from pathlib import Path
from typing import Callable, List, Optional

from src.core.config import settings
from src.core.exceptions import VALIDATION_ERRORS, TrackerError
from src.core.logging_config import get_logger, setup_logging
from src.repositories.box_file_repo import read_box_pair
from src.repositories.config_document import load_run_config
from src.repositories.sequence_repo import write_sequence
from src.schemas.run_config import RunConfig
from src.services import runner, synthgen
from src.services.metrics import DEFAULT_PR_THRESHOLD, DEFAULT_SR_THRESHOLD, evaluate_sequence
from src.services.selftest import run_selftest

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _load_config(path: Optional[str], seed: Optional[int] = None) -> RunConfig:
    config = load_run_config(path) if path else RunConfig()
    if seed is not None:
        # The seed flag reseeds both the weights and the scene.
        scene = config.scene.model_copy(update={"seed": seed})
        config = config.model_copy(update={"seed": seed, "scene": scene})
    return config


def cmd_run(args: argparse.Namespace) -> int:
    """Track every configured sequence and write boxes, snapshots and the report."""
    config = _load_config(args.config, args.seed)
    if args.output:
        config = config.model_copy(update={"output_dir": args.output})
    report, outcomes = runner.run(config, jobs=args.jobs)
    runner.write_outputs(Path(config.output_dir), config, report, outcomes)

    aggregate = report.aggregate
    print(
        f"{len(outcomes)} sequence(s) -> {config.output_dir}: "
        f"PR {aggregate.precision_rate:.4f}  SR {aggregate.success_rate:.4f}  "
        f"AUC {aggregate.success_auc:.4f}  F {aggregate.f_score:.4f}"
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    """Evaluate a prediction box file against ground truth."""
    predictions, groundtruth = read_box_pair(args.pred, args.gt)
    report = evaluate_sequence(
        predictions,
        groundtruth,
        pr_threshold=args.pr_threshold,
        sr_threshold=args.sr_threshold,
        name=Path(args.pred).stem,
    )
    document = report.model_dump_json(indent=2)
    print(document)
    if args.output:
        Path(args.output).write_text(document + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    """Generate one synthetic sequence directory from the scene section of a config."""
    config = _load_config(args.config, args.seed)
    sequence = synthgen.generate(config.scene)
    target = write_sequence(args.output, sequence, config.scene)
    print(f"{len(sequence)} frames -> {target}")
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    """Run the oracle suite and print the pass/fail table."""
    result = run_selftest(args.config)
    result.print_report(sys.stdout)
    return EXIT_OK if result.passed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.app_name,
        description="Visual and memory dual adapter tracking on synthetic multi-modal sequences.",
    )
    parser.add_argument("--log-level", default=None, help="Override TRACKER_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Track sequences and write outputs")
    run.add_argument("--config", help="Config document (defaults are used if omitted)")
    run.add_argument("--seed", type=int, help="Override the config seed")
    run.add_argument("--jobs", type=int, default=settings.default_jobs, help="Worker processes")
    run.add_argument("--output", help="Override the config output directory")
    run.set_defaults(handler=cmd_run)

    evaluate = commands.add_parser("eval", help="Evaluate a box file against ground truth")
    evaluate.add_argument("pred", help="Predicted box file")
    evaluate.add_argument("gt", help="Ground-truth box file")
    evaluate.add_argument(
        "--pr-threshold",
        type=float,
        default=DEFAULT_PR_THRESHOLD,
        help="Centre-error threshold in pixels (default: 20)",
    )
    evaluate.add_argument(
        "--sr-threshold",
        type=float,
        default=DEFAULT_SR_THRESHOLD,
        help="IoU threshold of the reported SR (default: 0.5)",
    )
    evaluate.add_argument("--output", help="Also write the JSON report to this file")
    evaluate.set_defaults(handler=cmd_eval)

    gen = commands.add_parser("gen", help="Write a synthetic sequence directory")
    gen.add_argument("--config", help="Config document whose scene section is used")
    gen.add_argument("--seed", type=int, help="Override the config seed")
    gen.add_argument("--output", required=True, help="Sequence directory to create")
    gen.set_defaults(handler=cmd_gen)

    selftest = commands.add_parser("selftest", help="Run the oracle and invariant suite")
    selftest.add_argument("--config", help="Also validate this config document")
    selftest.set_defaults(handler=cmd_selftest)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, dispatch the command and map errors to exit codes.

    Returns:
        0 on success, 1 on a validation failure, 2 on a runtime error
    """
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level)
    handler: Callable[[argparse.Namespace], int] = args.handler

    try:
        return handler(args)
    except VALIDATION_ERRORS as e:
        logger.error(e.message, extra={"error_type": e.error_type, "details": e.details})
        print(f"error: {e.message}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TrackerError, OSError) as e:
        message = e.message if isinstance(e, TrackerError) else str(e)
        logger.error(message, extra={"error_type": type(e).__name__})
        print(f"error: {message}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
