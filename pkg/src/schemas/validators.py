"""Custom validators shared by the configuration models."""

import math
from typing import Sequence, Tuple

TIER_NAMES = ("short", "long", "permanent")


def validate_divisor(value: int, divisor: int, what: str) -> bool:
    """
    Validate that ``divisor`` divides ``value``.

    Raises:
        ValueError: If it does not
    """
    if divisor <= 0 or value % divisor != 0:
        raise ValueError(f"{what}: {divisor} must be a positive divisor of {value}")
    return True


def validate_perfect_square(count: int, what: str) -> bool:
    """
    Validate that a token count fills a square grid.

    Raises:
        ValueError: If the count is not a perfect square
    """
    side = math.isqrt(count)
    if side * side != count:
        raise ValueError(f"{what}: token count {count} is not a perfect square")
    return True


def validate_tiers(tiers: Sequence[str]) -> Tuple[str, ...]:
    """
    Validate and normalize a memory tier selection.

    Returns:
        Tier names in canonical short/long/permanent order

    Raises:
        ValueError: On unknown names, duplicates or an empty selection
    """
    unknown = set(tiers) - set(TIER_NAMES)
    if unknown:
        raise ValueError(f"Unknown memory tiers: {sorted(unknown)}. Use {list(TIER_NAMES)}")
    if len(set(tiers)) != len(tiers):
        raise ValueError("Memory tiers must not repeat")
    if not tiers:
        raise ValueError("At least one memory tier must be enabled")
    return tuple(name for name in TIER_NAMES if name in tiers)


def validate_windows(windows: Sequence[Tuple[int, int]], n_frames: int) -> bool:
    """
    Validate occlusion windows [start, stop) against a sequence length.

    Frame 0 provides the template and may not be occluded.

    Raises:
        ValueError: If a window is empty, out of range or covers frame 0
    """
    for start, stop in windows:
        if not 0 <= start < stop <= n_frames:
            raise ValueError(f"Occlusion window [{start}, {stop}) outside [0, {n_frames})")
        if start == 0:
            raise ValueError("Occlusion windows may not cover frame 0 (template frame)")
    return True
