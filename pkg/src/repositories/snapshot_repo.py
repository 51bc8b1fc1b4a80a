"""
Memory snapshot persistence.

Text format: a header line ``H N_s N_l N_p`` followed by N_s + N_l + N_p
token lines (short tier first, then long, then permanent), each holding H
whitespace-separated decimals written at full precision.
"""

from pathlib import Path
from typing import List, Union

import numpy as np

from src.core.config import settings
from src.core.exceptions import SnapshotFormatError
from src.services.memory import MemorySnapshot


def format_snapshot(snapshot: MemorySnapshot) -> str:
    fmt = settings.float_format
    n_s, n_l, n_p = snapshot.sizes
    lines = [f"{snapshot.dim} {n_s} {n_l} {n_p}"]
    for tier in (snapshot.short, snapshot.long, snapshot.permanent):
        lines.extend(" ".join(format(v, fmt) for v in token) for token in tier)
    return "\n".join(lines) + "\n"


def parse_snapshot(text: str) -> MemorySnapshot:
    """
    Parse snapshot text.

    Raises:
        SnapshotFormatError: On a malformed header, a wrong token count or a
            token line of the wrong width; the error names the line
    """
    lines = [line for line in text.splitlines()]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise SnapshotFormatError("empty snapshot", line=1)

    header = lines[0].split()
    try:
        dim, n_s, n_l, n_p = (int(v) for v in header)
    except ValueError:
        raise SnapshotFormatError("header must be 'H N_s N_l N_p'", line=1)
    if dim < 1 or min(n_s, n_l, n_p) < 0:
        raise SnapshotFormatError("header values out of range", line=1)
    if len(lines) - 1 != n_s + n_l + n_p:
        raise SnapshotFormatError(
            f"header announces {n_s + n_l + n_p} tokens, found {len(lines) - 1}", line=1
        )

    rows: List[np.ndarray] = []
    for number, line in enumerate(lines[1:], start=2):
        try:
            row = np.array([float(v) for v in line.split()], dtype=np.float64)
        except ValueError:
            raise SnapshotFormatError("token values must be decimals", line=number)
        if row.shape != (dim,) or not np.all(np.isfinite(row)):
            raise SnapshotFormatError(f"token line must hold {dim} finite values", line=number)
        rows.append(row)

    tokens = np.array(rows).reshape(len(rows), dim)
    return MemorySnapshot(
        dim=dim,
        short=tokens[:n_s],
        long=tokens[n_s : n_s + n_l],
        permanent=tokens[n_s + n_l :],
    )


def write_snapshot(path: Union[str, Path], snapshot: MemorySnapshot) -> None:
    Path(path).write_text(format_snapshot(snapshot), encoding="utf-8")


def read_snapshot(path: Union[str, Path]) -> MemorySnapshot:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise SnapshotFormatError(f"cannot read snapshot '{path}': {e}") from e
    return parse_snapshot(text)
