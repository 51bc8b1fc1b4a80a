"""
Box file persistence.

One line per frame: ``frame_index x y w h`` (space separated floats) or
``frame_index absent``. Frame indices start at 0 and are contiguous.
"""

from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.config import settings
from src.core.exceptions import BoxFileError
from src.schemas.boxes import BoundingBox

ABSENT = "absent"

BoxList = List[Optional[BoundingBox]]


def format_box_line(index: int, box: Optional[BoundingBox]) -> str:
    if box is None:
        return f"{index} {ABSENT}"
    fmt = settings.float_format
    return f"{index} " + " ".join(format(v, fmt) for v in (box.x, box.y, box.w, box.h))


def format_box_file(boxes: Sequence[Optional[BoundingBox]]) -> str:
    return "".join(format_box_line(i, box) + "\n" for i, box in enumerate(boxes))


def parse_box_file(text: str, path: Optional[str] = None) -> BoxList:
    """
    Parse box-file text.

    Args:
        text: File contents
        path: Source path used in error details

    Returns:
        One entry per frame, None for absent frames

    Raises:
        BoxFileError: On a malformed line or a non-contiguous frame index;
            the message names the line
    """
    boxes: BoxList = []
    for number, raw in enumerate(text.splitlines(), start=1):
        fields = raw.split()
        if not fields:
            continue
        try:
            index = int(fields[0])
        except ValueError:
            raise BoxFileError(f"invalid frame index '{fields[0]}'", path=path, line=number)
        if index != len(boxes):
            raise BoxFileError(
                f"expected frame index {len(boxes)}, found {index}", path=path, line=number
            )

        if len(fields) == 2 and fields[1] == ABSENT:
            boxes.append(None)
            continue
        if len(fields) != 5:
            raise BoxFileError(
                f"expected 'index x y w h' or 'index {ABSENT}'", path=path, line=number
            )
        try:
            x, y, w, h = (float(v) for v in fields[1:])
        except ValueError:
            raise BoxFileError("box coordinates must be numbers", path=path, line=number)
        if not np.all(np.isfinite([x, y, w, h])) or w < 0 or h < 0:
            raise BoxFileError("box must be finite with non-negative size", path=path, line=number)
        boxes.append(BoundingBox(x=x, y=y, w=w, h=h))
    return boxes


def write_box_file(path: Union[str, Path], boxes: Sequence[Optional[BoundingBox]]) -> None:
    Path(path).write_text(format_box_file(boxes), encoding="utf-8")


def read_box_file(path: Union[str, Path]) -> BoxList:
    """
    Read a box file.

    Raises:
        BoxFileError: If the file cannot be read or is malformed
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise BoxFileError(f"cannot read box file: {e}", path=str(path)) from e
    return parse_box_file(text, str(path))


def read_box_pair(
    pred_path: Union[str, Path], gt_path: Union[str, Path]
) -> Tuple[BoxList, BoxList]:
    """
    Read a prediction file and its ground truth.

    Raises:
        BoxFileError: If either file is malformed or their lengths differ
    """
    predictions = read_box_file(pred_path)
    groundtruth = read_box_file(gt_path)
    if len(predictions) != len(groundtruth):
        raise BoxFileError(
            f"{len(predictions)} predicted frames but {len(groundtruth)} ground-truth frames",
            path=str(pred_path),
            line=min(len(predictions), len(groundtruth)) + 1,
        )
    return predictions, groundtruth
