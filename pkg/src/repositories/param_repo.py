"""
Parameter files: ``.npz`` archives keyed by flat dotted paths.

A parameter container (nested frozen dataclasses of arrays) flattens to keys
such as ``fmfm.freq_rgb.decomp_conv.kernel`` or ``mfm_layers.0.conv_out.bias``.
Loading rebuilds a container of the same structure from a template, so
non-array fields (stride, padding, pool window, ...) come from the template.
"""

import dataclasses
from pathlib import Path
from typing import Any, Dict, Mapping, TypeVar, Union

import numpy as np

from src.core.exceptions import ArgumentError, ParameterFileError
from src.core.logging_config import get_logger
from src.services.tracker import TrackerParams

logger = get_logger(__name__)

P = TypeVar("P")

# Inference statistics, not tunable weights.
NON_TUNABLE = ("running_mean", "running_var")


def flatten_params(params: Any, prefix: str = "") -> Dict[str, np.ndarray]:
    """Map every array inside a parameter container to its dotted path."""
    flat: Dict[str, np.ndarray] = {}
    if isinstance(params, np.ndarray):
        flat[prefix] = params
    elif dataclasses.is_dataclass(params):
        for f in dataclasses.fields(params):
            key = f"{prefix}.{f.name}" if prefix else f.name
            flat.update(flatten_params(getattr(params, f.name), key))
    elif isinstance(params, tuple):
        for i, item in enumerate(params):
            flat.update(flatten_params(item, f"{prefix}.{i}" if prefix else str(i)))
    return flat


def _rebuild(template: Any, arrays: Mapping[str, np.ndarray], prefix: str) -> Any:
    if isinstance(template, np.ndarray):
        if prefix not in arrays:
            raise ParameterFileError(f"missing parameter '{prefix}'", key=prefix)
        value = np.asarray(arrays[prefix], dtype=np.float64)
        if value.shape != template.shape:
            raise ParameterFileError(
                f"parameter '{prefix}' has shape {value.shape}, expected {template.shape}",
                key=prefix,
            )
        return value
    if dataclasses.is_dataclass(template):
        changes = {}
        for f in dataclasses.fields(template):
            key = f"{prefix}.{f.name}" if prefix else f.name
            changes[f.name] = _rebuild(getattr(template, f.name), arrays, key)
        try:
            return dataclasses.replace(template, **changes)  # type: ignore[type-var]
        except ArgumentError as e:
            raise ParameterFileError(
                f"invalid parameters under '{prefix}': {e.message}", key=prefix
            )
    if isinstance(template, tuple):
        return tuple(
            _rebuild(item, arrays, f"{prefix}.{i}" if prefix else str(i))
            for i, item in enumerate(template)
        )
    return template


def unflatten_params(template: P, arrays: Mapping[str, np.ndarray]) -> P:
    """
    Rebuild a container shaped like ``template`` from flat arrays.

    Raises:
        ParameterFileError: On a missing key, a shape mismatch or an unexpected key
    """
    expected = set(flatten_params(template))
    unexpected = sorted(set(arrays) - expected)
    if unexpected:
        raise ParameterFileError(f"unexpected parameter '{unexpected[0]}'", key=unexpected[0])
    result: P = _rebuild(template, arrays, "")
    return result


def save_params(path: Union[str, Path], params: Any) -> None:
    np.savez(path, **flatten_params(params))


def load_params(path: Union[str, Path], template: P) -> P:
    """
    Load a parameter file into the structure of ``template``.

    Raises:
        ParameterFileError: If the file cannot be read or does not match the template
    """
    try:
        with np.load(path, allow_pickle=False) as archive:
            arrays = {key: archive[key] for key in archive.files}
    except (OSError, ValueError) as e:
        raise ParameterFileError(f"cannot read parameter file '{path}': {e}") from e
    params = unflatten_params(template, arrays)
    logger.info("Parameters loaded", extra={"path": str(path), "arrays": len(arrays)})
    return params


def _count(params: Any) -> int:
    return int(
        sum(
            array.size
            for key, array in flatten_params(params).items()
            if key.rsplit(".", 1)[-1] not in NON_TUNABLE
        )
    )


def count_parameters(params: TrackerParams) -> Dict[str, int]:
    """
    Parameter counts per component.

    ``tunable`` covers the visual adapter and the memory filter, the parts
    trained on top of a frozen encoder and head.
    """
    counts = {
        "patch_embed": _count(params.encoder.patch_embed),
        "encoder_blocks": _count(params.encoder.blocks),
        "head": _count(params.head),
        "visual_adapter": _count(params.adapter.fmfm) + _count(params.adapter.mfm_layers),
        "memory_filter": _count(params.adapter.filter),
    }
    counts["tunable"] = counts["visual_adapter"] + counts["memory_filter"]
    counts["total"] = sum(v for k, v in counts.items() if k != "tunable")
    return counts
