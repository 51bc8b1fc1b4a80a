"""
Config document codec (TOON dialect).

Run configurations are stored as indentation-based ``key: value`` documents:

    version: 1
    seed: 7
    memory:
      capacities [3]: 8, 8, 3
      tiers [2]: short, long
    scene:
      occlusions [1,]
        start, stop
        20, 28

Nested sections are indented by two spaces, inline primitive arrays are
written ``key [N]: a, b``, and lists of records are tabular arrays
``key [N,]`` followed by a header row and N value rows. ``#`` starts a
comment line.
"""

import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import ValidationError

from src.core.exceptions import ArgumentError, ConfigurationError
from src.core.logging_config import get_logger
from src.schemas.run_config import RunConfig, SceneConfig
from src.services.synthgen import validate_scene

logger = get_logger(__name__)

_KEY_LINE = re.compile(
    r"^(?P<key>[A-Za-z_][\w.-]*)\s*"
    r"(?:\[(?P<count>\d+)(?P<tabular>,?)\])?\s*"
    r"(?P<colon>:)?\s*(?P<value>.*)$"
)
_ARRAY_ITEM = re.compile(r'\s*("[^"]*"|[^,]+)\s*(?:,|$)')


class ToonEncodeOptions:
    """Options for encoding to TOON format."""

    def __init__(self, delimiter: str = ",", indent: int = 2):
        self.delimiter = delimiter
        self.indent = indent


class ToonDecodeOptions:
    """Options for decoding from TOON format."""

    def __init__(self, indent: int = 2, strict: bool = True):
        self.indent = indent
        self.strict = strict


def _decode_error(message: str, line: Optional[int] = None) -> ConfigurationError:
    if line is not None:
        message = f"{message} (line {line})"
    return ConfigurationError(message)


# ============================================================================
# ENCODING
# ============================================================================


def encode_to_toon(data: Dict[str, Any], options: Optional[ToonEncodeOptions] = None) -> str:
    """
    Convert a mapping to a TOON document.

    Args:
        data: Mapping of primitives, nested mappings, primitive lists and
            lists of uniform mappings
        options: Encoding options (delimiter, indent)

    Returns:
        TOON-formatted string ending with a newline
    """
    if options is None:
        options = ToonEncodeOptions()
    lines: List[str] = []

    def format_mapping(mapping: Dict[str, Any], level: int) -> None:
        prefix = " " * (options.indent * level)
        row_prefix = prefix + " " * options.indent
        for key, val in mapping.items():
            if isinstance(val, dict):
                lines.append(f"{prefix}{key}:")
                format_mapping(val, level + 1)
            elif isinstance(val, (list, tuple)) and val and isinstance(val[0], dict):
                # Tabular array (uniform records)
                columns = list(val[0].keys())
                if any(set(item.keys()) != set(columns) for item in val):
                    raise ConfigurationError(f"records under '{key}' are not uniform", key)
                lines.append(f"{prefix}{key} [{len(val)}{options.delimiter}]")
                lines.append(f"{row_prefix}{(options.delimiter + ' ').join(columns)}")
                for item in val:
                    values = [_format_primitive(item[c]) for c in columns]
                    lines.append(f"{row_prefix}{(options.delimiter + ' ').join(values)}")
            elif isinstance(val, (list, tuple)):
                formatted = [_format_primitive(v) for v in val]
                joined = (options.delimiter + " ").join(formatted)
                lines.append(f"{prefix}{key} [{len(val)}]: {joined}".rstrip())
            else:
                lines.append(f"{prefix}{key}: {_format_primitive(val)}")

    format_mapping(data, 0)
    return "\n".join(lines) + "\n"


def _format_primitive(value: Any) -> str:
    """Format a primitive value for TOON output."""
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        if _needs_quotes(value):
            return f'"{value}"'
        return value
    return str(value)


def _needs_quotes(value: str) -> bool:
    """Check if a string needs quotes in TOON format."""
    if not value:
        return True
    if value in ("true", "false", "null"):
        return True
    try:
        float(value)
        return True
    except ValueError:
        pass
    if value[0].isspace() or value[-1].isspace():
        return True
    return any(c in value for c in ':[],#"\n\r\t')


# ============================================================================
# DECODING
# ============================================================================


def decode_from_toon(text: str, options: Optional[ToonDecodeOptions] = None) -> Dict[str, Any]:
    """
    Convert a TOON document to a mapping.

    Args:
        text: TOON-formatted string
        options: Decoding options (indent, strict length checks)

    Returns:
        Nested dict of primitives, lists and dicts

    Raises:
        ConfigurationError: If the document is malformed; the message names the line
    """
    if options is None:
        options = ToonDecodeOptions()
    lines: List[Tuple[int, int, str]] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "\t" in raw[: len(raw) - len(raw.lstrip())]:
            raise _decode_error("tabs are not allowed in indentation", number)
        lines.append((number, len(raw) - len(raw.lstrip()), stripped))

    result, position = _parse_block(lines, 0, 0, options)
    if position != len(lines):
        number, _, _ = lines[position]
        raise _decode_error("unexpected indentation", number)
    return result


def _parse_block(
    lines: List[Tuple[int, int, str]], position: int, indent: int, options: ToonDecodeOptions
) -> Tuple[Dict[str, Any], int]:
    block: Dict[str, Any] = {}
    while position < len(lines):
        number, line_indent, text = lines[position]
        if line_indent < indent:
            break
        if line_indent > indent:
            raise _decode_error("unexpected indentation", number)

        match = _KEY_LINE.match(text)
        if match is None:
            raise _decode_error(f"cannot parse '{text}'", number)
        key = match.group("key")
        if key in block:
            raise _decode_error(f"duplicate key '{key}'", number)
        value = match.group("value")
        count = match.group("count")
        position += 1

        if count is not None and match.group("tabular"):
            if match.group("colon") or value:
                raise _decode_error(f"tabular array '{key}' takes no inline values", number)
            block[key], position = _parse_tabular_array(
                lines, position, indent + options.indent, int(count), options, number
            )
        elif count is not None:
            if not match.group("colon"):
                raise _decode_error(f"array '{key}' needs a ':'", number)
            items = _parse_primitive_array(value)
            if options.strict and len(items) != int(count):
                raise _decode_error(
                    f"array '{key}' declares {count} items but has {len(items)}", number
                )
            block[key] = items
        elif not match.group("colon"):
            raise _decode_error(f"missing ':' after '{key}'", number)
        elif value:
            block[key] = _parse_primitive(value)
        else:
            # Nested object (possibly empty)
            nested_indent = indent + options.indent
            if position < len(lines) and lines[position][1] > indent:
                block[key], position = _parse_block(lines, position, nested_indent, options)
            else:
                block[key] = {}
    return block, position


def _parse_primitive(value: str) -> Any:
    """Parse a primitive value from TOON string."""
    value = value.strip()
    if len(value) >= 2 and value.startswith('"') and value.endswith('"'):
        return value[1:-1]
    if value == "null":
        return None
    if value == "true":
        return True
    if value == "false":
        return False
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def _parse_primitive_array(value: str) -> List[Any]:
    """Parse an inline primitive array."""
    return [_parse_primitive(item) for item in _ARRAY_ITEM.findall(value) if item.strip()]


def _parse_tabular_array(
    lines: List[Tuple[int, int, str]],
    position: int,
    indent: int,
    count: int,
    options: ToonDecodeOptions,
    header_line: int,
) -> Tuple[List[Dict[str, Any]], int]:
    """Parse a tabular array: header row with column names, then value rows."""
    if count == 0:
        return [], position
    if position >= len(lines) or lines[position][1] != indent:
        raise _decode_error("tabular array needs an indented header row", header_line)
    columns = [col.strip() for col in lines[position][2].split(",")]
    position += 1

    items: List[Dict[str, Any]] = []
    while position < len(lines) and lines[position][1] == indent:
        number, _, text = lines[position]
        values = _parse_primitive_array(text)
        if len(values) != len(columns):
            raise _decode_error(f"expected {len(columns)} values, got {len(values)}", number)
        items.append(dict(zip(columns, values)))
        position += 1

    if options.strict and len(items) != count:
        raise _decode_error(
            f"tabular array declares {count} rows but has {len(items)}", header_line
        )
    return items, position


# ============================================================================
# RUN CONFIGURATION DOCUMENTS
# ============================================================================


def _validation_error(error: ValidationError) -> ConfigurationError:
    first = error.errors()[0]
    key = ".".join(str(part) for part in first["loc"])
    return ConfigurationError(f"{key or 'config'}: {first['msg']}", config_key=key or None)


def _check_scene_geometry(scene: SceneConfig) -> None:
    try:
        validate_scene(scene)
    except ArgumentError as e:
        raise ConfigurationError(f"scene: {e.message}", config_key="scene") from e


def parse_run_config(text: str) -> RunConfig:
    """
    Decode and validate a run configuration document.

    A generated scene must keep the target inside the image on every visible
    frame; this is skipped when ``scene_source`` names a sequence directory.

    Raises:
        ConfigurationError: On syntax errors, a missing version key or invalid values
    """
    data = decode_from_toon(text)
    if "version" not in data:
        raise ConfigurationError("config document has no 'version' key", config_key="version")
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise _validation_error(e) from e
    if config.scene_source is None:
        _check_scene_geometry(config.scene)
    return config


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Read a run configuration from disk."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read config '{path}': {e}") from e
    config = parse_run_config(text)
    logger.info("Run configuration loaded", extra={"path": str(path), "seed": config.seed})
    return config


def dump_run_config(config: RunConfig) -> str:
    """Encode a run configuration, every field resolved."""
    return encode_to_toon(config.model_dump(mode="json"))


def dump_scene_config(config: SceneConfig) -> str:
    return encode_to_toon({"version": 1, "scene": config.model_dump(mode="json")})


def parse_scene_config(text: str) -> SceneConfig:
    """
    Decode a ``scene.toon`` document.

    Raises:
        ConfigurationError: If the document is malformed or the scene invalid
    """
    data = decode_from_toon(text)
    try:
        scene = SceneConfig.model_validate(data.get("scene", {}))
    except ValidationError as e:
        raise _validation_error(e) from e
    _check_scene_geometry(scene)
    return scene
