"""YAML loading that remembers where every value came from.

Reference data and overlays are hand-edited, so validation errors must
point at a file and line. ``load`` returns plain Python data plus a
``Located`` lookup from key paths to 1-based line numbers.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Union

import yaml

KeyPath = tuple[Union[str, int], ...]


class SchemaError(ValueError):
    """A structured data file failed validation."""

    def __init__(self, path: Union[str, Path], line: int | None, reason: str):
        self.path = str(path)
        self.line = line
        self.reason = reason
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {reason}")


class Located:
    def __init__(self, path: Union[str, Path], lines: dict[KeyPath, int]):
        self.path = str(path)
        self.lines = lines

    def line(self, keypath: KeyPath) -> int | None:
        # Fall back to the nearest enclosing node that has a position.
        while keypath not in self.lines and keypath:
            keypath = keypath[:-1]
        return self.lines.get(keypath)

    def error(self, keypath: KeyPath, reason: str) -> SchemaError:
        return SchemaError(self.path, self.line(keypath), reason)


def _scalar(node: yaml.Node) -> Any:
    return yaml.constructor.SafeConstructor().construct_object(node, deep=True)


def _convert(node: yaml.Node, keypath: KeyPath, lines: dict[KeyPath, int]) -> Any:
    lines[keypath] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            key = _scalar(key_node)
            if key in out:
                raise SchemaError("", key_node.start_mark.line + 1, f"duplicate key {key!r}")
            out[key] = _convert(value_node, keypath + (key,), lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_convert(item, keypath + (i,), lines) for i, item in enumerate(node.value)]
    return _scalar(node)


def loads(text: str, path: Union[str, Path] = "<string>") -> tuple[Any, Located]:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise SchemaError(path, line, f"invalid YAML: {exc.problem}") from exc
    lines: dict[KeyPath, int] = {}
    if root is None:
        return None, Located(path, lines)
    try:
        data = _convert(root, (), lines)
    except SchemaError as exc:
        raise SchemaError(path, exc.line, exc.reason) from None
    return data, Located(path, lines)


def load(path: Union[str, Path]) -> tuple[Any, Located]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(path, None, f"cannot read file: {exc.strerror}") from exc
    return loads(text, path)


def require_mapping(data: Any, loc: Located, keypath: KeyPath = ()) -> dict:
    if not isinstance(data, dict):
        raise loc.error(keypath, "expected a mapping")
    return data


def require_number(
    data: dict, key: str, loc: Located, keypath: KeyPath = (), *, minimum: float | None = None,
    strict: bool = False, maximum: float | None = None,
) -> float:
    if key not in data:
        raise loc.error(keypath, f"missing required key {key!r}")
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise loc.error(keypath + (key,), f"{key!r} must be a number, got {value!r}")
    value = float(value)
    if minimum is not None:
        if strict and not value > minimum:
            raise loc.error(keypath + (key,), f"{key!r} must be > {minimum}, got {value}")
        if not strict and not value >= minimum:
            raise loc.error(keypath + (key,), f"{key!r} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise loc.error(keypath + (key,), f"{key!r} must be <= {maximum}, got {value}")
    return value


def check_schema_version(data: dict, loc: Located, supported: int) -> None:
    version = data.get("schema_version")
    if version is None:
        raise loc.error((), "missing 'schema_version'")
    if version != supported:
        raise loc.error(("schema_version",), f"unsupported schema_version {version!r} (expected {supported})")
