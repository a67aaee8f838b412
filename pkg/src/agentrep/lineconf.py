"""Line-based `key: value` configuration format shared across the artifact.

Regime documents, policy/aggregation config files, and scenario files all
use the same grammar: UTF-8 text, one `key: value` pair per line, list
values comma-separated, `#` starts a comment line, `[name]` opens a block
section (used only by scenario files).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Entry:
    line: int           # 1-based
    kind: str           # "kv" or "section"
    key: str            # kv key, or section name
    value: str = ""
    key_col: int = 1    # 1-based column of the key / section start
    value_col: int = 1  # 1-based column where the value text begins


@dataclass(frozen=True)
class LineError:
    line: int
    col: int
    message: str


def parse(text: str) -> tuple[list[Entry], list[LineError]]:
    entries: list[Entry] = []
    errors: list[LineError] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        indent = len(raw) - len(raw.lstrip())
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip()
            if not name:
                errors.append(LineError(number, indent + 1, "empty section header"))
                continue
            entries.append(Entry(number, "section", name, key_col=indent + 1))
            continue
        if ":" not in stripped:
            errors.append(LineError(number, indent + 1, "expected 'key: value'"))
            continue
        key, _, value = stripped.partition(":")
        key = key.strip()
        if not key:
            errors.append(LineError(number, indent + 1, "empty key"))
            continue
        value_offset = raw.index(":") + 1
        value_col = value_offset + 1 + (len(value) - len(value.lstrip()))
        entries.append(
            Entry(number, "kv", key, value.strip(), key_col=indent + 1, value_col=value_col)
        )
    return entries, errors


def split_list(value: str) -> list[str]:
    """Split a comma-separated list value, dropping empty items."""
    return [item.strip() for item in value.split(",") if item.strip()]


def parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {value!r}")
