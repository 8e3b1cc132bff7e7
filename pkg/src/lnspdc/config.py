"""Sectioned key-value configuration files.

Format: INI-style sections, ``key = value`` lines, ``#`` comments, UTF-8.
Every consumer declares the keys it accepts; anything else is a hard error
so that typos never fall back to silent defaults.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from pathlib import Path
from typing import Any, Callable, Mapping

from .errors import ConfigError

Schema = Mapping[str, Mapping[str, Callable[[str], Any]]]


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        interpolation=None,
        empty_lines_in_values=False,
    )
    cp.optionxform = str  # keep key case
    return cp


def read_text(text: str, source: str = "<string>") -> dict[str, dict[str, str]]:
    """Parse config text into ``{section: {key: raw_value}}``."""
    cp = _parser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return {name: dict(cp.items(name)) for name in cp.sections()}


def read_file(path: str | Path) -> dict[str, dict[str, str]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return read_text(text, source=str(path))


def float_list(value: str) -> list[float]:
    value = value.strip()
    if not value:
        return []
    try:
        return [float(v) for v in value.split(",")]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {value!r}") from exc


def float_pair(value: str) -> tuple[float, float]:
    vals = float_list(value)
    if len(vals) != 2:
        raise ConfigError(f"expected two numbers, got {value!r}")
    return vals[0], vals[1]


def float_range(value: str) -> tuple[float, float, float]:
    """``start, stop, step`` triple."""
    vals = float_list(value)
    if len(vals) != 3 or vals[2] <= 0:
        raise ConfigError(f"expected 'start, stop, step' with step > 0, got {value!r}")
    return vals[0], vals[1], vals[2]


def boolean(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


def validate(raw: Mapping[str, Mapping[str, str]], schema: Schema,
             required: Mapping[str, set[str]] | None = None) -> dict[str, dict[str, Any]]:
    """Convert raw strings with ``schema`` converters.

    Sections or keys absent from the schema raise ``ConfigError``. Sections in
    the schema but missing from ``raw`` are returned empty so callers can apply
    defaults explicitly.
    """
    out: dict[str, dict[str, Any]] = {}
    for section, items in raw.items():
        if section not in schema:
            raise ConfigError(f"unknown section [{section}]; allowed: {sorted(schema)}")
        conv = schema[section]
        typed: dict[str, Any] = {}
        for key, value in items.items():
            if key not in conv:
                raise ConfigError(f"unknown key {key!r} in [{section}]; allowed: {sorted(conv)}")
            try:
                typed[key] = conv[key](value)
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
        out[section] = typed
    for section in schema:
        out.setdefault(section, {})
    for section, keys in (required or {}).items():
        missing = keys - set(out.get(section, {}))
        if missing:
            raise ConfigError(f"[{section}] missing required keys: {sorted(missing)}")
    return out


def config_hash(raw: Mapping[str, Mapping[str, str]]) -> str:
    """SHA-256 of the parsed config; stable under section and key reordering."""
    canon = json.dumps({s: dict(sorted(v.items())) for s, v in raw.items()},
                       sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
