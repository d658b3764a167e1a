"""Flat ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored. Keys are the
:class:`~iterlearn.engine.ExperimentConfig` field names (``lambda`` is
accepted for ``lam``); values given on the command line override the file.
"""

from __future__ import annotations

import dataclasses
import types
import typing
from pathlib import Path

from .engine import ExperimentConfig
from .errors import ConfigError

ALIASES = {"lambda": "lam"}

_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_HINTS = typing.get_type_hints(ExperimentConfig)

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def config_keys() -> list[str]:
    return list(_FIELDS)


def _base_type(hint):
    if isinstance(hint, types.UnionType) or typing.get_origin(hint) is typing.Union:
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        return args[0], True
    return hint, False


def coerce(key: str, raw) -> object:
    """Convert a textual value to the type of config field ``key``."""
    key = ALIASES.get(key, key)
    if key not in _FIELDS:
        raise ConfigError(f"{key}: unknown key; expected one of {sorted(_FIELDS)}")
    if not isinstance(raw, str):
        return raw
    kind, optional = _base_type(_HINTS[key])
    text = raw.strip()
    if optional and text.lower() in ("", "none", "default"):
        return None
    try:
        if kind is bool:
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {kind.__name__}") from None
    return text


def parse_lines(lines, source: str = "<config>") -> dict:
    values: dict = {}
    for lineno, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        key = ALIASES.get(key, key)
        if key in values:
            raise ConfigError(f"{source}:{lineno}: {key}: duplicate key")
        try:
            values[key] = coerce(key, raw)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def read_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    return parse_lines(text.splitlines(), str(path))


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a validated config from an optional file plus overriding values."""
    values = read_config_file(path) if path is not None else {}
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        key = ALIASES.get(key, key)
        values[key] = coerce(key, raw)
    return ExperimentConfig(**values)


def format_config(cfg: ExperimentConfig) -> str:
    """Render ``cfg`` in the file format; :func:`parse_config` reads it back unchanged."""
    lines = []
    for key, value in cfg.to_dict().items():
        lines.append(f"{key} = {_render(value)}")
    return "\n".join(lines) + "\n"


def _render(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)
