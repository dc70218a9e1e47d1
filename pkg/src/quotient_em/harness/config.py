"""Flat dotted-key configuration: `key = value` lines plus CLI overrides.

No nesting: a key is a dotted path string, a value is an int, float, bool,
comma-list of floats, or bare string.  The same coercion applies to config
files and `--override key=value` flags, so a file and a flag can never
disagree about types.
"""

from __future__ import annotations

from pathlib import Path

from ..errors import ConfigError

__all__ = ["coerce_value", "parse_config_file", "apply_overrides"]


def coerce_value(raw: str):
    s = raw.strip()
    if s.lower() in ("true", "false"):
        return s.lower() == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    if "," in s:
        parts = [p.strip() for p in s.split(",") if p.strip()]
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            return tuple(parts)
    return s


def parse_config_file(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    cfg: dict = {}
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{p}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = body.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{p}:{lineno}: empty key")
        if key in cfg:
            raise ConfigError(f"{p}:{lineno}: duplicate key {key!r}")
        cfg[key] = coerce_value(value)
    return cfg


def apply_overrides(cfg: dict, overrides) -> dict:
    out = dict(cfg)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"override has empty key: {item!r}")
        out[key] = coerce_value(value)
    return out
