"""Key-value configuration files.

Files are ``key = value`` lines with ``#`` comments; a value may continue on
indented lines and list values are whitespace separated. No section headers.
"""

from __future__ import annotations

import configparser
from pathlib import Path


class ConfigError(ValueError):
    """A configuration file or option is invalid."""


def read_kv(path: str | Path) -> dict[str, str]:
    text = Path(path).read_text(encoding="utf-8")
    return parse_kv(text, source=str(path))


def parse_kv(text: str, source: str = "<string>") -> dict[str, str]:
    parser = configparser.ConfigParser(
        interpolation=None, delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=None
    )
    parser.optionxform = str
    try:
        parser.read_string("[kv]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return dict(parser["kv"])


def as_list(value: str | None) -> list[str]:
    return value.split() if value else []


def as_bool(value: str | None, default: bool = False) -> bool:
    if value is None:
        return default
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")
