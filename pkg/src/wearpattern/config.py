"""Flat ``key = value`` run configuration with flag > file > default precedence."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

from .errors import ParameterError


class ConfigError(ParameterError):
    """Bad configuration; the CLI treats it as a usage error."""


@dataclass(frozen=True)
class Option:
    key: str
    type: Callable[[str], Any]
    default: Any
    help: str = ""
    choices: tuple | None = None

    @property
    def flag(self) -> str:
        return "--" + self.key.replace("_", "-")


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError(f"config line {lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def resolve(options: list[Option], flags: dict[str, Any], file_values: dict[str, str] | None = None) -> dict:
    """Merge defaults, config-file values and explicit flags (``None`` = not given)."""
    known = {o.key: o for o in options}
    file_values = file_values or {}
    unknown = sorted(set(file_values) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    resolved = {}
    for o in options:
        value = o.default
        if o.key in file_values:
            try:
                value = o.type(file_values[o.key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config key {o.key}: {exc}") from None
        if flags.get(o.key) is not None:
            value = flags[o.key]
        if o.choices is not None and value is not None and value not in o.choices:
            raise ConfigError(f"{o.key}: {value!r} not one of {list(o.choices)}")
        resolved[o.key] = value
    return resolved


def format_resolved(command: str, resolved: dict) -> str:
    lines = [f"command = {command}"]
    lines += [f"{k} = {resolved[k]}" for k in sorted(resolved)]
    return "\n".join(lines) + "\n"
