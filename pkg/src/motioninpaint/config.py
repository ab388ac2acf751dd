"""Flat ``key = value`` run configuration.

Keys are the fields of :class:`EnergyConfig` and :class:`PyramidSpec`
plus the fields of :class:`FlowSolverParams` prefixed with ``flow_``.
Blank lines and ``#`` comments are ignored.
"""
from __future__ import annotations

import dataclasses
import typing
from pathlib import Path

from .energy import EnergyConfig
from .flow import FlowSolverParams
from .multires import PyramidSpec

SECTIONS = (("", EnergyConfig), ("", PyramidSpec), ("flow_", FlowSolverParams))


class ConfigError(ValueError):
    """Unknown key or unparsable value; the message names the key."""


def _fields():
    out = {}
    for prefix, cls in SECTIONS:
        hints = typing.get_type_hints(cls)
        for f in dataclasses.fields(cls):
            out[prefix + f.name] = (cls, f.name, hints[f.name], f.default)
    return out


FIELDS = _fields()


def _parse_value(key, text, kind):
    text = text.strip()
    if kind is typing.Optional[str]:
        return None if text.lower() in ("", "none", "default") else text
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind.__name__}") from None
    return text


def parse_config_text(text, source="<config>"):
    """Raw ``{key: value}`` strings from config text."""
    values = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in FIELDS:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        values[key] = value
    return values


def read_config(path):
    return parse_config_text(Path(path).read_text(), str(path))


@dataclasses.dataclass(frozen=True)
class RunConfig:
    energy: EnergyConfig = EnergyConfig()
    pyramid: PyramidSpec = PyramidSpec()
    flow: FlowSolverParams = FlowSolverParams()

    @classmethod
    def from_values(cls, values):
        """Build from ``{key: value}``; values may be strings or already typed."""
        changes = {EnergyConfig: {}, PyramidSpec: {}, FlowSolverParams: {}}
        for key, value in values.items():
            if key not in FIELDS:
                raise ConfigError(f"unknown key {key!r}")
            owner, name, kind, _ = FIELDS[key]
            if isinstance(value, str):
                value = _parse_value(key, value, kind)
            changes[owner][name] = value
        built = {}
        for attr, owner in (("energy", EnergyConfig), ("pyramid", PyramidSpec), ("flow", FlowSolverParams)):
            try:
                built[attr] = owner(**changes[owner])
            except (ValueError, TypeError) as exc:
                raise ConfigError(str(exc)) from None
        return cls(**built)

    def items(self):
        for prefix, obj in (("", self.energy), ("", self.pyramid), ("flow_", self.flow)):
            for f in dataclasses.fields(obj):
                yield prefix + f.name, getattr(obj, f.name)

    def to_text(self):
        return "".join(f"{k} = {'none' if v is None else v}\n" for k, v in self.items())
