"""Loading run configurations from JSON files or bundled presets.

A configuration document mirrors :meth:`SimConfig.to_dict`: top-level run
settings plus ``topology``, ``traffic`` and ``reconfig`` sections. Scalar
fields can be overridden with ``key=value`` strings where ``key`` is either
dotted (``traffic.load_scale``) or a bare field name that is unique across
sections (``load_scale``).
"""
from __future__ import annotations

import json
from dataclasses import fields
from importlib import resources
from pathlib import Path

from .engine import SimConfig
from .exceptions import ConfigError
from .reconfig import ReconfigParams
from .topology import TopologyParams
from .traffic import TrafficParams

SECTIONS = {"topology": TopologyParams, "traffic": TrafficParams, "reconfig": ReconfigParams}


def preset_names() -> list[str]:
    root = resources.files("rodca") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def read_document(source) -> dict:
    """JSON document from a path, or from a bundled preset when no such file exists."""
    path = Path(source)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
        origin = str(path)
    else:
        name = str(source)[:-5] if str(source).endswith(".json") else str(source)
        if name not in preset_names():
            raise ConfigError(f"no config file or preset named {source!r} "
                              f"(presets: {', '.join(preset_names())})", field="config")
        text = (resources.files("rodca") / "presets" / f"{name}.json").read_text(encoding="utf-8")
        origin = f"preset {name}"
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{origin}: invalid JSON ({exc})", field="config") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{origin}: top level must be an object", field="config")
    return doc


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def resolve_key(key: str) -> tuple[str | None, str]:
    """Map a dotted or bare field name to ``(section, field)``; section None is top level."""
    if "." in key:
        section, name = key.split(".", 1)
        if section not in SECTIONS:
            raise ConfigError(f"unknown section {section!r} in {key!r}", field=key)
        if name not in {f.name for f in fields(SECTIONS[section])}:
            raise ConfigError(f"unknown field {key!r}", field=key)
        return section, name
    top = {f.name for f in fields(SimConfig)} - set(SECTIONS)
    hits = [(None, key)] if key in top else []
    hits += [(s, key) for s, k in SECTIONS.items() if key in {f.name for f in fields(k)}]
    if not hits:
        raise ConfigError(f"unknown field {key!r}", field=key)
    if len(hits) > 1:
        raise ConfigError(f"ambiguous field {key!r}; use a dotted name", field=key)
    return hits[0]


def set_field(doc: dict, key: str, value) -> dict:
    """Copy of ``doc`` with one field replaced."""
    section, name = resolve_key(key)
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in doc.items()}
    if section is None:
        out[name] = value
    else:
        out.setdefault(section, {})[name] = value
    return out


def apply_overrides(doc: dict, overrides=()) -> dict:
    """Apply ``key=value`` strings in order."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value", field=item)
        key, text = item.split("=", 1)
        doc = set_field(doc, key.strip(), _parse_value(text.strip()))
    return doc


def build_config(doc: dict) -> SimConfig:
    return SimConfig.from_dict(doc)


def load_config(source, overrides=()) -> SimConfig:
    return build_config(apply_overrides(read_document(source), overrides))
