"""Bundled example inputs.

The package ships a self-contained week of data so every command can run
out of the box: a 7-day forcing file at 5-minute resolution, the matching
default cell geometry, and a synthetic measurement series drawn from the
model at a known parameter point (documented in the *_truth.json sidecar).

Config files refer to these as ``builtin:<name>``; plain paths are left
untouched.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .errors import ConfigError

BUILTIN_PREFIX = "builtin:"

_FILES = {
    "forcing_7day": "forcing_7day.csv",
    "geometry_default": "geometry_default.conf",
    "measurements_7day": "measurements_7day.csv",
    "measurements_7day_truth": "measurements_7day_truth.json",
}


def builtin_names() -> list[str]:
    return sorted(_FILES)


def builtin_path(name: str) -> Path:
    """Filesystem path of a bundled file; ConfigError for unknown names."""
    if name not in _FILES:
        raise ConfigError(f"unknown builtin resource {name!r}; available: "
                          f"{', '.join(builtin_names())}")
    record = resources.files("thermocal.data").joinpath(_FILES[name])
    with resources.as_file(record) as concrete:
        return Path(concrete)


def resolve_path(spec: str | Path) -> Path:
    """Map 'builtin:<name>' to the bundled file, pass other paths through."""
    text = str(spec)
    if text.startswith(BUILTIN_PREFIX):
        return builtin_path(text[len(BUILTIN_PREFIX):])
    return Path(spec)
