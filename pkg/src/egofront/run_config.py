"""Run configuration files, overrides, hashing and run manifests.

Config files are INI text with sections ([data], [model], [train], [loss],
[conditioning]); section names only group keys, every key maps one-to-one
onto a dataclass field. `--set key=value` overrides win over file values.
"""

import configparser
import dataclasses
import datetime as dt
import hashlib
import json
import os
import types
import typing
from pathlib import Path
from typing import Any, Iterable

import egofront.config as cfg
from egofront.data.frames import hash_directory, hash_file
from egofront.data.layout import write_json
from egofront.errors import UsageError

RUN_MANIFEST = "run_manifest.json"
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def read_ini(path: Path) -> dict[str, str]:
    """Flatten every section of an INI file into one key -> raw string mapping."""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"Config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)
    flat: dict[str, str] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key in flat:
                raise UsageError(f"{path}: key '{key}' appears in more than one section")
            flat[key] = value
    return flat


def parse_overrides(items: Iterable[str]) -> dict[str, str]:
    overrides = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"Override '{item}' must look like key=value")
        overrides[key.strip()] = value.strip()
    return overrides


def _coerce(raw: str, annotation: Any, key: str):
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin in (typing.Union, types.UnionType):
        if raw.strip().lower() in ("", "none", "null"):
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(raw, inner[0], key)
    if annotation is bool:
        value = raw.strip().lower()
        if value in _TRUE:
            return True
        if value in _FALSE:
            return False
        raise UsageError(f"Config key '{key}': expected a boolean, got '{raw}'")
    try:
        if annotation is int:
            return int(raw)
        if annotation is float:
            return float(raw)
    except ValueError:
        raise UsageError(f"Config key '{key}': expected {annotation.__name__}, got '{raw}'")
    return raw.strip()


def build_dataclass(cls, values: dict[str, str]):
    """Instantiate `cls` from raw strings, coercing each value to its field type."""
    hints = typing.get_type_hints(cls)
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - fields)
    if unknown:
        raise UsageError(f"Unknown {cls.__name__} keys: {unknown}. Known: {sorted(fields)}")
    kwargs = {key: _coerce(raw, hints[key], key) for key, raw in values.items()}
    return cls(**kwargs)


def load_config(cls, path: Path | None = None, overrides: Iterable[str] = ()):
    values = read_ini(path) if path is not None else {}
    values.update(parse_overrides(overrides))
    return build_dataclass(cls, values)


def canonical_hash(payload: dict[str, Any]) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def data_root(default: Path | None = None) -> Path | None:
    value = os.environ.get(cfg.ENV_DATA_ROOT)
    return Path(value) if value else default


def default_device(requested: str | None = None, fallback: str = "cpu") -> str:
    """Explicit request, then $EGOFRONT_DEVICE, then `fallback`."""
    return requested or os.environ.get(cfg.ENV_DEVICE) or fallback


def hash_input(path: Path) -> str | None:
    path = Path(path)
    if path.is_dir():
        return hash_directory(path)
    if path.is_file():
        return hash_file(path)
    return None


def write_run_manifest(
    out_dir: Path,
    command: str,
    args: dict[str, Any],
    *,
    config_hash: str | None = None,
    seed: int | None = None,
    inputs: Iterable[Path] = (),
    outputs: Iterable[Path] = (),
) -> Path:
    manifest = {
        "command": command,
        "args": {k: (str(v) if isinstance(v, Path) else v) for k, v in args.items()},
        "config_hash": config_hash,
        "seed": seed,
        "inputs": {str(p): hash_input(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "timestamp": dt.datetime.now(dt.timezone.utc).isoformat(),
    }
    return write_json(Path(out_dir) / RUN_MANIFEST, manifest)
