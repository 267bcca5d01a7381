"""Scenario configuration: JSON schema, defaults and hashing."""
from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path

import jsonschema

from .morse import NO_MOLECULE_S

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

GRID_SCHEMA = {
    "type": "object",
    "properties": {
        "x_min": _NUM, "x_max": _NUM, "p_min": _NUM, "p_max": _NUM,
        "nx": {"type": "integer", "minimum": 2}, "n_p": {"type": "integer", "minimum": 2},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "morsedeco scenario",
    "type": "object",
    "required": ["coupling", "temperature", "initial", "t_max_t0"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "description": {"type": "string"},
        "s": _POS,
        "coupling": {
            "type": "object",
            "oneOf": [
                {"required": ["ratio"], "properties": {"ratio": _POS},
                 "additionalProperties": False},
                {"required": ["lambda"], "properties": {"lambda": _NONNEG},
                 "additionalProperties": False},
            ],
        },
        "temperature": _NONNEG,
        "initial": {
            "type": "object",
            "oneOf": [
                {"required": ["coherent"], "additionalProperties": False, "properties": {
                    "coherent": {"type": "array", "items": _NUM, "minItems": 1, "maxItems": 2}}},
                {"required": ["eigenstate"], "additionalProperties": False, "properties": {
                    "eigenstate": {"type": "integer", "minimum": 0}}},
                {"required": ["thermal"], "additionalProperties": False, "properties": {
                    "thermal": {"const": True}}},
            ],
        },
        "level": {"enum": ["full", "secular", "pauli"]},
        "engine": {"enum": ["auto", "step", "propagator"]},
        "t_max_t0": _POS,
        "samples_per_t0": {"type": "integer", "minimum": 1},
        "steps_per_period": {"type": "number", "minimum": 20},
        "dt": _POS,
        "sample_stride": {"type": "integer", "minimum": 1},
        "t0_convention": {"enum": ["classical", "orbital", "spacing"]},
        "positivity_tol": _NONNEG,
        "dissociation_threshold": _POS,
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "csv": {"type": "boolean"},
                "snapshots": {"type": "boolean"},
                "fit": {"type": "boolean"},
                "wigner": {
                    "type": "object",
                    "required": ["frame_times_t0"],
                    "additionalProperties": False,
                    "properties": {
                        "frame_times_t0": {"type": "array", "items": _NONNEG, "minItems": 1},
                        "grid": GRID_SCHEMA,
                    },
                },
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "smooth_window": {"type": "integer", "minimum": 1},
                "slope_ratio": _POS,
            },
        },
        "sweep": {
            "type": "object",
            "required": ["parameter", "values"],
            "additionalProperties": False,
            "properties": {
                "parameter": {"enum": ["x0", "temperature", "lambda", "ratio"]},
                "values": {"type": "array", "items": _NUM, "minItems": 1},
            },
        },
    },
    "dependencies": {"sample_stride": ["dt"], "dt": ["sample_stride"]},
}

DEFAULTS = {
    "name": "scenario",
    "s": NO_MOLECULE_S,
    "level": "full",
    "engine": "auto",
    "samples_per_t0": 10,
    "steps_per_period": 50,
    "t0_convention": "orbital",
    "positivity_tol": 1e-6,
    "dissociation_threshold": 1e-3,
    "outputs": {"csv": True, "snapshots": False, "fit": False},
    "analysis": {"smooth_window": 5, "slope_ratio": 3.0},
}


class ConfigError(ValueError):
    """Schema violation; ``path`` locates the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


def validate(cfg):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigError(exc.message, path) from None


def with_defaults(cfg):
    out = copy.deepcopy(DEFAULTS)
    for k, v in cfg.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = copy.deepcopy(v)
    return out


def load(path):
    """Read, validate and complete a scenario file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    validate(raw)
    cfg = with_defaults(raw)
    if "name" not in raw:
        cfg["name"] = Path(path).stem
    return cfg


def canonical(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg):
    return hashlib.sha256(canonical(cfg).encode()).hexdigest()


def bundled_configs():
    """Names of the configurations shipped with the package."""
    root = resources.files("morsedeco") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name):
    if not name.endswith(".json"):
        name += ".json"
    return resources.files("morsedeco") / "configs" / name
