"""Run configuration: one JSON schema per subcommand, unknown keys rejected."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


_num = {"type": "number"}
_int = {"type": "integer"}
_pos_int = {"type": "integer", "minimum": 1}
_unit = {"type": "number", "minimum": 0, "maximum": 1}
_range = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_seed = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}

_prior = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "phi_center": _num,
        "half_width": {"type": "number", "exclusiveMinimum": 0},
        "phi_range": _range,
        "v_range": _range,
        "resolution": {"type": "integer", "minimum": 16},
    },
}


def _schema(properties: dict, required=()) -> dict:
    props = {"schema_version": {"const": SCHEMA_VERSION}, "seed": _seed, **properties}
    return {"type": "object", "additionalProperties": False, "properties": props, "required": list(required)}


SCHEMAS = {
    "simulate": _schema(
        {
            "phi": _num,
            "v": _unit,
            "M": _pos_int,
            "mode": {"enum": ["postselected", "full"]},
            "settings": {"type": "array", "items": _num, "minItems": 1},
        },
        required=("phi", "v", "M"),
    ),
    "estimate": _schema(
        {
            "counts": {"type": "string"},
            "prior": _prior,
            "lrt_form": {"enum": ["verbatim", "anderson"]},
            "convention": {"enum": ["main", "appendix"]},
        }
    ),
    "fisher-scan": _schema(
        {
            "v": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "phi_min": _num,
            "phi_max": _num,
            "points": {"type": "integer", "minimum": 2},
            "M": {"type": "number", "exclusiveMinimum": 0},
            "convention": {"enum": ["main", "appendix"]},
            "settings": {"type": "array", "items": _num, "minItems": 1},
        },
        required=("v",),
    ),
    "hb-scaling": _schema(
        {
            "N_min": _pos_int,
            "N_max": _pos_int,
            "epsilons": {"type": "array", "items": _unit, "minItems": 1},
            "phase_points": {"type": "integer", "minimum": 8},
            "h_phi": {"type": "number", "exclusiveMinimum": 0},
            "h_eps": {"type": "number", "exclusiveMinimum": 0},
            "richardson": {"type": "boolean"},
            "check_convergence": {"type": "boolean"},
            "workers": _pos_int,
        }
    ),
    "calibrate": _schema(
        {
            "phases": {"type": "array", "items": _num, "minItems": 3},
            "phase_start": _num,
            "phase_stop": _num,
            "phase_count": {"type": "integer", "minimum": 3},
            "v": _unit,
            "M": _pos_int,
            "noiseless": {"type": "boolean"},
            "prior": _prior,
        },
        required=("v", "M"),
    ),
    "lrt-calibrate": _schema(
        {
            "phi": _num,
            "v": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "M": _pos_int,
            "repetitions": {"type": "integer", "minimum": 100},
            "prior": _prior,
        },
        required=("phi", "v", "M"),
    ),
}

DEFAULTS = {
    "simulate": {"mode": "postselected", "seed": 0},
    "estimate": {"prior": {}, "lrt_form": "verbatim", "convention": "main"},
    "fisher-scan": {"phi_min": 0.0, "phi_max": 0.7853981633974483, "points": 181, "M": 70000, "convention": "main"},
    "hb-scaling": {
        "N_min": 1, "N_max": 10, "epsilons": [0.14, 0.23, 0.32, 0.5, 1.0], "phase_points": 181,
        "h_phi": 1e-4, "h_eps": 1e-4, "richardson": False, "check_convergence": False, "workers": 1,
    },
    "calibrate": {"noiseless": False, "prior": {}, "seed": 0},
    "lrt-calibrate": {"repetitions": 1000, "prior": {}, "seed": 0},
}


def validate(command: str, config: dict) -> dict:
    """Validate against the subcommand schema and fill defaults; returns a new dict."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        jsonschema.validate(config, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid {command} config at {where}: {exc.message}") from None
    out = copy.deepcopy(DEFAULTS[command])
    out.update(copy.deepcopy(config))
    out["schema_version"] = SCHEMA_VERSION
    return out


def load(path: str | Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top-level value must be an object")
    return data
