"""Run-configuration loading and validation.

Configs are single YAML files with nested sections (problem, grids, solver,
outputs, plus optional probe/flow sections for the probe subcommands).
The schema rejects unknown keys; the seed is mandatory so no run ever
depends on wall-clock state.
"""

from __future__ import annotations

import os
from typing import Optional

import jsonschema
import yaml


class ConfigError(ValueError):
    pass


_PHI_SPEC = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {
            "enum": ["sin", "cos", "gauss_bump", "tanh_step", "smoothed_step",
                     "constant"]
        },
        "amplitude": {"type": "number"},
        "width": {"type": "number"},
        "steepness": {"type": "number"},
        "value": {"type": "number"},
        "table": {
            "type": "object",
            "additionalProperties": False,
            "required": ["x", "value"],
            "properties": {
                "x": {"type": "array", "items": {"type": "number"}},
                "value": {"type": "array", "items": {"type": "number"}},
            },
        },
    },
}

_TABLE_1D = {
    "type": "object",
    "additionalProperties": False,
    "required": ["u", "value"],
    "properties": {
        "u": {"type": "array", "items": {"type": "number"}},
        "value": {"type": "array", "items": {"type": "number"}},
    },
}

_JUMP_SPEC = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {
            "enum": ["none", "alpha_stable", "truncated_stable",
                     "compound_poisson_gaussian"]
        },
        "alpha": {"type": "number"},
        "scale": {"type": "number"},
        "cutoff": {"type": "number"},
        "rate": {"type": "number"},
        "jump_std": {"type": "number"},
    },
}

_TRIPLE = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "drift": {"type": "array", "items": {"type": "number"}},
        "covariance": {
            "anyOf": [
                {"type": "number"},
                {"type": "array",
                 "items": {"type": "array", "items": {"type": "number"}}},
            ]
        },
        "jump": _JUMP_SPEC,
        "dim": {"type": "integer", "minimum": 1},
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["problem", "grids", "solver"],
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["builtin"],
            "properties": {
                "builtin": {
                    "enum": ["burgers1d", "conservation_law", "linear_fk",
                             "custom"]
                },
                "mode": {
                    "enum": ["semilinear", "quasilinear_general",
                             "quasilinear_constant_big_jump", "linear_fk"]
                },
                "triple": _TRIPLE,
                "params": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "nu": {"type": "number"},
                        "alpha": {"type": "number"},
                        "phi": _PHI_SPEC,
                        "source": _PHI_SPEC,
                        "h_scale": {"type": "number"},
                        "g_prime": _TABLE_1D,
                        "f": _TABLE_1D,
                        "g_table": _TABLE_1D,
                    },
                },
                "bounds": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "sup_g": {"type": "number"},
                        "lip_g": {"type": "number"},
                        "sup_f": {"type": "number"},
                        "lip_f": {"type": "number"},
                        "sup_phi": {"type": "number"},
                        "lip_phi": {"type": "number"},
                    },
                },
            },
        },
        "grids": {
            "type": "object",
            "additionalProperties": False,
            "required": ["space", "time"],
            "properties": {
                "space": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["lower", "upper", "points"],
                    "properties": {
                        "lower": {"type": "array", "items": {"type": "number"}},
                        "upper": {"type": "array", "items": {"type": "number"}},
                        "points": {
                            "type": "array",
                            "items": {"type": "integer", "minimum": 2},
                        },
                    },
                },
                "time": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["horizon", "dt"],
                    "properties": {
                        "horizon": {"type": "number", "exclusiveMaximum": 0},
                        "dt": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "required": ["particles", "seed"],
            "properties": {
                "particles": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer"},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "window": {"type": "number", "exclusiveMinimum": 0},
                "window_floor_steps": {"type": "integer", "minimum": 1},
                "interp": {"enum": ["cubic", "linear"]},
                "blowup_threshold": {"type": "number"},
                "intent": {"enum": ["solve", "probe"]},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {
                    "type": "array",
                    "items": {"enum": ["csv", "json"]},
                },
                "dump_paths": {"type": "boolean"},
                "n_dump_paths": {"type": "integer", "minimum": 1},
            },
        },
        "probe": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "deltas": {"type": "array", "items": {"type": "number"}},
                "particles": {"type": "integer", "minimum": 10},
                "fd_step": {"type": "number", "exclusiveMinimum": 0},
                "step_width": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "flow": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t1": {"type": "number"},
                "t2": {"type": "number"},
                "t3": {"type": "number"},
                "x": {"type": "array", "items": {"type": "number"}},
                "paths": {"type": "integer", "minimum": 10},
            },
        },
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "modes": {"type": "integer", "minimum": 16},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "kind": {"enum": ["spectral", "cole_hopf", "convolution"]},
            },
        },
    },
}


def load_config(path: str) -> dict:
    """Read and schema-validate a YAML run config."""
    try:
        with open(path, "r") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return validate_config(raw)


def validate_config(raw) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigError(f"config invalid at '{loc}': {exc.message}") from exc
    return raw


def output_directory(cfg: dict, override: Optional[str] = None) -> str:
    """Resolve the output directory; LEVYPIDE_OUT_ROOT re-roots relative
    paths."""
    out = cfg.get("outputs", {}) or {}
    directory = override or out.get("directory", "out")
    root = os.environ.get("LEVYPIDE_OUT_ROOT")
    if root and not os.path.isabs(directory):
        directory = os.path.join(root, directory)
    return directory
