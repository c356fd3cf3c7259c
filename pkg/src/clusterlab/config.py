"""Experiment configuration: JSON schema, validation and resolution."""

from __future__ import annotations

import json
import math
import os

import jsonschema

from clusterlab.core import BlockScheme, FixedLevel, OrderStatistic
from clusterlab.generators import GeneratorModel

EXPERIMENTS = (
    "oracle_table",
    "moment_rate",
    "jump_law",
    "consistency",
    "process_clt",
    "theta_hat",
    "anticluster_diag",
    "simulate",
    "sweep",
)

_POS_INT = {"type": "integer", "minimum": 1}
_PROB = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "clusterlab experiment",
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "workers": _POS_INT,
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["model"],
            "properties": {
                "model": {"enum": ["iid_pareto", "moving_max", "ar1"]},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "weights": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "phi": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            },
        },
        "scheme": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": _POS_INT,
                "r": _POS_INT,
                "u": {"type": "number", "exclusiveMinimum": 0},
                "w": _PROB,
                "k": _POS_INT,
            },
        },
        "r_rule": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["list", "n_pow"]},
                "values": {"type": "array", "items": _POS_INT, "minItems": 1},
                "exponents": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}, "minItems": 1},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "r": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 24}, "minItems": 1},
                "w": {"type": "array", "items": _PROB, "minItems": 1},
                "gamma": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
            },
        },
        "table": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "r": {"type": "array", "items": _POS_INT, "minItems": 1},
                "w": {"oneOf": [_PROB, {"type": "array", "items": _PROB, "minItems": 1}]},
            },
        },
        "functionals": {"type": "array", "items": {"type": "string", "minLength": 1}, "minItems": 1},
        "gamma": {"type": "number", "minimum": 0},
        "process": {"enum": ["G_tilde", "K_tilde", "L_tilde"]},
        "replications": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_rep": _POS_INT,
                "centering_rep": _POS_INT,
                "n_paths": _POS_INT,
                "n_blocks": _POS_INT,
            },
        },
        "ell": {"type": "array", "items": _POS_INT, "minItems": 1},
        "targets": {"type": "object", "additionalProperties": {"type": "number"}},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "series_csv": {"type": "string"},
        "norm": {"enum": ["euclidean", "sup", "l1"]},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "format": {"enum": ["csv", "json"]},
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` holds the schema diagnostics."""

    def __init__(self, message, errors=()):
        super().__init__(message)
        self.errors = list(errors)


def load(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from None
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from None


def validate(cfg: dict) -> dict:
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid config", msgs)
    sc = cfg.get("scheme", {})
    levels = [k for k in ("u", "w", "k") if k in sc]
    if len(levels) > 1:
        raise ConfigError("invalid config", [f"scheme: give one of u, w, k (got {', '.join(levels)})"])
    if "n" in sc and "r" in sc and sc["r"] > sc["n"]:
        raise ConfigError("invalid config", ["scheme: block larger than sample"])
    m = cfg.get("model")
    if m:
        if m["model"] == "moving_max" and "weights" not in m:
            raise ConfigError("invalid config", ["model: moving_max needs weights"])
        if m["model"] == "ar1" and "phi" not in m:
            raise ConfigError("invalid config", ["model: ar1 needs phi"])
        extra = {"iid_pareto": {"weights", "phi"}, "moving_max": {"phi"}, "ar1": {"weights"}}[m["model"]] & set(m)
        if extra:
            raise ConfigError("invalid config", [f"model: {sorted(extra)} not used by {m['model']}"])
    return cfg


def resolve(cfg: dict, seed=None, workers=None, out=None, fmt=None) -> dict:
    """Validated config with flag overrides and defaults filled in."""
    cfg = json.loads(json.dumps(cfg))
    if seed is None and "seed" not in cfg and os.environ.get("CLUSTERLAB_SEED"):
        try:
            seed = int(os.environ["CLUSTERLAB_SEED"])
        except ValueError:
            raise ConfigError("invalid config", ["CLUSTERLAB_SEED is not an integer"]) from None
    if seed is not None:
        cfg["seed"] = int(seed)
    cfg.setdefault("seed", 0)
    if workers is not None:
        cfg["workers"] = int(workers)
    cfg.setdefault("workers", 1)
    output = cfg.setdefault("output", {})
    if out is not None:
        output["dir"] = str(out)
    if fmt is not None:
        output["format"] = fmt
    output.setdefault("dir", ".")
    output.setdefault("format", "csv")
    return validate(cfg)


def model_of(cfg) -> GeneratorModel:
    if "model" not in cfg:
        raise ConfigError("invalid config", ["model: required for this experiment"])
    return GeneratorModel.from_dict(cfg["model"])


def scheme_of(cfg, model: GeneratorModel | None = None, r: int | None = None) -> BlockScheme:
    sc = cfg.get("scheme", {})
    missing = [k for k in ("n", "r") if k not in sc and not (k == "r" and r is not None)]
    if missing:
        raise ConfigError("invalid config", [f"scheme: missing {', '.join(missing)}"])
    n, r = int(sc["n"]), int(r if r is not None else sc["r"])
    if "k" in sc:
        return BlockScheme(n, r, OrderStatistic(int(sc["k"])))
    if "w" in sc:
        w = float(sc["w"])
        if model is None:
            raise ConfigError("invalid config", ["scheme: w needs a model"])
        return BlockScheme(n, r, FixedLevel(model.level_for(w)), w, "model" if model.w_exact else "asymptotic")
    if "u" in sc:
        u = float(sc["u"])
        if model is None:
            return BlockScheme(n, r, FixedLevel(u))
        w = model.tail_prob(u)
        if not 0 < w < 1:
            raise ConfigError("invalid config", [f"scheme: u={u:g} gives w={w:g}"])
        return BlockScheme(n, r, FixedLevel(u), w, "model" if model.w_exact else "asymptotic")
    raise ConfigError("invalid config", ["scheme: one of u, w, k is required"])


def r_values(cfg) -> list[int]:
    rule = cfg.get("r_rule")
    if rule is None:
        raise ConfigError("invalid config", ["r_rule: required for sweep"])
    if rule["kind"] == "list":
        if "values" not in rule:
            raise ConfigError("invalid config", ["r_rule: list needs values"])
        return [int(v) for v in rule["values"]]
    if "exponents" not in rule or "n" not in cfg.get("scheme", {}):
        raise ConfigError("invalid config", ["r_rule: n_pow needs exponents and scheme.n"])
    n = cfg["scheme"]["n"]
    return [max(1, int(math.floor(n**a))) for a in rule["exponents"]]
