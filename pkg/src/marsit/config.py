"""JSON run/bench configuration documents.

``K`` may be written as a number or as the string ``"inf"``. Unknown keys
are rejected at every level; omitted keys take the :class:`RunConfig`
defaults, and the stepsizes default to ``sqrt(M/T)`` and ``sqrt(1/(T D))``
once the model dimension is known.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path

from .errors import ConfigError, MarsitError
from .trainer import RunConfig, default_dataset

SCHEMA_VERSION = 1
DATASET_KEYS = {"source", "n", "d", "noise_sigma", "kind", "seed", "feature_std", "path"}
SWEEP_KEYS = ("M", "D", "mode", "K")


def read_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def _check_version(doc: dict) -> None:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")


def parse_k(value) -> float:
    if value in ("inf", "Infinity", "infinity", None):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"K must be a positive integer or 'inf', got {value!r}")
    return math.inf if value == math.inf else int(value) if float(value).is_integer() else value


def run_config_from_dict(doc: dict, *, versioned: bool = True) -> RunConfig:
    if versioned:
        _check_version(doc)
    body = {k: v for k, v in doc.items() if k != "schema_version"}
    unknown = set(body) - set(RunConfig.field_names())
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "K" in body:
        body["K"] = parse_k(body["K"])
    if "dataset" in body:
        ds = body["dataset"]
        if not isinstance(ds, dict):
            raise ConfigError("'dataset' must be an object")
        bad = set(ds) - DATASET_KEYS
        if bad:
            raise ConfigError(f"unknown dataset keys: {sorted(bad)}")
        body["dataset"] = {**default_dataset(), **ds}
    try:
        return RunConfig(**body)
    except TypeError as e:
        raise ConfigError(str(e)) from e
    except MarsitError:
        raise
    except (ValueError, ArithmeticError) as e:
        raise ConfigError(str(e)) from e


def run_config_to_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["K"] = "inf" if cfg.K == math.inf else int(cfg.K)
    return {"schema_version": SCHEMA_VERSION, **d}


def load_run_config(path) -> RunConfig:
    return run_config_from_dict(read_json(path))


def load_bench_config(path) -> tuple[RunConfig, dict[str, list]]:
    """Base run config plus the sweep lists; an empty list is a config error."""
    doc = read_json(path)
    _check_version(doc)
    unknown = set(doc) - {"schema_version", "base", "sweep"}
    if unknown:
        raise ConfigError(f"unknown bench keys: {sorted(unknown)}")
    base = run_config_from_dict(doc.get("base", {}), versioned=False)
    sweep = doc.get("sweep")
    if not isinstance(sweep, dict) or not sweep:
        raise ConfigError("bench config needs a non-empty 'sweep' object")
    bad = set(sweep) - set(SWEEP_KEYS)
    if bad:
        raise ConfigError(f"unknown sweep keys: {sorted(bad)}")
    for k, v in sweep.items():
        if not isinstance(v, list) or not v:
            raise ConfigError(f"sweep list {k!r} must be a non-empty list")
    if "K" in sweep:
        sweep = {**sweep, "K": [parse_k(k) for k in sweep["K"]]}
    return base, sweep
