import json
import math

import pytest

from marsit.config import load_bench_config, load_run_config, parse_k, run_config_from_dict, run_config_to_dict
from marsit.errors import ConfigError
from marsit.trainer import RunConfig


def write(tmp_path, doc, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return p


def test_minimal_config_takes_defaults(tmp_path):
    cfg = load_run_config(write(tmp_path, {"schema_version": 1, "M": 2, "T": 10}))
    assert cfg.mode == "marsit" and cfg.K == 100 and cfg.eta_l is None
    assert cfg.dataset["feature_std"] == 0.25


@pytest.mark.parametrize("doc", [
    {"M": 2},
    {"schema_version": 2},
    {"schema_version": 1, "learning_rate": 0.1},
    {"schema_version": 1, "dataset": {"rows": 3}},
    {"schema_version": 1, "dataset": []},
    {"schema_version": 1, "K": "never"},
    {"schema_version": 1, "K": True},
    {"schema_version": 1, "M": 1},
    "[1, 2]",
    "{not json",
])
def test_bad_configs(tmp_path, doc):
    with pytest.raises(ConfigError):
        load_run_config(write(tmp_path, doc))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.json")


def test_parse_k():
    assert parse_k("inf") == math.inf and parse_k(None) == math.inf
    assert parse_k(100) == 100 and parse_k(50.0) == 50


def test_manifest_roundtrip():
    cfg = RunConfig(M=4, T=7, K=math.inf, mode="marsit").resolved(32)
    doc = json.loads(json.dumps(run_config_to_dict(cfg)))
    assert doc["K"] == "inf"
    assert run_config_from_dict(doc) == cfg


def test_bench_config(tmp_path):
    base, sweep = load_bench_config(write(tmp_path, {
        "schema_version": 1, "base": {"T": 5}, "sweep": {"K": [1, "inf"], "mode": ["marsit"]}}))
    assert base.T == 5 and sweep["K"] == [1, math.inf]


@pytest.mark.parametrize("doc", [
    {"schema_version": 1, "sweep": {}},
    {"schema_version": 1, "sweep": {"M": []}},
    {"schema_version": 1, "sweep": {"lr": [1]}},
    {"schema_version": 1, "sweep": {"M": [2]}, "extra": 1},
    {"schema_version": 1},
])
def test_bad_bench_configs(tmp_path, doc):
    with pytest.raises(ConfigError):
        load_bench_config(write(tmp_path, doc))
