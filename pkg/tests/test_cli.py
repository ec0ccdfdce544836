import json
import os
import subprocess
import sys

import pytest

from noisynash.cli import main
from noisynash.config import config_hash, parse_config
from noisynash.exceptions import ConfigError

MINIMAL = {"constraint_set": {"type": "box", "lower": [0, 0], "upper": [1, 1]}}

SCENARIO = {
    "constraint_set": {"type": "box", "lower": [0, 0], "upper": [1, 1]},
    "channels": {"uplink_usn_var": 0.0, "downlink": {"type": "gaussian", "variance": 1.0}, "alpha": 2.0},
    "ensemble": {"kind": "theorem2", "epsilon": 0.1, "gamma": 1.0},
    "experiment": {"delta": 0.25, "T_max": 40, "trials": 100, "seed": 5, "mc_samples": 10000, "genie_T": [1, 5], "T": 20},
}


def write(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if isinstance(data, dict) else data)
    return str(path)


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.delta == 0.25 and cfg.seed == 0
    assert cfg.topology.K_u == 1
    assert cfg.channels.downlink[0].var == 1.0
    assert cfg.algorithm["type"] == "baseline_noisy_gradient"


def test_round_trip():
    cfg = parse_config(SCENARIO)
    again = parse_config(cfg.to_json())
    assert again.to_dict() == cfg.to_dict()
    assert config_hash(again) == config_hash(cfg)
    assert config_hash(cfg.with_seed(6)) != config_hash(cfg)


def test_semantic_errors_are_itemised():
    bad = dict(MINIMAL, topology={"K_u": 1, "pi": [0, 2]}, experiment={"delta": 0.6}, bogus=1)
    with pytest.raises(ConfigError) as info:
        parse_config(bad)
    errs = info.value.errors
    assert any("pi[1]=2" in e for e in errs)
    assert any("δ ≤ 0.5" in e for e in errs)
    assert any("bogus" in e for e in errs)
    assert len(errs) >= 4


def test_delta_allowed_without_t2():
    cfg = parse_config(dict(MINIMAL, experiment={"delta": 0.6, "theorems": ["T1", "T4"]}))
    assert cfg.delta == 0.6


def test_syntax_error_location():
    with pytest.raises(ConfigError) as info:
        parse_config('{\n  "a": 1,\n}')
    assert "line 3, column 1" in info.value.errors[0]


def test_subcommands_write_outputs(tmp_path, capsys):
    cfg = write(tmp_path, SCENARIO)
    out = tmp_path / "out"
    for cmd, files in [
        ("bounds", ["bounds.json", "bounds.csv"]),
        ("pack", ["pack.json", "pack.csv"]),
        ("simulate", ["trace.json", "trace.csv"]),
        ("verify-kl", ["kl.json", "kl.csv"]),
        ("experiment", ["experiment.json", "experiment.csv", "genie.csv"]),
    ]:
        assert main([cmd, "--config", cfg, "--out", str(out)]) == 0
        for f in files:
            assert (out / f).exists()
    meta = json.loads((out / "bounds.json").read_text())["meta"]
    assert meta["seed"] == 5 and len(meta["config_hash"]) == 16
    assert (out / "trace.csv").read_text().startswith(f"# config_hash={meta['config_hash']},seed=5")
    assert not [p for p in os.listdir(out) if p.startswith(".tmp-")]


def test_format_flag(tmp_path):
    cfg = write(tmp_path, SCENARIO)
    assert main(["pack", "--config", cfg, "--out", str(tmp_path / "j"), "--format", "json"]) == 0
    assert os.listdir(tmp_path / "j") == ["pack.json"]


def test_seed_override(tmp_path):
    cfg = write(tmp_path, SCENARIO)
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "9"])
    meta = json.loads((tmp_path / "a" / "trace.json").read_text())["meta"]
    assert meta["seed"] == 9


def test_exit_codes(tmp_path, capsys):
    assert main(["bounds", "--config", write(tmp_path, "{ nope")]) == 1
    assert main(["bounds", "--config", write(tmp_path, dict(MINIMAL, experiment={"delta": 0.6}))]) == 1
    assert main(["bounds", "--config", str(tmp_path / "missing.json")]) == 1
    assert "config error" in capsys.readouterr().err
    # the four-point square does not fit: an input problem, not a crash
    tight = dict(MINIMAL, ensemble={"epsilon": 0.45})
    assert main(["experiment", "--config", write(tmp_path, tight)]) == 1
    with pytest.raises(SystemExit) as info:
        main(["frobnicate", "--config", "x"])
    assert info.value.code == 1


def test_not_reached_is_success(tmp_path):
    data = json.loads(json.dumps(SCENARIO))
    data["channels"]["uplink_usn_var"] = 1.0
    data["experiment"]["T_max"] = 5
    out = tmp_path / "o"
    assert main(["experiment", "--config", write(tmp_path, data), "--out", str(out)]) == 0
    rep = json.loads((out / "experiment.json").read_text())["result"]
    assert rep["complexity"]["T"] == "NotReached(>5)"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "noisynash", "nosuch"], capture_output=True, text=True)
    assert proc.returncode == 1
    assert "usage" in proc.stderr


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, SCENARIO)
    for d in ("r1", "r2"):
        assert main(["experiment", "--config", cfg, "--out", str(tmp_path / d)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / d)]) == 0
    for name in ("experiment.csv", "genie.csv", "trace.csv"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
