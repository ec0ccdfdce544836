"""Scenario files: JSON in, validated objects out, and back again."""
from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError
from .games import HardEnsemble, theorem1_ensemble, theorem2_ensemble
from .geometry import ConstraintSet, constraint_set_from_dict
from .noise import ChannelConfig, Topology, noise_model_from_dict
from .protocol import AlgorithmSpec, baseline_noisy_gradient, constant_step_gradient

__all__ = ["ScenarioConfig", "parse_config", "config_hash"]

EXPERIMENT_DEFAULTS = {
    "delta": 0.25,
    "T_max": 500,
    "trials": 2000,
    "seed": 0,
    "mc_samples": 100_000,
    "T": None,
    "genie_T": [1, 5, 13, 50],
    "theorems": ["T1", "C1", "T2", "T3", "T4"],
}
ENSEMBLE_DEFAULTS = {"kind": "theorem2", "epsilon": 0.1, "gamma": 1.0, "A": None, "packing_seed": 0, "restarts": 8}
ALGORITHM_DEFAULTS = {"type": "baseline_noisy_gradient", "c": 1.0, "exponent": 1.0, "projection": True}
TOP_KEYS = {"constraint_set", "topology", "channels", "ensemble", "algorithm", "experiment", "output"}


@dataclass
class ScenarioConfig:
    constraint_set: ConstraintSet
    topology: Topology
    channels: ChannelConfig
    ensemble: dict
    algorithm: dict
    experiment: dict
    output: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return int(self.experiment["seed"])

    @property
    def epsilon(self) -> float:
        return float(self.ensemble["epsilon"])

    @property
    def delta(self) -> float:
        return float(self.experiment["delta"])

    def algorithm_spec(self) -> AlgorithmSpec:
        a = self.algorithm
        if a["type"] == "constant_step_gradient":
            return constant_step_gradient(a["c"], a.get("projection", True))
        return baseline_noisy_gradient(a["c"], a["exponent"], a.get("projection", True))

    def build_ensemble(self) -> HardEnsemble:
        e = self.ensemble
        A = None if e.get("A") is None else np.asarray(e["A"], dtype=float)
        if e["kind"] == "theorem2":
            return theorem2_ensemble(self.constraint_set, e["epsilon"], e["gamma"], A)
        return theorem1_ensemble(self.constraint_set, e["epsilon"], A, seed=e["packing_seed"], restarts=e["restarts"])

    def to_dict(self) -> dict:
        return {
            "constraint_set": self.constraint_set.to_dict(),
            "topology": self.topology.to_dict(),
            "channels": self.channels.to_dict(),
            "ensemble": copy.deepcopy(self.ensemble),
            "algorithm": copy.deepcopy(self.algorithm),
            "experiment": copy.deepcopy(self.experiment),
            "output": copy.deepcopy(self.output),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        out = copy.copy(self)
        out.experiment = dict(self.experiment, seed=int(seed))
        return out


def config_hash(cfg: ScenarioConfig) -> str:
    canon = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _per_node(value, count, name, errors):
    if isinstance(value, (int, float)):
        return [float(value)] * count
    if isinstance(value, list) and len(value) == count:
        return [float(v) for v in value]
    errors.append(f"{name} must be a number or a list of {count} numbers")
    return [0.0] * count


def _downlinks(value, N, errors):
    def one(item, where):
        if item is None:
            return None
        try:
            return noise_model_from_dict(item)
        except (ValueError, KeyError, TypeError) as exc:
            errors.append(f"{where}: {exc}")
            return None

    if isinstance(value, list):
        if len(value) != N:
            errors.append(f"channels.downlink has {len(value)} entries, expected N={N}")
            return [None] * N
        return [one(v, f"channels.downlink[{i}]") for i, v in enumerate(value)]
    model = one(value, "channels.downlink")
    return [model] * N


def _validate_from_dict(data: dict) -> ScenarioConfig:
    errors: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError(["top level must be a JSON object"])
    for key in sorted(set(data) - TOP_KEYS):
        errors.append(f"unknown top-level field {key!r}")

    S = None
    try:
        S = constraint_set_from_dict(data["constraint_set"])
    except KeyError:
        errors.append("constraint_set is required")
    except (ValueError, TypeError) as exc:
        errors.append(f"constraint_set: {exc}")
    if S is None:
        raise ConfigError(errors)
    N = S.dim
    players = [p for _, p in S.constraint_functions()]

    t = dict(data.get("topology") or {})
    topo = None
    try:
        topo = Topology.build(
            N,
            players,
            K_u=t.get("K_u", 1),
            pi=t.get("pi"),
            usn_members=t.get("usn_members"),
            K_c=t.get("K_c", 1),
            phi=t.get("phi"),
            csn_members=t.get("csn_members"),
        )
    except (ValueError, TypeError, IndexError) as exc:
        errors.extend(str(exc).split("; "))

    c = dict(data.get("channels") or {})
    chan = None
    if topo is not None:
        usn_raw = c.get("uplink_usn_var", 1.0)
        csn_raw = c.get("uplink_csn_var", usn_raw if isinstance(usn_raw, (int, float)) else 1.0)
        usn = _per_node(usn_raw, topo.K_u, "channels.uplink_usn_var", errors)
        csn = _per_node(csn_raw, topo.K_c, "channels.uplink_csn_var", errors)
        down = _downlinks(c.get("downlink", {"type": "gaussian", "variance": 1.0}), N, errors)
        try:
            chan = ChannelConfig(tuple(usn), tuple(csn), tuple(down), float(c.get("alpha", 0.0)))
        except (ValueError, TypeError) as exc:
            errors.extend(str(exc).split("; "))

    ens = {**ENSEMBLE_DEFAULTS, **(data.get("ensemble") or {})}
    if ens["kind"] not in ("theorem1", "theorem2"):
        errors.append(f"ensemble.kind must be 'theorem1' or 'theorem2', got {ens['kind']!r}")
    if not (isinstance(ens["epsilon"], (int, float)) and ens["epsilon"] > 0):
        errors.append("ensemble.epsilon must be positive")
    if not (isinstance(ens["gamma"], (int, float)) and ens["gamma"] > 0):
        errors.append("ensemble.gamma must be positive")
    if ens["A"] is not None:
        A = np.asarray(ens["A"], dtype=float)
        if A.shape != (N, N):
            errors.append(f"ensemble.A must be {N}x{N}")

    alg = {**ALGORITHM_DEFAULTS, **(data.get("algorithm") or {})}
    if alg["type"] not in ("baseline_noisy_gradient", "constant_step_gradient"):
        errors.append(f"algorithm.type {alg['type']!r} is not supported")
    if not (isinstance(alg["c"], (int, float)) and alg["c"] >= 0):
        errors.append("algorithm.c must be >= 0")
    if alg["type"] == "baseline_noisy_gradient" and not 0.5 < alg["exponent"] <= 1:
        errors.append("algorithm.exponent must lie in (0.5, 1]")

    exp = {**EXPERIMENT_DEFAULTS, **(data.get("experiment") or {})}
    delta = exp["delta"]
    if not (isinstance(delta, (int, float)) and 0 < delta < 1):
        errors.append("experiment.delta must lie in (0, 1)")
    else:
        for th in ("T2", "T3"):
            if th in exp["theorems"] and delta > 0.5:
                errors.append(f"experiment.delta={delta} violates the δ ≤ 0.5 precondition of {th}")
    for key in ("T_max", "trials"):
        if not (isinstance(exp[key], int) and exp[key] >= 1):
            errors.append(f"experiment.{key} must be a positive integer")
    if not (isinstance(exp["seed"], int) and 0 <= exp["seed"] < 2**64):
        errors.append("experiment.seed must be an integer in [0, 2^64)")
    if not (isinstance(exp["mc_samples"], int) and exp["mc_samples"] >= 10_000):
        errors.append("experiment.mc_samples must be an integer >= 10000")
    unknown = set(exp["theorems"]) - {"T1", "C1", "T2", "T3", "T4"}
    if unknown:
        errors.append(f"experiment.theorems has unknown entries {sorted(unknown)}")

    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(S, topo, chan, ens, alg, exp, dict(data.get("output") or {}))


def parse_config(source) -> ScenarioConfig:
    """Load a scenario from a path, a JSON string or an already parsed dict.

    Raises ``ConfigError`` listing every problem; JSON syntax errors carry
    their line and column.
    """
    if isinstance(source, dict):
        return _validate_from_dict(source)
    text = str(source)
    if not text.lstrip().startswith("{") and os.path.exists(text):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from exc
    return _validate_from_dict(data)
