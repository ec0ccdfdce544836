"""Command line entry point.

    noisynash {bounds,pack,simulate,verify-kl,experiment} --config scenario.json [--out DIR]

Exit status is 0 on success, 1 for invalid input and 2 for failures while
running.  Every output file carries the config hash, seed and version.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from importlib import metadata

import numpy as np

from .bounds import (
    Theorem4Candidate,
    corollary1_bound,
    default_theorem4_candidates,
    theorem1_bound,
    theorem2_bound,
    theorem3_bound,
    theorem4_bound,
)
from .config import ScenarioConfig, config_hash, parse_config
from .divergence import kl_expansion_check
from .exceptions import ConfigError, LatticeBudgetExceeded, NoisyNashError, RegularityViolated
from .experiments import bound_comparison_report, empirical_complexity, fano_check, run_genie_test
from .geometry import greedy_packing, kolmogorov_capacity_estimate, lattice_count, lattice_lower_bound
from .noise import check_regularity, downlink_capacity, fisher_information
from .protocol import empirical_power, run

SUBCOMMANDS = ("bounds", "pack", "simulate", "verify-kl", "experiment")
KL_SHIFTS = [0.2, 0.1, 0.05, 0.025]


def version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.1.0"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="noisynash", description="Lower bounds and simulations for noisy Nash equilibrium seeking.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}", parser_class=_Parser)
    sub.required = True
    helps = {
        "bounds": "evaluate the complexity lower bounds",
        "pack": "build a 2-epsilon packing and lattice counts",
        "simulate": "simulate one trajectory and export the trace",
        "verify-kl": "check KL expansions and regularity of the downlink noise",
        "experiment": "empirical complexity, genie tests and bound comparison",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", default=None, help="output directory (default: config output.dir or .)")
        p.add_argument("--seed", type=int, default=None, help="override experiment.seed")
        p.add_argument("--workers", type=int, default=1, help="worker processes for Monte Carlo trials")
        p.add_argument("--format", choices=("json", "csv", "both"), default="both")
        p.add_argument("--bits", action="store_true", help="print information quantities in bits")
    return parser


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return " | ".join(str(x) for x in v)
    return str(v)


class Writer:
    def __init__(self, out_dir: str, fmt: str, stamp: dict):
        self.out_dir = out_dir
        self.fmt = fmt
        self.stamp = stamp
        self.written: list[str] = []

    def json(self, name: str, result) -> None:
        if self.fmt in ("json", "both"):
            payload = {"meta": self.stamp, "result": _jsonable(result)}
            path = os.path.join(self.out_dir, name)
            _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
            self.written.append(path)

    def csv(self, name: str, header: list, rows: list) -> None:
        if self.fmt in ("csv", "both"):
            buf = io.StringIO()
            buf.write("# " + ",".join(f"{k}={self.stamp[k]}" for k in ("config_hash", "seed", "version")) + "\n")
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
            path = os.path.join(self.out_dir, name)
            _atomic_write(path, buf.getvalue())
            self.written.append(path)


def _info(value: float, bits: bool) -> str:
    return f"{value / math.log(2):.6g} bits" if bits else f"{value:.6g} nats"


def _regular_reason(ch) -> str | None:
    for i, m in enumerate(ch.downlink):
        if m is None:
            return f"downlink {i} is noiseless"
        try:
            check_regularity(m)
        except RegularityViolated as exc:
            return f"downlink {i}: {exc}"
    return None


def cmd_bounds(cfg: ScenarioConfig, args, w: Writer) -> None:
    S, ch = cfg.constraint_set, cfg.channels
    eps, delta, gamma = cfg.epsilon, cfg.delta, float(cfg.ensemble["gamma"])
    wanted = cfg.experiment["theorems"]
    var = ch.downlink_variances()
    gaussian = ch.gaussian_downlink and bool(np.all(var > 0))
    results = []

    def skip(th, reason):
        results.append({"theorem": th, "applicable": False, "reason": reason})

    if "T1" in wanted or "C1" in wanted:
        if gaussian and ch.alpha > 0:
            c_down = downlink_capacity(var, ch.alpha)
            if "T1" in wanted:
                log_m = kolmogorov_capacity_estimate(S, eps, seed=cfg.seed)
                results.append({"applicable": True, **theorem1_bound(log_m, c_down, delta).to_dict()})
            if "C1" in wanted:
                results.append({"applicable": True, **corollary1_bound(S, eps, delta, c_down).to_dict()})
        else:
            for th in ("T1", "C1"):
                if th in wanted:
                    skip(th, "requires Gaussian downlinks and alpha > 0")
    if "T2" in wanted:
        if gaussian:
            results.append({"applicable": True, **theorem2_bound(float(np.min(var)), gamma, eps, delta).to_dict()})
        else:
            skip("T2", "requires Gaussian downlinks")
    if "T3" in wanted:
        reason = None if ch.uplink_noiseless else "requires noiseless uplinks"
        reason = reason or _regular_reason(ch)
        if reason is None:
            fisher = max(fisher_information(m) for m in ch.downlink)
            results.append({"applicable": True, **theorem3_bound(S.dim, gamma, eps, delta, fisher).to_dict()})
        else:
            skip("T3", reason)
    if "T4" in wanted:
        cands = default_theorem4_candidates(S, eps, gamma, rng=cfg.seed)
        try:
            ens = cfg.build_ensemble()
            cands.append(Theorem4Candidate(ens.A, ens.packing, f"{ens.kind} ensemble"))
        except NoisyNashError:
            pass
        try:
            rep = theorem4_bound(cands, cfg.topology, ch, delta, cfg.experiment["mc_samples"], cfg.seed, gamma=gamma, S=S)
            results.append({"applicable": True, **rep.to_dict()})
        except ValueError as exc:
            skip("T4", str(exc))

    w.json("bounds.json", results)
    rows = [
        [r["theorem"], r["applicable"], r.get("value"), r.get("ceil"), "iterations", r.get("caveats") or r.get("reason")]
        for r in results
    ]
    w.csv("bounds.csv", ["theorem", "applicable", "value", "ceil", "units", "notes"], rows)
    for r in results:
        if r["applicable"]:
            print(f"{r['theorem']}: {r['value']:.6g} iterations (ceil {r['ceil']})")
        else:
            print(f"{r['theorem']}: not applicable ({r['reason']})")
    if gaussian and ch.alpha > 0:
        print(f"downlink capacity: {_info(downlink_capacity(var, ch.alpha), args.bits)}")


def cmd_pack(cfg: ScenarioConfig, args, w: Writer) -> None:
    S, eps = cfg.constraint_set, cfg.epsilon
    pk = greedy_packing(S, eps, seed=cfg.seed, restarts=int(cfg.ensemble["restarts"]))
    try:
        lat = lattice_count(S, eps)
    except LatticeBudgetExceeded:
        lat = None
    log_m = math.log(max(pk.count, lat or 0, 1))
    result = {
        "packing": pk.to_dict(),
        "valid": pk.is_valid(S),
        "lattice_count": lat,
        "lattice_lower_bound": lattice_lower_bound(S, eps),
        "log_capacity_estimate": log_m,
        "units": "nats",
    }
    w.json("pack.json", result)
    w.csv("pack.csv", ["index"] + [f"x{i}" for i in range(S.dim)], [[k, *p] for k, p in enumerate(pk.points)])
    print(f"greedy packing: {pk.count} points; lattice: {lat}; lower bound {result['lattice_lower_bound']:.6g}")
    print(f"log capacity estimate: {_info(log_m, args.bits)}")


def cmd_simulate(cfg: ScenarioConfig, args, w: Writer) -> None:
    ens = cfg.build_ensemble()
    m = int(cfg.experiment.get("game_index", 0))
    if not 0 <= m < len(ens):
        raise ConfigError([f"experiment.game_index={m} is outside the ensemble of size {len(ens)}"])
    T = cfg.experiment.get("T") or cfg.experiment["T_max"]
    trace = run(ens.games[m], cfg.topology, cfg.channels, cfg.algorithm_spec(), int(T), cfg.seed, game_id=f"{ens.kind}[{m}]")
    result = trace.to_dict()
    result["empirical_power"] = empirical_power(trace)
    w.json("trace.json", result)
    header, rows = trace.to_rows()
    w.csv("trace.csv", header, rows)
    err = float(np.linalg.norm(trace.output - ens.games[m].x_star))
    print(f"simulated {T} steps of game {m}; final distance to equilibrium {err:.6g}")


def cmd_verify_kl(cfg: ScenarioConfig, args, w: Writer) -> None:
    seen = {}
    for i, model in enumerate(cfg.channels.downlink):
        if model is None:
            continue
        key = json.dumps(model.to_dict(), sort_keys=True)
        seen.setdefault(key, (i, model))
    results, rows = [], []
    for i, model in seen.values():
        entry = {"downlink": i, "model": model.to_dict()}
        try:
            check_regularity(model)
            entry["regular"] = True
        except RegularityViolated as exc:
            entry.update(regular=False, violation=str(exc), probe=exc.probe)
        entry["fisher_information"] = fisher_information(model)
        if hasattr(model, "fisher_information_exact"):
            entry["fisher_closed_form"] = model.fisher_information_exact()
        if entry["regular"]:
            rep = kl_expansion_check(model, KL_SHIFTS)
            entry["expansion"] = rep.to_dict()
            for t, kl, lead, rem in zip(rep.shifts, rep.kl_numeric, rep.kl_leading, rep.remainder):
                rows.append([i, type(model).__name__, t, kl, lead, rem, "nats"])
            slope = "exact" if rep.exact else f"{rep.slope_estimate:.4g}"
            print(f"downlink {i} ({type(model).__name__}): Fisher {entry['fisher_information']:.10g}, remainder slope {slope}")
        else:
            print(f"downlink {i} ({type(model).__name__}): not regular: {entry['violation']}")
        results.append(entry)
    w.json("kl.json", results)
    w.csv("kl.csv", ["downlink", "model", "shift", "kl_numeric", "kl_leading", "remainder", "units"], rows)


def cmd_experiment(cfg: ScenarioConfig, args, w: Writer) -> None:
    ens = cfg.build_ensemble()
    exp = cfg.experiment
    alg = cfg.algorithm_spec()
    topo, ch = cfg.topology, cfg.channels
    comp = empirical_complexity(ens, topo, ch, alg, cfg.epsilon, cfg.delta, exp["T_max"], exp["trials"], cfg.seed, args.workers)
    report = bound_comparison_report(
        ens, topo, ch, alg, cfg.epsilon, cfg.delta, exp["T_max"], exp["trials"], cfg.seed,
        args.workers, exp["mc_samples"], complexity=comp,
    )
    report["rows"] = [r for r in report["rows"] if r["theorem"] in exp["theorems"]]
    genie = []
    for T in exp["genie_T"]:
        g = run_genie_test(ens, topo, ch, alg, int(T), exp["trials"], cfg.seed, args.workers)
        genie.append({**g.to_dict(), "fano": fano_check(g.confusion)})
    report["genie"] = genie
    w.json("experiment.json", report)
    rows = [
        [r["theorem"], r["bound"], r["ceil_bound"], r["empirical_T"], r["margin"], r["pass"], r["flags"]]
        for r in report["rows"]
    ]
    w.csv("experiment.csv", ["theorem", "bound", "ceil_bound", "empirical_T", "margin", "pass", "flags"], rows)
    grows = [
        [g["T"], g["sup_error_prob"], g["fano"]["empirical_error"], g["fano"]["fano_lower_bound"], g["fano"]["mutual_information"], g["fano"]["satisfied"], "nats"]
        for g in genie
    ]
    w.csv("genie.csv", ["T", "sup_error_prob", "avg_error_prob", "fano_lower_bound", "mutual_information", "fano_satisfied", "units"], grows)
    print(f"empirical complexity: {comp.T}")
    for r in report["rows"]:
        print(f"{r['theorem']}: bound {r['bound']}, pass {r['pass']}")


COMMANDS = {
    "bounds": cmd_bounds,
    "pack": cmd_pack,
    "simulate": cmd_simulate,
    "verify-kl": cmd_verify_kl,
    "experiment": cmd_experiment,
}


def dispatch(subcommand: str, cfg: ScenarioConfig, args) -> int:
    if subcommand not in COMMANDS:
        build_parser().print_usage(sys.stderr)
        return 1
    out_dir = args.out or cfg.output.get("dir", ".")
    stamp = {"config_hash": config_hash(cfg), "seed": cfg.seed, "version": version()}
    COMMANDS[subcommand](cfg, args, Writer(out_dir, args.format, stamp))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError(["--seed must lie in [0, 2^64)"])
            cfg = cfg.with_seed(args.seed)
        return dispatch(args.command, cfg, args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        # scenario-level precondition failures (e.g. the square does not fit) are input errors
        if isinstance(exc, NoisyNashError) and isinstance(exc, ValueError):
            print(f"invalid scenario: {exc}", file=sys.stderr)
            return 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
