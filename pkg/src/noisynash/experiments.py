"""Genie-aided hypothesis tests, empirical (eps, delta)-complexity and bound comparisons.

An empirical complexity measured for one algorithm is an upper estimate
of the class complexity, so every applicable lower bound must sit below it.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .bounds import (
    BoundReport,
    Theorem4Candidate,
    corollary1_bound,
    theorem1_bound,
    theorem2_bound,
    theorem3_bound,
    theorem4_bound,
)
from .exceptions import RegularityViolated
from .games import HardEnsemble
from .noise import ChannelConfig, Gaussian, Topology, check_regularity, downlink_capacity, fisher_information
from .protocol import AlgorithmSpec, simulate

__all__ = [
    "genie_decode",
    "GenieResult",
    "run_genie_test",
    "NotReached",
    "ComplexityResult",
    "empirical_complexity",
    "wilson_upper",
    "fano_check",
    "bound_comparison_report",
]

TRIAL_CHUNK = 500
WILSON_SLACK = 0.02


def genie_decode(ensemble, output) -> int:
    """Index of the packing point nearest ``output``; ties go to the lowest index."""
    points = ensemble.points if hasattr(ensemble, "points") else np.asarray(ensemble, dtype=float)
    if len(points) == 0:
        raise ValueError("ensemble is empty")
    return int(_decode(points, np.asarray(output, dtype=float)[None, :])[0])


def _decode(points: np.ndarray, outputs: np.ndarray) -> np.ndarray:
    d = np.sum((outputs[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    return np.argmin(d, axis=1)


def _chunks(trials: int) -> list[int]:
    return [min(TRIAL_CHUNK, trials - s) for s in range(0, trials, TRIAL_CHUNK)]


def _job(args):
    game, topo, cfg, alg, T, size, seed, key, horizons = args
    res = simulate(game, topo, cfg, alg, T, trials=size, seed=seed, stream_key=key)
    return res.X[horizons]


def _outputs(ensemble, topo, cfg, alg, T, trials, seed, workers, horizons):
    """Iterates at ``horizons`` for every game: list of arrays (len(horizons), trials, N).

    Game ``m``'s chunk ``c`` always uses stream key ``(m, c)``, so results
    do not depend on the number of workers.
    """
    jobs = []
    for m, game in enumerate(ensemble.games):
        for c, size in enumerate(_chunks(trials)):
            jobs.append((game, topo, cfg, alg, T, size, seed, (m, c), horizons))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_job, jobs))
    else:
        parts = [_job(j) for j in jobs]
    n_chunks = len(_chunks(trials))
    return [np.concatenate(parts[m * n_chunks : (m + 1) * n_chunks], axis=1) for m in range(len(ensemble))]


def _seed_of(rng) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63 - 1))
    return 0 if rng is None else int(rng)


@dataclass
class GenieResult:
    errors: list
    trials: int
    sup_error_prob: float
    confusion: np.ndarray
    T: int
    seed: int

    @property
    def average_error_prob(self) -> float:
        return float(np.sum(self.errors) / (self.trials * len(self.errors)))

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "trials": self.trials,
            "seed": self.seed,
            "errors": list(self.errors),
            "sup_error_prob": self.sup_error_prob,
            "confusion": self.confusion.tolist(),
        }


def run_genie_test(
    ensemble: HardEnsemble,
    topo: Topology,
    cfg: ChannelConfig,
    alg: AlgorithmSpec,
    T: int,
    trials: int,
    rng: np.random.Generator | int = 0,
    workers: int = 1,
) -> GenieResult:
    """Simulate each game ``trials`` times, decode ``x_{T+1}`` to the nearest packing point."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if T < 0:
        raise ValueError("T must be >= 0")
    seed = _seed_of(rng)
    outs = _outputs(ensemble, topo, cfg, alg, T, trials, seed, workers, [T])
    K = len(ensemble)
    confusion = np.zeros((K, K), dtype=np.int64)
    for m, X in enumerate(outs):
        decoded = _decode(ensemble.points, X[0])
        confusion[m] = np.bincount(decoded, minlength=K)
    errors = [int(trials - confusion[m, m]) for m in range(K)]
    return GenieResult(errors, trials, max(errors) / trials, confusion, T, seed)


class NotReached:
    """No horizon up to ``T_max`` met the (eps, delta) requirement."""

    def __init__(self, T_max: int):
        self.T_max = T_max

    def __repr__(self):
        return f"NotReached(T_max={self.T_max})"

    def __eq__(self, other):
        return isinstance(other, NotReached) and other.T_max == self.T_max

    def __str__(self):
        return f"NotReached(>{self.T_max})"


def wilson_upper(failures, trials) -> np.ndarray:
    """Upper end of the two-sided 95% Wilson interval."""
    _, hi = proportion_confint(np.asarray(failures), trials, alpha=0.05, method="wilson")
    return np.asarray(hi, dtype=float)


@dataclass
class ComplexityResult:
    T: int | NotReached
    epsilon: float
    delta: float
    T_max: int
    trials: int
    seed: int
    sup_miss_prob: float | None = None
    stderr: float | None = None
    wilson_upper: float | None = None
    previous: dict | None = None
    curve: list = field(default_factory=list)

    @property
    def reached(self) -> bool:
        return not isinstance(self.T, NotReached)

    def lower_estimate(self) -> int:
        """A number the true complexity of this algorithm is at least (empirically)."""
        return self.T if self.reached else self.T_max + 1

    def to_dict(self) -> dict:
        return {
            "T": self.T if self.reached else str(self.T),
            "reached": self.reached,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "T_max": self.T_max,
            "trials": self.trials,
            "seed": self.seed,
            "sup_miss_prob": self.sup_miss_prob,
            "stderr": self.stderr,
            "wilson_upper": self.wilson_upper,
            "previous": self.previous,
        }


def _miss_counts(ensemble, outs, epsilon):
    """(games, horizons) counts of ``||x_out - x*_m|| >= eps``."""
    rows = []
    for m, X in enumerate(outs):
        dist = np.linalg.norm(X - ensemble.points[m], axis=-1)
        rows.append(np.sum(dist >= epsilon, axis=-1))
    return np.array(rows)


def _summary(counts_col, trials):
    p = counts_col / trials
    worst = int(np.argmax(counts_col))
    phat = float(p[worst])
    upper = float(np.max(wilson_upper(counts_col, trials)))
    return phat, math.sqrt(phat * (1 - phat) / trials), upper


def empirical_complexity(
    ensemble: HardEnsemble,
    topo: Topology,
    cfg: ChannelConfig,
    alg: AlgorithmSpec,
    epsilon: float,
    delta: float,
    T_max: int,
    trials: int,
    rng: np.random.Generator | int = 0,
    workers: int = 1,
) -> ComplexityResult:
    """Smallest ``T <= T_max`` whose output is within ``eps`` of ``x*_m`` w.p. ``>= 1 - delta`` for all ``m``.

    A horizon passes only when the 95% Wilson upper limit of every game's
    miss probability is at most ``delta + 0.02``.  Anytime algorithms are
    simulated once to ``T_max`` and every horizon is scanned; otherwise a
    doubling search followed by bisection is used, and the returned ``T``
    and ``T - 1`` are re-simulated directly.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not epsilon > 0 or T_max < 1 or trials < 1:
        raise ValueError("epsilon, T_max and trials must be positive")
    seed = _seed_of(rng)
    limit = delta + WILSON_SLACK

    if alg.anytime:
        outs = _outputs(ensemble, topo, cfg, alg, T_max, trials, seed, workers, list(range(T_max + 1)))
        counts = _miss_counts(ensemble, outs, epsilon)
        upper = np.max(wilson_upper(counts, trials), axis=0)
        curve = [float(v) for v in counts.max(axis=0) / trials]
        ok = np.flatnonzero(upper[1:] <= limit)
        if ok.size == 0:
            phat, se, up = _summary(counts[:, T_max], trials)
            return ComplexityResult(NotReached(T_max), epsilon, delta, T_max, trials, seed, phat, se, up, None, curve)
        T = int(ok[0]) + 1
        phat, se, up = _summary(counts[:, T], trials)
        pp, ps, pu = _summary(counts[:, T - 1], trials)
        prev = {"T": T - 1, "sup_miss_prob": pp, "stderr": ps, "wilson_upper": pu, "meets": bool(pu <= limit)}
        return ComplexityResult(T, epsilon, delta, T_max, trials, seed, phat, se, up, prev, curve)

    def check(T):
        outs = _outputs(ensemble, topo, cfg, alg, T, trials, seed, workers, [T])
        col = _miss_counts(ensemble, outs, epsilon)[:, 0]
        phat, se, up = _summary(col, trials)
        return up <= limit, phat, se, up

    lo, hi = 0, None
    T = 1
    while T <= T_max:
        if check(T)[0]:
            hi = T
            break
        lo = T
        T = min(2 * T, T_max) if T < T_max else T_max + 1
    if hi is None:
        _, phat, se, up = check(T_max)
        return ComplexityResult(NotReached(T_max), epsilon, delta, T_max, trials, seed, phat, se, up)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if check(mid)[0]:
            hi = mid
        else:
            lo = mid
    _, phat, se, up = check(hi)
    prev = None
    if hi > 1:
        meets, pp, ps, pu = check(hi - 1)
        prev = {"T": hi - 1, "sup_miss_prob": pp, "stderr": ps, "wilson_upper": pu, "meets": bool(meets)}
    return ComplexityResult(hi, epsilon, delta, T_max, trials, seed, phat, se, up, prev)


def fano_check(confusion) -> dict:
    """Compare the decoding error with Fano's lower bound ``1 - (1 + I) / log K``.

    ``I`` is the plug-in mutual information of the empirical joint law of
    (true index, decoded index) under a uniform prior over rows.
    """
    C = np.asarray(confusion, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("confusion must be square")
    K = C.shape[0]
    if K < 2:
        raise ValueError("Fano's inequality needs at least two hypotheses")
    rows = C.sum(axis=1)
    if not np.all(rows == rows[0]) or rows[0] <= 0:
        raise ValueError("confusion rows must have equal positive sums")
    total = C.sum()
    joint = C / total
    pm = joint.sum(axis=1, keepdims=True)
    pd = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / (pm @ pd)[nz])))
    error = float(1.0 - np.trace(C) / total)
    bound = 1.0 - (1.0 + mi) / math.log(K)
    stderr = math.sqrt(error * (1 - error) / total)
    return {
        "empirical_error": error,
        "fano_lower_bound": bound,
        "mutual_information": mi,
        "stderr": stderr,
        "satisfied": bool(error >= bound - 2 * stderr),
        "units": "nats",
    }


def _regular_downlinks(cfg: ChannelConfig) -> str | None:
    for i, m in enumerate(cfg.downlink):
        if m is None:
            return f"downlink {i} is noiseless"
        try:
            check_regularity(m)
        except RegularityViolated as exc:
            return f"downlink {i} not regular: {exc}"
    return None


def bound_comparison_report(
    ensemble: HardEnsemble,
    topo: Topology,
    cfg: ChannelConfig,
    alg: AlgorithmSpec,
    epsilon: float,
    delta: float,
    T_max: int,
    trials: int,
    seed: int = 0,
    workers: int = 1,
    mc_samples: int = 100_000,
    complexity: ComplexityResult | None = None,
) -> dict:
    """One row per theorem: bound, empirical complexity, margin and pass flag.

    ``pass`` is ``empirical >= ceil(bound)``.  When the search did not
    finish, the empirical complexity is only known to exceed ``T_max``;
    the check passes if ``ceil(bound) <= T_max + 1`` and is undetermined
    otherwise.  Theorems whose hypotheses the scenario does not meet get
    ``pass = None`` and a reason.
    """
    if complexity is None:
        complexity = empirical_complexity(
            ensemble, topo, cfg, alg, epsilon, delta, T_max, trials, seed, workers
        )
    emp = complexity.lower_estimate()
    rows = []

    def add(theorem, report: BoundReport | None, reason: str | None = None):
        row = {"theorem": theorem, "bound": None, "ceil_bound": None, "empirical_T": str(complexity.T) if not complexity.reached else complexity.T}
        if report is None:
            row.update({"pass": None, "margin": None, "flags": [reason or "not applicable"]})
            rows.append(row)
            return
        need = report.ceil
        row.update({"bound": report.value, "ceil_bound": need, "flags": list(report.caveats)})
        if complexity.reached:
            row["margin"] = complexity.T - need
            row["pass"] = bool(complexity.T >= need)
        else:
            row["margin"] = None
            row["pass"] = True if need <= T_max + 1 else None
            row["flags"].append(f"not reached within T_max={T_max}")
        rows.append(row)

    gaussian_all = cfg.gaussian_downlink
    is_t2 = ensemble.kind == "theorem2"
    down_var = cfg.downlink_variances()

    if not is_t2:
        add("T2", None, "ensemble is not the four-point construction")
        add("T3", None, "ensemble is not the four-point construction")
    elif delta > 0.5:
        add("T2", None, "requires delta <= 0.5")
        add("T3", None, "requires delta <= 0.5")
    else:
        if gaussian_all and np.all(down_var > 0):
            add("T2", theorem2_bound(float(np.min(down_var)), ensemble.gamma, epsilon, delta))
        else:
            add("T2", None, "requires Gaussian downlinks")
        reason = None if cfg.uplink_noiseless else "requires noiseless uplinks"
        reason = reason or _regular_downlinks(cfg)
        if reason is None:
            fisher = max(fisher_information(m) for m in cfg.downlink)
            add("T3", theorem3_bound(ensemble.A.shape[0], ensemble.gamma, epsilon, delta, fisher))
        else:
            add("T3", None, reason)

    try:
        own = [Theorem4Candidate(ensemble.A, ensemble.packing, f"{ensemble.kind} ensemble")]
        add("T4", theorem4_bound(own, topo, cfg, delta, mc_samples, seed))
    except ValueError as exc:
        add("T4", None, str(exc))

    if ensemble.kind == "theorem1" and gaussian_all and np.all(down_var > 0) and cfg.alpha > 0:
        c_down = downlink_capacity(down_var, cfg.alpha)
        add("T1", theorem1_bound(math.log(len(ensemble)), c_down, delta))
        add("C1", corollary1_bound(ensemble.S, epsilon, delta, c_down))
        for r in rows[-2:]:
            r["flags"].append("valid only for algorithms meeting the average power budget alpha")
    else:
        add("T1", None, "requires the packing ensemble, Gaussian downlinks and alpha > 0")
        add("C1", None, "requires the packing ensemble, Gaussian downlinks and alpha > 0")

    return {
        "epsilon": epsilon,
        "delta": delta,
        "T_max": T_max,
        "trials": trials,
        "seed": seed,
        "complexity": complexity.to_dict(),
        "rows": rows,
    }
