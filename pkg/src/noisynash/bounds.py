"""Iteration-complexity lower bounds for noisy Nash equilibrium seeking.

Every bound is a number of iterations below which no algorithm can reach
an ``epsilon``-neighbourhood of the equilibrium with probability at least
``1 - delta`` on every game of the class.  Logarithms are natural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .divergence import mi_mixture_estimate
from .exceptions import BallDoesNotFit, DeltaTooLarge, ZeroCapacity
from .games import check_negative_definite, gamma_of, theorem2_ensemble
from .geometry import ConstraintSet, PackingResult, lattice_points
from .noise import ChannelConfig, Topology, covariance_sigma_AG

__all__ = [
    "BoundReport",
    "theorem1_bound",
    "corollary1_bound",
    "theorem2_bound",
    "theorem3_bound",
    "Theorem4Candidate",
    "default_theorem4_candidates",
    "theorem4_bound",
]

VACUOUS = "vacuous"


@dataclass
class BoundReport:
    theorem: str
    value: float
    inputs: dict
    caveats: list = field(default_factory=list)
    details: list = field(default_factory=list)

    @property
    def ceil(self) -> int:
        # tolerate quadrature noise such as 6.250000000008
        return int(math.ceil(self.value - 1e-9))

    @property
    def vacuous(self) -> bool:
        return VACUOUS in self.caveats

    def to_dict(self) -> dict:
        out = {
            "theorem": self.theorem,
            "value": self.value,
            "ceil": self.ceil,
            "inputs": self.inputs,
            "caveats": list(self.caveats),
            "units": "iterations",
        }
        if self.details:
            out["details"] = self.details
        return out


def _report(theorem: str, raw: float, inputs: dict, caveats=()) -> BoundReport:
    caveats = list(caveats)
    if not raw > 0:
        caveats.append(VACUOUS)
        raw = 0.0
    return BoundReport(theorem, float(raw), inputs, caveats)


def _check_delta(delta: float, upper: float = 1.0) -> None:
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if delta > upper:
        raise DeltaTooLarge(f"delta={delta} violates the precondition delta <= {upper}")


def theorem1_bound(logM: float, C_down: float, delta: float) -> BoundReport:
    """``((1 - delta) log M - 1) / C_down`` from the capacity of the action set.

    ``logM`` is the log-cardinality of a 2-epsilon distinguishable subset
    and ``C_down`` the downlink sum capacity per iteration.
    """
    _check_delta(delta)
    if not C_down > 0:
        raise ZeroCapacity("downlink capacity must be positive")
    raw = ((1.0 - delta) * logM - 1.0) / C_down
    return _report("T1", raw, {"logM": logM, "C_down": C_down, "delta": delta})


def corollary1_bound(S: ConstraintSet, epsilon: float, delta: float, C_down: float) -> BoundReport:
    """Theorem 1 with ``log M`` replaced by its volume/surface lower estimate."""
    _check_delta(delta)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not C_down > 0:
        raise ZeroCapacity("downlink capacity must be positive")
    vol, surf = S.volume(), S.surface_area()
    inputs = {
        "N": S.dim,
        "epsilon": epsilon,
        "delta": delta,
        "C_down": C_down,
        "volume": vol,
        "surface_area": surf,
    }
    room = vol - epsilon * surf
    if not room > 0:
        return _report("C1", 0.0, inputs, ["Vol(S) - eps * P(S) <= 0"])
    log_m = S.dim * math.log(0.5 / epsilon) + math.log(room)
    inputs["logM_lower"] = log_m
    return _report("C1", ((1.0 - delta) * log_m - 1.0) / C_down, inputs)


def theorem2_bound(min_sigma2: float, gamma: float, epsilon: float, delta: float) -> BoundReport:
    """``(2(1 - delta) - 1) min sigma^2 / (4 gamma^2 eps^2)`` for Gaussian channels."""
    _check_delta(delta, 0.5)
    if not (min_sigma2 > 0 and gamma > 0 and epsilon > 0):
        raise ValueError("min_sigma2, gamma and epsilon must be positive")
    raw = (1.0 - 2.0 * delta) * min_sigma2 / (4.0 * gamma**2 * epsilon**2)
    inputs = {"min_sigma2": min_sigma2, "gamma": gamma, "epsilon": epsilon, "delta": delta}
    return _report("T2", raw, inputs)


def theorem3_bound(N: int, gamma: float, epsilon: float, delta: float, max_fisher: float) -> BoundReport:
    """``(2(1 - delta) - 1) / (4 N eps^2 gamma^2 max_i I_i)`` for regular downlink noise."""
    _check_delta(delta, 0.5)
    if not (N >= 1 and gamma > 0 and epsilon > 0 and max_fisher > 0):
        raise ValueError("N, gamma, epsilon and max_fisher must be positive")
    raw = (1.0 - 2.0 * delta) / (4.0 * N * epsilon**2 * gamma**2 * max_fisher)
    inputs = {"N": N, "gamma": gamma, "epsilon": epsilon, "delta": delta, "max_fisher": max_fisher}
    return _report("T3", raw, inputs, ["leading order; O(eps^3) remainder dropped"])


@dataclass(frozen=True, eq=False)
class Theorem4Candidate:
    A: np.ndarray
    packing: PackingResult
    label: str = ""


def _lattice_subset(S: ConstraintSet, epsilon: float, size: int) -> PackingResult | None:
    scale = 1.0 + 1e-6
    try:
        pts = lattice_points(S, epsilon * scale)
    except Exception:
        return None
    if pts.shape[0] < size:
        return None
    d = np.linalg.norm(pts - S.centroid(), axis=1)
    order = np.argsort(d, kind="stable")
    return PackingResult(pts[order[:size]], float(epsilon), "greedy", extra={"source": "lattice"})


def default_theorem4_candidates(
    S: ConstraintSet, epsilon: float, gamma: float, rng: np.random.Generator | int = 0
) -> list[Theorem4Candidate]:
    """Finite family over which the supremum is taken.

    Matrices: ``-gamma I`` and ``-gamma (I + 0.1 R) / lambda_min(I + 0.1 R)``
    with ``R`` random symmetric of unit norm, so ``gamma <= ||A|| <= 1.23 gamma``.
    Packings: the four-point square around the centroid (if it fits) and
    the points of a slightly dilated ``2 eps`` lattice nearest the centroid,
    of sizes 2, 4 and 8.
    """
    rng = np.random.default_rng(rng)
    n = S.dim
    R = rng.standard_normal((n, n))
    R = 0.5 * (R + R.T)
    R /= np.linalg.norm(R, 2)
    B = np.eye(n) + 0.1 * R
    B = 0.5 * (B + B.T)
    A_pert = -gamma * B / float(np.linalg.eigvalsh(B)[0])
    A_pert = 0.5 * (A_pert + A_pert.T)
    mats = [("-gamma*I", -gamma * np.eye(n)), ("-gamma*(I+0.1R)", A_pert)]

    packings = []
    try:
        packings.append(("square4", theorem2_ensemble(S, epsilon, gamma).packing))
    except BallDoesNotFit:
        pass
    for size in (2, 4, 8):
        pk = _lattice_subset(S, epsilon, size)
        if pk is not None:
            packings.append((f"lattice{size}", pk))
    return [Theorem4Candidate(A, pk, f"{a_name}|{p_name}") for a_name, A in mats for p_name, pk in packings]


def _mi_noise(A: np.ndarray, topo: Topology, cfg: ChannelConfig):
    if cfg.gaussian_downlink:
        return covariance_sigma_AG(A, topo, cfg)
    if not cfg.uplink_noiseless:
        raise ValueError("non-Gaussian downlink noise is only supported with noiseless uplinks")
    if any(m is None for m in cfg.downlink):
        raise ValueError("every downlink needs a noise model for the mutual information to be finite")
    return list(cfg.downlink)


def theorem4_bound(
    candidates,
    topo: Topology,
    cfg: ChannelConfig,
    delta: float,
    mc_samples: int = 100_000,
    rng: np.random.Generator | int = 0,
    gamma: float | None = None,
    S: ConstraintSet | None = None,
) -> BoundReport:
    """Supremum over candidates of ``((1 - delta) log|S_2eps| - 1) / I(x*; -A x* + W)``.

    The mutual information is estimated by Monte Carlo; its upper
    confidence value ``estimate + 3 stderr`` is used in the denominator so
    the reported number stays a lower bound despite sampling error.
    """
    _check_delta(delta)
    rng = np.random.default_rng(rng)
    rows = []
    best = 0.0
    for k, cand in enumerate(candidates):
        if not isinstance(cand, Theorem4Candidate):
            cand = Theorem4Candidate(*cand)
        A = check_negative_definite(cand.A)
        norm = gamma_of(A)
        if gamma is not None and norm < gamma - 1e-9:
            raise ValueError(f"candidate {k}: ||A|| = {norm} is below gamma = {gamma}")
        if S is not None and not cand.packing.is_valid(S):
            raise ValueError(f"candidate {k}: packing is not 2-epsilon distinguishable in S")
        size = cand.packing.count
        numerator = (1.0 - delta) * math.log(size) - 1.0
        row = {"label": cand.label or str(k), "norm_A": norm, "size": size}
        if numerator <= 0:
            row.update(mi=None, mi_stderr=None, value=0.0, note=VACUOUS)
        else:
            means = -cand.packing.points @ A.T
            est = mi_mixture_estimate(means, _mi_noise(A, topo, cfg), mc_samples, rng)
            mi_hi = est.value + 3.0 * est.stderr
            row.update(mi=est.value, mi_stderr=est.stderr, mi_upper=mi_hi)
            if mi_hi > 0:
                row["value"] = numerator / mi_hi
            else:
                row.update(value=0.0, note="mutual information estimate not positive")
        best = max(best, row["value"])
        rows.append(row)
    inputs = {"delta": delta, "mc_samples": mc_samples, "gamma": gamma, "candidates": len(rows)}
    report = _report(
        "T4", best, inputs, ["certified lower bound over the candidate set only; MI upper value used"]
    )
    report.details = rows
    return report
