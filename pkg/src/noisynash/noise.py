"""Channel noise models, network topology and channel configuration.

Information quantities are in nats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, interpolate, stats

from .exceptions import QuadratureFailure, RegularityViolated

__all__ = [
    "Regularity",
    "Gaussian",
    "Logistic",
    "TabulatedPdf",
    "NoiseModel",
    "noise_model_from_dict",
    "sample",
    "fisher_information",
    "RegularityReport",
    "check_regularity",
    "Topology",
    "ChannelConfig",
    "water_filling",
    "downlink_capacity",
    "covariance_sigma_AG",
    "min_variance_bound",
]

TAIL_MASS = 1e-14
QUAD_EPSABS = 1e-12


@dataclass(frozen=True)
class Regularity:
    """Constants of the growth bound ``|d^3/dx^3 log p(x)| <= beta1 + beta2 |x|^beta3``
    and the tail exponent slack ``r``."""

    beta1: float = 0.0
    beta2: float = 0.0
    beta3: float = 0.0
    r: float = 1.0

    def __post_init__(self):
        for name in ("beta1", "beta2", "beta3", "r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


class _NoiseBase:
    """Shared quadrature helpers for zero-mean densities on the real line."""

    regularity: Regularity

    def support(self) -> tuple[float, float]:
        """Interval carrying all but ``~1e-14`` of the mass on each side."""
        raise NotImplementedError

    def score(self, x):
        """``d/dx log p(x)``."""
        raise NotImplementedError

    def fisher_information(self) -> float:
        lo, hi = self.support()

        def integrand(x):
            s = self.score(x)
            return float(self.pdf(x) * s * s)

        return _quad(integrand, lo, hi, "Fisher information")

    def entropy(self) -> float:
        lo, hi = self.support()

        def integrand(x):
            p = float(self.pdf(x))
            return -p * float(self.logpdf(x)) if p > 0 else 0.0

        return _quad(integrand, lo, hi, "differential entropy")

    def third_log_derivative(self, x):
        h = 1e-3
        f = self.logpdf
        x = np.asarray(x, dtype=float)
        return (f(x + 2 * h) - 2 * f(x + h) + 2 * f(x - h) - f(x - 2 * h)) / (2 * h**3)


def _quad(func, lo, hi, what: str) -> float:
    points = [0.0] if lo < 0 < hi else None
    with np.errstate(all="ignore"):
        value, err, info = _quad_info(func, lo, hi, points)
    if not math.isfinite(value) or err > 1e-8:
        raise QuadratureFailure(f"{what}: quadrature did not converge (estimate {value}, error {err})")
    return float(value)


def _quad_info(func, lo, hi, points):
    out = integrate.quad(
        func, lo, hi, points=points, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=500, full_output=1
    )
    return out[0], out[1], out[2]


@dataclass(frozen=True)
class Gaussian(_NoiseBase):
    variance: float
    regularity: Regularity = field(default_factory=lambda: Regularity(0.0, 0.0, 0.0, 1.0))

    def __post_init__(self):
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise ValueError("Gaussian noise needs a positive variance")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def var(self) -> float:
        return float(self.variance)

    def pdf(self, x):
        return stats.norm.pdf(x, scale=self.std)

    def logpdf(self, x):
        return stats.norm.logpdf(x, scale=self.std)

    def score(self, x):
        return -np.asarray(x, dtype=float) / self.variance

    def third_log_derivative(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def sf_abs(self, x):
        """``P(|V| >= x)``."""
        return 2.0 * stats.norm.sf(x, scale=self.std)

    def support(self):
        c = stats.norm.isf(TAIL_MASS, scale=self.std)
        return -c, c

    def sample(self, rng: np.random.Generator, size=None):
        return rng.normal(0.0, self.std, size=size)

    def fisher_information_exact(self) -> float:
        return 1.0 / self.variance

    def entropy_exact(self) -> float:
        return 0.5 * math.log(2 * math.pi * math.e * self.variance)

    def to_dict(self) -> dict:
        return {"type": "gaussian", "variance": self.variance, "regularity": _reg_dict(self.regularity)}


@dataclass(frozen=True)
class Logistic(_NoiseBase):
    scale: float
    regularity: Regularity | None = None

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("logistic noise needs a positive scale")
        if self.regularity is None:
            # max |(log p)'''| = 1 / (3 sqrt(3) s^3) ~ 0.19245 / s^3
            object.__setattr__(self, "regularity", Regularity(0.2 / self.scale**3, 0.0, 0.0, 1.0))

    @classmethod
    def with_variance(cls, variance: float) -> "Logistic":
        return cls(math.sqrt(3.0 * variance) / math.pi)

    @property
    def var(self) -> float:
        return math.pi**2 * self.scale**2 / 3.0

    def pdf(self, x):
        return stats.logistic.pdf(x, scale=self.scale)

    def logpdf(self, x):
        return stats.logistic.logpdf(x, scale=self.scale)

    def score(self, x):
        return -np.tanh(np.asarray(x, dtype=float) / (2 * self.scale)) / self.scale

    def third_log_derivative(self, x):
        u = np.asarray(x, dtype=float) / (2 * self.scale)
        return np.tanh(u) / np.cosh(u) ** 2 / (2 * self.scale**3)

    def sf_abs(self, x):
        return 2.0 * stats.logistic.sf(x, scale=self.scale)

    def support(self):
        c = stats.logistic.isf(TAIL_MASS, scale=self.scale)
        return -c, c

    def sample(self, rng: np.random.Generator, size=None):
        return rng.logistic(0.0, self.scale, size=size)

    def fisher_information_exact(self) -> float:
        return 1.0 / (3.0 * self.scale**2)

    def to_dict(self) -> dict:
        return {"type": "logistic", "scale": self.scale, "regularity": _reg_dict(self.regularity)}


@dataclass(frozen=True, eq=False)
class TabulatedPdf(_NoiseBase):
    """Density given on a grid; zero outside it.

    Values are interpolated with a quintic spline and renormalised to unit
    mass, then shifted so the mean is zero.
    """

    grid: np.ndarray
    values: np.ndarray
    regularity: Regularity = field(default_factory=Regularity)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 6:
            raise ValueError("grid and values must be 1-d arrays of equal length >= 6")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(values < 0):
            raise ValueError("density values must be nonnegative")
        spline = interpolate.make_interp_spline(grid, values, k=5)
        mass = integrate.quad(lambda x: max(float(spline(x)), 0.0), grid[0], grid[-1], limit=500)[0]
        if not mass > 0:
            raise ValueError("density has zero mass")
        mean = integrate.quad(lambda x: x * max(float(spline(x)), 0.0), grid[0], grid[-1], limit=500)[0] / mass
        object.__setattr__(self, "grid", grid - mean)
        object.__setattr__(self, "values", values / mass)
        object.__setattr__(self, "_spline", interpolate.make_interp_spline(grid - mean, values / mass, k=5))
        cdf_x = np.linspace(self.grid[0], self.grid[-1], 4097)
        cdf_p = np.maximum(self._spline(cdf_x), 0.0)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (cdf_p[1:] + cdf_p[:-1]) * np.diff(cdf_x))])
        object.__setattr__(self, "_cdf_x", cdf_x)
        object.__setattr__(self, "_cdf", cdf / cdf[-1])

    @property
    def var(self) -> float:
        lo, hi = self.support()
        return integrate.quad(lambda x: x * x * float(self.pdf(x)), lo, hi, limit=500)[0]

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.grid[0]) & (x <= self.grid[-1])
        val = np.where(inside, np.maximum(self._spline(np.clip(x, self.grid[0], self.grid[-1])), 0.0), 0.0)
        return val if val.ndim else float(val)

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def score(self, x):
        x = np.asarray(x, dtype=float)
        p = self.pdf(x)
        dp = self._spline.derivative()(np.clip(x, self.grid[0], self.grid[-1]))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(p > 0, dp / p, 0.0)

    def sf_abs(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        F = lambda t: np.interp(t, self._cdf_x, self._cdf)
        return 1.0 - F(x) + F(-x)

    def support(self):
        return float(self.grid[0]), float(self.grid[-1])

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.uniform(size=size)
        return np.interp(u, self._cdf, self._cdf_x)

    def to_dict(self) -> dict:
        return {
            "type": "tabulated",
            "grid": self.grid.tolist(),
            "values": self.values.tolist(),
            "regularity": _reg_dict(self.regularity),
        }


NoiseModel = Gaussian | Logistic | TabulatedPdf


def _reg_dict(reg: Regularity) -> dict:
    return {"beta1": reg.beta1, "beta2": reg.beta2, "beta3": reg.beta3, "r": reg.r}


def noise_model_from_dict(data: dict) -> NoiseModel:
    kind = data.get("type")
    reg = Regularity(**data["regularity"]) if data.get("regularity") else None
    if kind == "gaussian":
        return Gaussian(float(data["variance"]), reg) if reg else Gaussian(float(data["variance"]))
    if kind == "logistic":
        if "scale" in data:
            scale = float(data["scale"])
        else:
            scale = math.sqrt(3.0 * float(data["variance"])) / math.pi
        return Logistic(scale, reg)
    if kind == "tabulated":
        model = TabulatedPdf(data["grid"], data["values"])
        return TabulatedPdf(data["grid"], data["values"], reg) if reg else model
    raise ValueError(f"unknown noise model type {kind!r}")


def sample(model: NoiseModel, rng: np.random.Generator, size=None):
    return model.sample(rng, size)


def fisher_information(model: NoiseModel) -> float:
    """Location Fisher information ``int p'(x)^2 / p(x) dx`` by adaptive quadrature."""
    value = model.fisher_information()
    if not value > 0:
        raise QuadratureFailure("Fisher information came out non-positive")
    return value


@dataclass
class RegularityReport:
    model: str
    probes: list
    third_derivative: list
    bound: list
    positive_everywhere: bool
    growth_ok: bool
    tail_points: list
    tail_products: list
    tail_ok: bool

    @property
    def passed(self) -> bool:
        return self.positive_everywhere and self.growth_ok and self.tail_ok


def check_regularity(model: NoiseModel, probe_points: Sequence[float] | None = None) -> RegularityReport:
    """Check positivity, the third-derivative growth bound and the tail decay.

    Raises ``RegularityViolated`` naming the first offending probe.
    """
    if probe_points is None:
        probe_points = np.linspace(-20.0, 20.0, 401)
    probes = np.asarray(probe_points, dtype=float)
    reg = model.regularity
    p = np.atleast_1d(model.pdf(probes))
    bad = np.flatnonzero(~(p > 0))
    if bad.size:
        x = float(probes[bad[0]])
        raise RegularityViolated(f"density vanishes at x={x} (must be positive everywhere)", probe=x)

    d3 = np.abs(np.atleast_1d(model.third_log_derivative(probes)))
    bound = reg.beta1 + reg.beta2 * np.abs(probes) ** reg.beta3
    bad = np.flatnonzero(d3 > bound + 1e-9)
    if bad.size:
        x = float(probes[bad[0]])
        raise RegularityViolated(
            f"|d^3 log p / dx^3| = {d3[bad[0]]:.6g} exceeds bound {bound[bad[0]]:.6g} at x={x}", probe=x
        )

    # x^(beta3 + 1 + r) P(|V| >= x) must decrease to zero along the tail
    start = max(float(np.max(np.abs(probes))), float(model.support()[1]) / 4.0, 1.0)
    tail_x = start * 2.0 ** np.arange(5)
    with np.errstate(all="ignore"):
        prod = tail_x ** (reg.beta3 + 1.0 + reg.r) * np.asarray(model.sf_abs(tail_x), dtype=float)
    tail_ok = bool(np.all(np.diff(prod) <= 0) and prod[-1] < 1e-6)
    if not tail_ok:
        raise RegularityViolated(f"tail does not decay fast enough: products {prod.tolist()}", probe=float(tail_x[-1]))

    return RegularityReport(
        model=type(model).__name__,
        probes=probes.tolist(),
        third_derivative=d3.tolist(),
        bound=np.broadcast_to(bound, probes.shape).tolist(),
        positive_everywhere=True,
        growth_ok=True,
        tail_points=tail_x.tolist(),
        tail_products=prod.tolist(),
        tail_ok=True,
    )


@dataclass(frozen=True, eq=False)
class Topology:
    """Who talks to which node.

    Indices are 0-based.  ``pi[i]`` is the utility node serving player
    ``i``; ``phi[p]`` the constraint node evaluating constraint ``p``.
    ``usn_members[l]`` are the players whose actions node ``l`` receives.
    """

    N: int
    L: int
    K_u: int
    K_c: int
    pi: tuple
    phi: tuple
    usn_members: tuple
    csn_members: tuple
    constraint_deps: tuple
    constraint_players: tuple = ()

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    @classmethod
    def build(
        cls,
        N: int,
        constraint_players: Sequence[Sequence[int]] = (),
        K_u: int = 1,
        pi: Sequence[int] | None = None,
        usn_members: Sequence[Sequence[int]] | None = None,
        K_c: int = 1,
        phi: Sequence[int] | None = None,
        csn_members: Sequence[Sequence[int]] | None = None,
    ) -> "Topology":
        """Fill defaults: every utility node hears every player, constraints
        spread round-robin over constraint nodes, and each constraint node
        hears exactly the players its constraints read."""
        L = len(constraint_players)
        if pi is None:
            pi = [i * K_u // N for i in range(N)]
        if usn_members is None:
            usn_members = [list(range(N)) for _ in range(K_u)]
        if phi is None:
            phi = [p % K_c for p in range(L)] if L else []
        if csn_members is None:
            csn_members = [
                sorted({j for p in range(L) if phi[p] == n for j in constraint_players[p]})
                for n in range(K_c)
            ]
        deps = [[p for p in range(L) if i in constraint_players[p]] for i in range(N)]
        return cls(
            N=int(N),
            L=int(L),
            K_u=int(K_u),
            K_c=int(K_c),
            pi=tuple(int(v) for v in pi),
            phi=tuple(int(v) for v in phi),
            usn_members=tuple(tuple(int(v) for v in m) for m in usn_members),
            csn_members=tuple(tuple(int(v) for v in m) for m in csn_members),
            constraint_deps=tuple(tuple(d) for d in deps),
            constraint_players=tuple(tuple(int(v) for v in c) for c in constraint_players),
        )

    @classmethod
    def for_set(cls, S, **kwargs) -> "Topology":
        return cls.build(S.dim, [players for _, players in S.constraint_functions()], **kwargs)

    def validate(self) -> list[str]:
        errors = []
        if self.N < 1:
            errors.append("topology.N must be >= 1")
        if not 1 <= self.K_u <= max(self.N, 1):
            errors.append(f"topology.K_u={self.K_u} must satisfy 1 <= K_u <= N={self.N}")
        if self.L and not 1 <= self.K_c <= self.L:
            errors.append(f"topology.K_c={self.K_c} must satisfy 1 <= K_c <= L={self.L}")
        if len(self.pi) != self.N:
            errors.append(f"topology.pi has {len(self.pi)} entries, expected N={self.N}")
        for i, l in enumerate(self.pi):
            if not 0 <= l < self.K_u:
                errors.append(f"topology.pi[{i}]={l} is outside [0, K_u={self.K_u})")
            elif l < len(self.usn_members) and i not in self.usn_members[l]:
                errors.append(f"topology.usn_members[{l}] must contain player {i} (pi[{i}]={l})")
        if len(self.usn_members) != self.K_u:
            errors.append(f"topology.usn_members has {len(self.usn_members)} entries, expected K_u={self.K_u}")
        if len(self.phi) != self.L:
            errors.append(f"topology.phi has {len(self.phi)} entries, expected L={self.L}")
        for p, n in enumerate(self.phi):
            if not 0 <= n < self.K_c:
                errors.append(f"topology.phi[{p}]={n} is outside [0, K_c={self.K_c})")
            elif self.constraint_players and n < len(self.csn_members):
                missing = set(self.constraint_players[p]) - set(self.csn_members[n])
                if missing:
                    errors.append(
                        f"topology.csn_members[{n}] lacks players {sorted(missing)} read by constraint {p}"
                    )
        if len(self.csn_members) != self.K_c:
            errors.append(f"topology.csn_members has {len(self.csn_members)} entries, expected K_c={self.K_c}")
        for name, groups in (("usn_members", self.usn_members), ("csn_members", self.csn_members)):
            for k, members in enumerate(groups):
                if any(not 0 <= j < self.N for j in members):
                    errors.append(f"topology.{name}[{k}] references a player outside [0, N)")
        return errors

    def G(self) -> np.ndarray:
        pi = np.asarray(self.pi)
        return (pi[:, None] == pi[None, :]).astype(float)

    @property
    def z_width(self) -> int:
        return sum(len(d) for d in self.constraint_deps)

    def to_dict(self) -> dict:
        return {
            "K_u": self.K_u,
            "pi": list(self.pi),
            "usn_members": [list(m) for m in self.usn_members],
            "K_c": self.K_c,
            "phi": list(self.phi),
            "csn_members": [list(m) for m in self.csn_members],
        }


@dataclass(frozen=True, eq=False)
class ChannelConfig:
    """Noise on every link plus the downlink power budget ``alpha``.

    An uplink variance of exactly 0 means a noiseless uplink; a downlink
    entry of ``None`` a noiseless downlink.
    """

    uplink_usn_var: tuple
    uplink_csn_var: tuple
    downlink: tuple
    alpha: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "uplink_usn_var", tuple(float(v) for v in self.uplink_usn_var))
        object.__setattr__(self, "uplink_csn_var", tuple(float(v) for v in self.uplink_csn_var))
        object.__setattr__(self, "downlink", tuple(self.downlink))
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    @classmethod
    def uniform(
        cls,
        topo: Topology,
        downlink: NoiseModel | None,
        uplink_var: float = 0.0,
        csn_var: float | None = None,
        alpha: float = 0.0,
    ) -> "ChannelConfig":
        csn_var = uplink_var if csn_var is None else csn_var
        return cls(
            (uplink_var,) * topo.K_u,
            (csn_var,) * topo.K_c,
            (downlink,) * topo.N,
            alpha,
        )

    def validate(self, topo: Topology | None = None) -> list[str]:
        errors = []
        if any(not (v >= 0 and math.isfinite(v)) for v in self.uplink_usn_var + self.uplink_csn_var):
            errors.append("channels: uplink variances must be finite and >= 0")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            errors.append("channels.alpha must be >= 0")
        if topo is not None:
            if len(self.uplink_usn_var) != topo.K_u:
                errors.append(f"channels.uplink_usn_var needs K_u={topo.K_u} entries")
            if len(self.uplink_csn_var) != topo.K_c:
                errors.append(f"channels.uplink_csn_var needs K_c={topo.K_c} entries")
            if len(self.downlink) != topo.N:
                errors.append(f"channels.downlink needs N={topo.N} entries")
        return errors

    def downlink_variances(self) -> np.ndarray:
        return np.array([0.0 if m is None else m.var for m in self.downlink])

    @property
    def uplink_noiseless(self) -> bool:
        return all(v == 0 for v in self.uplink_usn_var)

    @property
    def gaussian_downlink(self) -> bool:
        return all(isinstance(m, Gaussian) for m in self.downlink)

    def to_dict(self) -> dict:
        return {
            "uplink_usn_var": list(self.uplink_usn_var),
            "uplink_csn_var": list(self.uplink_csn_var),
            "downlink": [None if m is None else m.to_dict() for m in self.downlink],
            "alpha": self.alpha,
        }


def water_filling(variances, alpha: float) -> tuple[np.ndarray, float]:
    """Optimal powers ``max(mu - var_i, 0)`` summing to ``alpha`` and the level ``mu``."""
    var = np.asarray(variances, dtype=float)
    if np.any(var <= 0):
        raise ValueError("channel noise variances must be positive")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    order = np.sort(var)
    csum = np.cumsum(order)
    mu = order[0]
    for k in range(len(order), 0, -1):
        level = (alpha + csum[k - 1]) / k
        if level > order[k - 1] or k == 1:
            mu = level
            break
    power = np.maximum(mu - var, 0.0)
    return power, float(mu)


def downlink_capacity(variances, alpha: float) -> float:
    """Sum capacity of parallel Gaussian channels under total power ``alpha``, in nats."""
    power, _ = water_filling(variances, alpha)
    var = np.asarray(variances, dtype=float)
    return float(np.sum(0.5 * np.log1p(power / var)))


def covariance_sigma_AG(A, topo: Topology, cfg: ChannelConfig) -> np.ndarray:
    """Covariance of the effective noise at the players' receivers.

    ``diag(sigma_i^2) + (diag(sigma_usn[pi(i)]^2) A A) o G`` where ``G``
    masks pairs of players served by the same utility node.
    """
    A = np.asarray(A, dtype=float)
    usn_var = np.asarray(cfg.uplink_usn_var)[np.asarray(topo.pi)]
    sigma = np.diag(cfg.downlink_variances()) + (usn_var[:, None] * (A @ A)) * topo.G()
    return 0.5 * (sigma + sigma.T)


def min_variance_bound(A, topo: Topology, cfg: ChannelConfig) -> float:
    """Smallest eigenvalue of the effective noise covariance.

    By the dual Weyl inequality it is at least ``min_i sigma_i^2``; a
    violation indicates a bug and raises ``ArithmeticError``.
    """
    lam = float(np.linalg.eigvalsh(covariance_sigma_AG(A, topo, cfg))[0])
    floor = float(np.min(cfg.downlink_variances()))
    if lam < floor - 1e-9:
        raise ArithmeticError(f"lambda_min={lam} below min downlink variance {floor}")
    return lam
