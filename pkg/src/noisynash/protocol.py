"""Simulator for the networked game loop with noisy links.

One iteration ``k``:

1. every player ``j`` sends ``x^j_k`` over its uplinks; utility node ``l``
   receives ``x + W^l`` and constraint node ``n`` receives ``x + W^n``;
2. utility node ``pi(i)`` returns ``y^i = A_i (xhat - x*)``, the partial
   derivative of ``u_i`` at the received profile, and constraint node
   ``phi(p)`` returns ``z^p = g_p(xhat)``;
3. player ``i`` receives ``y^i + V^i`` and ``z^p + V^{i,p}`` for each
   constraint ``p`` it takes part in;
4. player ``i`` updates from its own history only.

Every link draws from its own substream, keyed by the master seed and the
link's identity, so links are independent by construction.  Simulations
are vectorised over independent trials.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .games import QuadraticGame
from .noise import ChannelConfig, Topology

__all__ = [
    "AlgorithmSpec",
    "PlayerView",
    "Trace",
    "BatchResult",
    "simulate",
    "run",
    "baseline_noisy_gradient",
    "constant_step_gradient",
    "empirical_power",
    "check_compatible",
    "register_rule",
]

USN_UP, CSN_UP, Y_DOWN, Z_DOWN = 0, 1, 2, 3


@dataclass(frozen=True)
class PlayerView:
    """What player ``i`` may read before choosing ``x^i_{k+1}``.

    Arrays are read-only with the step axis first and trials second;
    ``Z`` has one column per constraint the player takes part in.
    """

    k: int
    i: int
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    lower: float
    upper: float


def _noisy_gradient(view: PlayerView, params: dict) -> np.ndarray:
    c = params.get("c", 0.5)
    step = c / view.k ** params.get("exponent", 1.0)
    x = view.X[-1] + step * view.Y[-1]
    if params.get("projection", True):
        x = np.clip(x, view.lower, view.upper)
    return x


_RULES: dict[str, Callable] = {"noisy_gradient": _noisy_gradient}


def register_rule(name: str, func: Callable) -> None:
    """Make ``func(view, params) -> x_next`` available as a named update rule."""
    _RULES[name] = func


@dataclass(frozen=True)
class AlgorithmSpec:
    """A per-player update rule plus its parameters.

    ``anytime`` means iterates do not depend on the horizon, so one long
    simulation yields every shorter horizon as a prefix.
    """

    id: str
    params: dict = field(default_factory=dict)
    rule: str = "noisy_gradient"
    anytime: bool = True

    def update(self) -> Callable:
        if callable(self.rule):
            return self.rule
        try:
            return _RULES[self.rule]
        except KeyError:
            raise ValueError(f"unknown update rule {self.rule!r}") from None

    def x1(self, S) -> np.ndarray:
        if "x1" in self.params:
            return np.asarray(self.params["x1"], dtype=float)
        return S.centroid()

    def to_dict(self) -> dict:
        params = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.params.items()}
        return {"id": self.id, "rule": self.rule, "params": params, "anytime": self.anytime}

    @classmethod
    def from_dict(cls, data: dict) -> "AlgorithmSpec":
        kind = data.get("type", data.get("rule", "noisy_gradient"))
        if kind in ("baseline_noisy_gradient", "noisy_gradient") and "exponent" in data:
            params = {"c": data.get("c", 0.5), "exponent": data["exponent"], "projection": data.get("projection", True)}
            return AlgorithmSpec(data.get("id", "noisy_gradient"), params, "noisy_gradient")
        if kind == "constant_step_gradient":
            return constant_step_gradient(data.get("c", 0.5), data.get("projection", True))
        return cls(data.get("id", str(kind)), dict(data.get("params", {})), data.get("rule", "noisy_gradient"), data.get("anytime", True))


def baseline_noisy_gradient(c: float, exponent: float = 1.0, projection: bool = True) -> AlgorithmSpec:
    """``x_{k+1} = Proj(x_k + c / k^exponent * yhat_k)`` for each player."""
    if c < 0:
        raise ValueError("c must be nonnegative")
    if not 0.5 < exponent <= 1.0:
        raise ValueError("exponent must lie in (0.5, 1]")
    return AlgorithmSpec(
        f"noisy_gradient(c={c},exp={exponent})",
        {"c": float(c), "exponent": float(exponent), "projection": projection},
        "noisy_gradient",
    )


def constant_step_gradient(c: float, projection: bool = True) -> AlgorithmSpec:
    """Constant-step variant; a contraction on noiseless channels when ``c <= 1/||A||``."""
    if c < 0:
        raise ValueError("c must be nonnegative")
    return AlgorithmSpec(
        f"constant_step(c={c})", {"c": float(c), "exponent": 0.0, "projection": projection}, "noisy_gradient"
    )


def check_compatible(game: QuadraticGame, topo: Topology, cfg: ChannelConfig) -> None:
    errors = []
    if topo.N != game.N:
        errors.append(f"topology has N={topo.N} but the game has {game.N} players")
    L = len(game.S.constraint_functions())
    if topo.L != L:
        errors.append(f"topology has L={topo.L} constraints but the set has {L}")
    errors += cfg.validate(topo)
    if not errors:
        for i in range(game.N):
            members = set(topo.usn_members[topo.pi[i]])
            need = set(np.flatnonzero(game.A[i]).tolist())
            if not need <= members:
                errors.append(
                    f"utility node {topo.pi[i]} must receive players {sorted(need - members)} to serve player {i}"
                )
    if errors:
        raise ValueError("; ".join(errors))


def _stream(seed: int, key: tuple) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(v) for v in key)))


def _gaussian_draws(seed, key, var, shape):
    if var == 0:
        return None
    return _stream(seed, key).normal(0.0, math.sqrt(var), size=shape)


def _model_draws(seed, key, model, shape):
    if model is None:
        return None
    return model.sample(_stream(seed, key), shape)


@dataclass
class BatchResult:
    """Iterates of a batch of independent trials.

    ``X[k]`` is ``x_{k+1}`` (0-based step axis), so ``X[T]`` is the output
    after ``T`` iterations.  Receptions are recorded only when requested.
    """

    X: np.ndarray
    Y_hat: np.ndarray | None = None
    Z_hat: np.ndarray | None = None
    X_hat_usn: np.ndarray | None = None


def simulate(
    game: QuadraticGame,
    topo: Topology,
    cfg: ChannelConfig,
    alg: AlgorithmSpec,
    T: int,
    trials: int = 1,
    seed: int = 0,
    stream_key: tuple = (),
    record: bool = False,
) -> BatchResult:
    """Run ``trials`` independent copies of the loop for ``T`` iterations."""
    if T < 0 or trials < 1:
        raise ValueError("T must be >= 0 and trials >= 1")
    check_compatible(game, topo, cfg)
    N, S = game.N, game.S
    A, x_star = game.A, game.x_star
    lower, upper = S.coordinate_bounds()
    constraints = S.constraint_functions()
    update = alg.update()
    params = alg.params
    shape = (T, trials)
    key = tuple(stream_key)

    usn_noise = [
        {j: _gaussian_draws(seed, key + (USN_UP, l, j), cfg.uplink_usn_var[l], shape) for j in members}
        for l, members in enumerate(topo.usn_members)
    ]
    csn_noise = [
        {j: _gaussian_draws(seed, key + (CSN_UP, n, j), cfg.uplink_csn_var[n], shape) for j in members}
        for n, members in enumerate(topo.csn_members)
    ]
    y_noise = [_model_draws(seed, key + (Y_DOWN, i, 0), cfg.downlink[i], shape) for i in range(N)]
    z_cols = []
    z_noise = []
    for i in range(N):
        cols = []
        for p in topo.constraint_deps[i]:
            cols.append(len(z_noise))
            z_noise.append((i, p, _model_draws(seed, key + (Z_DOWN, i, p), cfg.downlink[i], shape)))
        z_cols.append(cols)

    X = np.empty((T + 1, trials, N))
    X[0] = alg.x1(S)
    Y_hat = np.empty((T, trials, N))
    Z_hat = np.empty((T, trials, len(z_noise)))
    X_hat_usn = np.full((T, trials, topo.K_u, N), np.nan) if record else None
    for k in range(T):
        x = X[k]
        y = np.empty((trials, N))
        for l, members in enumerate(topo.usn_members):
            xhat = np.zeros((trials, N))
            for j in members:
                w = usn_noise[l][j]
                xhat[:, j] = x[:, j] if w is None else x[:, j] + w[k]
            if record:
                X_hat_usn[k, :, l, list(members)] = xhat[:, list(members)].T
            served = [i for i in range(N) if topo.pi[i] == l]
            y[:, served] = (xhat - x_star) @ A[served].T
        z = np.empty((trials, topo.L))
        for n, members in enumerate(topo.csn_members):
            xhat = np.zeros((trials, N))
            for j in members:
                w = csn_noise[n][j]
                xhat[:, j] = x[:, j] if w is None else x[:, j] + w[k]
            for p in range(topo.L):
                if topo.phi[p] == n:
                    z[:, p] = constraints[p][0](xhat)
        for i in range(N):
            v = y_noise[i]
            Y_hat[k, :, i] = y[:, i] if v is None else y[:, i] + v[k]
        for c, (i, p, v) in enumerate(z_noise):
            Z_hat[k, :, c] = z[:, p] if v is None else z[:, p] + v[k]

        for i in range(N):
            view = PlayerView(
                k=k + 1,
                i=i,
                X=_readonly(X[: k + 1, :, i]),
                Y=_readonly(Y_hat[: k + 1, :, i]),
                Z=_readonly(Z_hat[: k + 1, :, z_cols[i]]),
                lower=float(lower[i]),
                upper=float(upper[i]),
            )
            X[k + 1, :, i] = update(view, params)
    if record:
        return BatchResult(X, Y_hat, Z_hat, X_hat_usn)
    return BatchResult(X)


def _readonly(a: np.ndarray) -> np.ndarray:
    v = a.view()
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class Trace:
    """One trajectory of ``T`` iterations.

    ``X`` holds ``x_1 .. x_T`` and ``output`` is ``x_{T+1}``.  ``X_hat_usn``
    has shape ``(T, K_u, N)`` with NaN where a node does not hear a player.
    """

    X: np.ndarray
    output: np.ndarray
    Y_hat: np.ndarray
    Z_hat: np.ndarray
    X_hat_usn: np.ndarray
    seed: int
    game_id: str = ""
    algorithm_id: str = ""
    A: np.ndarray | None = None
    x_star: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.X.shape[0]

    def to_rows(self) -> tuple[list, list]:
        N = self.X.shape[1]
        header = ["k"] + [f"x{i}" for i in range(N)] + [f"yhat{i}" for i in range(N)]
        header += [f"zhat{c}" for c in range(self.Z_hat.shape[1])]
        rows = []
        for k in range(self.T):
            rows.append([k + 1, *self.X[k], *self.Y_hat[k], *self.Z_hat[k]])
        return header, rows

    def to_csv(self) -> str:
        header, rows = self.to_rows()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "game_id": self.game_id,
            "algorithm_id": self.algorithm_id,
            "X": self.X.tolist(),
            "output": self.output.tolist(),
            "Y_hat": self.Y_hat.tolist(),
            "Z_hat": self.Z_hat.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def run(
    game: QuadraticGame,
    topo: Topology,
    cfg: ChannelConfig,
    alg: AlgorithmSpec,
    T: int,
    rng: np.random.Generator | int = 0,
    game_id: str = "",
) -> Trace:
    """Simulate one trajectory of ``T >= 1`` iterations and record everything."""
    if T < 1:
        raise ValueError("T must be >= 1")
    seed = int(rng.integers(0, 2**63 - 1)) if isinstance(rng, np.random.Generator) else int(rng)
    res = simulate(game, topo, cfg, alg, T, trials=1, seed=seed, record=True)
    return Trace(
        X=res.X[:T, 0, :].copy(),
        output=res.X[T, 0, :].copy(),
        Y_hat=res.Y_hat[:, 0, :].copy(),
        Z_hat=res.Z_hat[:, 0, :].copy(),
        X_hat_usn=res.X_hat_usn[:, 0].copy(),
        seed=seed,
        game_id=game_id,
        algorithm_id=alg.id,
        A=game.A,
        x_star=game.x_star,
    )


def empirical_power(trace: Trace) -> float:
    """Mean squared norm of the noiseless utility feedback ``A (x_k - x*)``."""
    if trace.A is None or trace.x_star is None:
        raise ValueError("trace lacks the game data needed to recompute y")
    y = (trace.X - trace.x_star) @ trace.A.T
    return float(np.mean(np.sum(y * y, axis=1)))
