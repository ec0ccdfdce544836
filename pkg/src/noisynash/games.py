"""Quadratic hard-instance games and the ensembles built from packings.

Player ``i`` of the game with target equilibrium ``x_star`` has utility

    u_i(x) = a_ii / 2 * x_i**2 + x_i * (-A_i @ x_star + sum_{j != i} a_ij x_j)

so the pseudo-gradient is ``A @ (x - x_star)`` and its Jacobian is ``A``.
For symmetric negative definite ``A`` the game has the strictly concave
potential ``x' A x / 2 - x' A x_star``, hence ``x_star`` is its unique
equilibrium on any convex set containing it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import BadASpec, BallDoesNotFit, NotNegativeDefinite, PointOutsideSet
from .geometry import Ball, Box, ConstraintSet, PackingResult, constraint_set_from_dict, greedy_packing

__all__ = [
    "QuadraticGame",
    "HardEnsemble",
    "build_quadratic_game",
    "utility",
    "pseudo_gradient",
    "jacobian_pseudo_gradient",
    "verify_ne",
    "gamma_of",
    "theorem1_ensemble",
    "theorem2_ensemble",
    "random_negative_definite",
    "check_negative_definite",
]

ND_TOL = 1e-12


def check_negative_definite(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotNegativeDefinite("A must be a square matrix")
    if not np.array_equal(A, A.T):
        raise NotNegativeDefinite("A must be exactly symmetric")
    top = float(np.max(np.linalg.eigvalsh(A)))
    if not top < -ND_TOL:
        raise NotNegativeDefinite(f"A has eigenvalue {top:.3g} >= 0")
    return A


@dataclass(frozen=True, eq=False)
class QuadraticGame:
    A: np.ndarray
    x_star: np.ndarray
    S: ConstraintSet

    @property
    def N(self) -> int:
        return self.A.shape[0]

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "x_star": self.x_star.tolist(),
            "constraint_set": self.S.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QuadraticGame":
        return build_quadratic_game(
            data["A"], data["x_star"], constraint_set_from_dict(data["constraint_set"])
        )


def build_quadratic_game(A, x_star, S: ConstraintSet) -> QuadraticGame:
    """Game whose unconstrained (and constrained) equilibrium is ``x_star``.

    Raises
    ------
    NotNegativeDefinite
        If ``A`` is not symmetric with all eigenvalues below ``-1e-12``.
    PointOutsideSet
        If ``x_star`` is not in ``S``.
    """
    A = check_negative_definite(A)
    x_star = np.array(x_star, dtype=float).reshape(-1)
    if x_star.size != A.shape[0] or S.dim != A.shape[0]:
        raise ValueError("A, x_star and S must share one dimension")
    if not S.contains(x_star):
        raise PointOutsideSet(f"x_star={x_star.tolist()} is not in {S!r}")
    A.setflags(write=False)
    x_star.setflags(write=False)
    return QuadraticGame(A, x_star, S)


def utility(game: QuadraticGame, i: int, x) -> float:
    if not 0 <= i < game.N:
        raise IndexError(f"player index {i} out of range for N={game.N}")
    x = np.asarray(x, dtype=float)
    A = game.A
    cross = A[i] @ x - A[i, i] * x[i]
    return float(0.5 * A[i, i] * x[i] ** 2 + x[i] * (-A[i] @ game.x_star + cross))


def pseudo_gradient(game: QuadraticGame, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (x - game.x_star) @ game.A.T


def jacobian_pseudo_gradient(game: QuadraticGame, x=None) -> np.ndarray:
    return game.A.copy()


def best_response(game: QuadraticGame, i: int, x) -> float:
    """Maximiser of ``u_i`` over player ``i``'s own action, others fixed."""
    x = np.asarray(x, dtype=float)
    A = game.A
    others = A[i] @ x - A[i, i] * x[i]
    br = (A[i] @ game.x_star - others) / A[i, i]
    if isinstance(game.S, Box):
        br = min(max(br, game.S.lower[i]), game.S.upper[i])
    return float(br)


def verify_ne(game: QuadraticGame, x, tol: float = 1e-8) -> bool:
    """True iff no player moves more than ``tol`` under its best response.

    Boxes use the exact constrained best response.  For balls the
    unconstrained best response is used, which is exact when the candidate
    lies in the interior.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float)
    return all(abs(best_response(game, i, x) - x[i]) <= tol for i in range(game.N))


def gamma_of(game_or_A) -> float:
    A = game_or_A.A if isinstance(game_or_A, QuadraticGame) else np.asarray(game_or_A, dtype=float)
    return float(np.linalg.norm(A, 2))


@dataclass(frozen=True, eq=False)
class HardEnsemble:
    games: tuple
    packing: PackingResult
    gamma: float
    kind: str = "custom"
    meta: dict = field(default_factory=dict)

    @property
    def A(self) -> np.ndarray:
        return self.games[0].A

    @property
    def S(self) -> ConstraintSet:
        return self.games[0].S

    @property
    def points(self) -> np.ndarray:
        return self.packing.points

    def __len__(self):
        return len(self.games)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "gamma": self.gamma,
            "A": self.A.tolist(),
            "constraint_set": self.S.to_dict(),
            "epsilon": self.packing.epsilon,
            "x_star": self.points.tolist(),
        }


def ensemble_from_packing(A, packing: PackingResult, S: ConstraintSet, kind: str) -> HardEnsemble:
    games = tuple(build_quadratic_game(A, p, S) for p in packing.points)
    return HardEnsemble(games, packing, gamma_of(games[0].A), kind)


def _validate_a_spec(A_spec, gamma: float, n: int) -> np.ndarray:
    try:
        A = check_negative_definite(A_spec)
    except NotNegativeDefinite as exc:
        raise BadASpec(str(exc)) from exc
    if A.shape != (n, n):
        raise BadASpec(f"A_spec must be {n}x{n}")
    if abs(gamma_of(A) - gamma) > 1e-9:
        raise BadASpec(f"||A_spec||_2 = {gamma_of(A):.12g} differs from gamma = {gamma}")
    return A


def theorem2_ensemble(
    S: ConstraintSet, epsilon: float, gamma: float, A_spec=None
) -> HardEnsemble:
    """Four equilibria at 90 degree spacing on a circle of radius ``sqrt(2) eps``.

    The circle lies in the plane of the first two coordinates and is
    centred at the centroid of ``S``.  Neighbouring points are ``2 eps``
    apart and opposite points ``2 sqrt(2) eps``.
    """
    if not (epsilon > 0 and gamma > 0):
        raise ValueError("epsilon and gamma must be positive")
    n = S.dim
    if n < 2:
        raise BallDoesNotFit("a 2-ball needs at least two coordinates")
    radius = math.sqrt(2.0) * epsilon
    c = S.centroid()
    if isinstance(S, Box):
        room = min(c[0] - S.lower[0], c[1] - S.lower[1])
    else:
        room = S.radius
    if not radius < room - 1e-9:
        raise BallDoesNotFit(
            f"2-ball of radius {radius:.6g} does not fit inside {S!r} around its centroid"
        )
    A = -gamma * np.eye(n) if A_spec is None else _validate_a_spec(A_spec, gamma, n)
    pts = np.tile(c, (4, 1))
    pts[:, 0] += epsilon * np.array([1.0, -1.0, -1.0, 1.0])
    pts[:, 1] += epsilon * np.array([1.0, 1.0, -1.0, -1.0])
    packing = PackingResult(pts, float(epsilon), "cross")
    ens = ensemble_from_packing(A, packing, S, "theorem2")
    return HardEnsemble(ens.games, packing, float(gamma), "theorem2")


def theorem1_ensemble(
    S: ConstraintSet,
    epsilon: float,
    A_spec=None,
    packing: PackingResult | None = None,
    seed: int = 0,
    restarts: int = 8,
) -> HardEnsemble:
    """One game per point of a ``2 eps``-distinguishable packing of ``S``."""
    if packing is None:
        packing = greedy_packing(S, epsilon, seed=seed, restarts=restarts)
    A = -np.eye(S.dim) if A_spec is None else check_negative_definite(A_spec)
    return ensemble_from_packing(A, packing, S, "theorem1")


def random_negative_definite(n: int, rng: np.random.Generator, gamma: float | None = None) -> np.ndarray:
    """Random symmetric negative definite matrix, optionally with ``||A||_2 = gamma``."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = -rng.uniform(0.2, 2.0, size=n)
    A = (q * eig) @ q.T
    A = 0.5 * (A + A.T)
    if gamma is not None:
        A *= gamma / np.linalg.norm(A, 2)
        A = 0.5 * (A + A.T)
    return A
