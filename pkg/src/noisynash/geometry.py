"""Constraint sets, 2-epsilon packings and lattice counting.

All distances are Euclidean.  A packing is "2-epsilon distinguishable" when
every pair of its points is more than ``2 * epsilon`` apart.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .exceptions import LatticeBudgetExceeded

__all__ = [
    "Box",
    "Ball",
    "ConstraintSet",
    "PackingResult",
    "constraint_set_from_dict",
    "volume",
    "surface_area",
    "greedy_packing",
    "lattice_count",
    "lattice_points",
    "lattice_lower_bound",
    "kolmogorov_capacity_estimate",
    "isoperimetric_ratio",
    "isoperimetric_check",
]

CONTAINS_TOL = 1e-12
DEFAULT_LATTICE_BUDGET = 10_000_000


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def _unit_ball_volume(n: int) -> float:
    return math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1.0))


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = _as_vector(self.lower, "lower")
        upper = _as_vector(self.upper, "upper")
        if lower.shape != upper.shape:
            raise ValueError("lower and upper must have the same length")
        if not np.all(lower < upper):
            raise ValueError("box requires lower[i] < upper[i] for every i")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def extent(self) -> np.ndarray:
        return self.upper - self.lower

    def centroid(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lower, self.upper

    def volume(self) -> float:
        return float(np.prod(self.extent))

    def surface_area(self) -> float:
        ext = self.extent
        # sum of facet areas; for N=1 the two endpoints count once each
        return float(sum(2.0 * np.prod(np.delete(ext, i)) for i in range(self.dim)))

    def contains(self, x, tol: float = CONTAINS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def project(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def coordinate_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate interval each player can be clipped to locally."""
        return self.lower, self.upper

    def interior_distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(min(np.min(x - self.lower), np.min(self.upper - x)))

    def vertices(self) -> np.ndarray:
        corners = itertools.product(*zip(self.lower, self.upper))
        return np.array(list(corners), dtype=float)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def constraint_functions(self):
        """Coordinate bounds written as ``g(x) <= 0``.

        Returns a list of ``(g, players)`` with ``players`` the coordinates
        the constraint reads.  Constraint ``2i`` is ``lower_i - x_i`` and
        ``2i + 1`` is ``x_i - upper_i``.
        """
        out = []
        for i in range(self.dim):
            lo, hi = float(self.lower[i]), float(self.upper[i])
            out.append((lambda X, i=i, lo=lo: lo - X[..., i], (i,)))
            out.append((lambda X, i=i, hi=hi: X[..., i] - hi, (i,)))
        return out

    def to_dict(self) -> dict:
        return {"type": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}

    def __eq__(self, other):
        return (
            isinstance(other, Box)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __repr__(self):
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed Euclidean ball."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = _as_vector(self.center, "center")
        radius = float(self.radius)
        if not (radius > 0 and math.isfinite(radius)):
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", radius)

    @property
    def dim(self) -> int:
        return self.center.size

    def centroid(self) -> np.ndarray:
        return self.center.copy()

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.center - self.radius, self.center + self.radius

    def volume(self) -> float:
        return _unit_ball_volume(self.dim) * self.radius**self.dim

    def surface_area(self) -> float:
        return self.dim * self.volume() / self.radius

    def contains(self, x, tol: float = CONTAINS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(x - self.center) <= self.radius + tol)

    def project(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x - self.center
        norm = np.linalg.norm(d, axis=-1, keepdims=True)
        scale = np.where(norm > self.radius, self.radius / np.maximum(norm, 1e-300), 1.0)
        return self.center + d * scale

    def coordinate_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        # inscribed cube: clipping each coordinate here keeps the profile in the ball
        half = self.radius / math.sqrt(self.dim)
        return self.center - half, self.center + half

    def interior_distance(self, x) -> float:
        return float(self.radius - np.linalg.norm(np.asarray(x, dtype=float) - self.center))

    def vertices(self) -> np.ndarray:
        eye = np.eye(self.dim)
        return np.vstack([self.center + self.radius * eye, self.center - self.radius * eye])

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        d = rng.standard_normal((n, self.dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / self.dim)
        return self.center + r * d

    def constraint_functions(self):
        c, r2 = self.center, self.radius**2
        players = tuple(range(self.dim))
        return [(lambda X: np.sum((X - c) ** 2, axis=-1) - r2, players)]

    def to_dict(self) -> dict:
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}

    def __eq__(self, other):
        return (
            isinstance(other, Ball)
            and np.array_equal(self.center, other.center)
            and self.radius == other.radius
        )

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


ConstraintSet = Box | Ball


def constraint_set_from_dict(data: dict) -> ConstraintSet:
    kind = data.get("type")
    if kind == "box":
        return Box(data["lower"], data["upper"])
    if kind == "ball":
        return Ball(data["center"], data["radius"])
    raise ValueError(f"unknown constraint set type {kind!r}")


def volume(S: ConstraintSet) -> float:
    return S.volume()


def surface_area(S: ConstraintSet) -> float:
    return S.surface_area()


@dataclass(frozen=True, eq=False)
class PackingResult:
    """A finite subset of ``S`` whose points are pairwise far apart.

    ``method`` is ``"greedy"`` (strict ``> 2 epsilon`` separation),
    ``"lattice"`` or ``"cross"``.  The latter two are built on spacings of
    exactly ``2 epsilon`` and are only checked with ``>=``.
    """

    points: np.ndarray
    epsilon: float
    method: str = "greedy"
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.count

    def min_distance(self) -> float:
        if self.count < 2:
            return math.inf
        diff = self.points[:, None, :] - self.points[None, :, :]
        d = np.sqrt(np.sum(diff**2, axis=-1))
        return float(np.min(d[np.triu_indices(self.count, k=1)]))

    def is_valid(self, S: ConstraintSet) -> bool:
        if not all(S.contains(p) for p in self.points):
            return False
        sep = 2.0 * self.epsilon
        if self.method == "greedy":
            return self.min_distance() > sep
        return self.min_distance() >= sep * (1.0 - 1e-12)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "epsilon": self.epsilon,
            "count": self.count,
            "seed": self.seed,
            "points": self.points.tolist(),
        }


def _candidate_cloud(S: ConstraintSet, rng: np.random.Generator, n_random: int) -> np.ndarray:
    parts = [S.sample_uniform(rng, n_random)]
    if S.dim <= 12:
        parts.append(S.vertices())
    if isinstance(S, Ball):
        # dense boundary sample: greedy packings want points on the sphere
        d = rng.standard_normal((n_random // 2, S.dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        parts.append(S.center + S.radius * d)
    else:
        # points on the faces of the box
        m = n_random // 2
        face_pts = S.sample_uniform(rng, m)
        axes = rng.integers(0, S.dim, size=m)
        side = rng.integers(0, 2, size=m)
        face_pts[np.arange(m), axes] = np.where(side == 0, S.lower[axes], S.upper[axes])
        parts.append(face_pts)
    cloud = np.vstack(parts)
    return cloud


def _farthest_point_traversal(
    cloud: np.ndarray, start: int, stop_distance: float
) -> tuple[np.ndarray, np.ndarray]:
    """Gonzalez traversal; returns chosen indices and their insertion distances.

    Insertion distances are non-increasing, so the prefix whose insertion
    distance exceeds ``2 eps`` is a valid packing for every ``eps``.
    """
    chosen = [start]
    insert_d = [math.inf]
    dist = np.linalg.norm(cloud - cloud[start], axis=1)
    while True:
        j = int(np.argmax(dist))
        dj = float(dist[j])
        if not dj > stop_distance:
            break
        chosen.append(j)
        insert_d.append(dj)
        np.minimum(dist, np.linalg.norm(cloud - cloud[j], axis=1), out=dist)
    return np.array(chosen), np.array(insert_d)


def greedy_packing(
    S: ConstraintSet,
    epsilon: float,
    seed: int = 0,
    restarts: int = 8,
    n_candidates: int | None = None,
) -> PackingResult:
    """Farthest-point packing with pairwise distances strictly above ``2 epsilon``.

    The candidate cloud is drawn once from ``seed`` and does not depend on
    ``epsilon``; each restart begins the traversal at a different random
    candidate and the largest packing wins.  With a fixed seed the count is
    therefore non-increasing in ``epsilon``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = np.random.default_rng(seed)
    if n_candidates is None:
        n_candidates = 3000 * max(1, min(S.dim, 4))
    cloud = _candidate_cloud(S, rng, n_candidates)
    starts = rng.choice(cloud.shape[0], size=restarts, replace=False)
    best = None
    for start in starts:
        idx, _ = _farthest_point_traversal(cloud, int(start), 2.0 * epsilon)
        if best is None or idx.size > best.size:
            best = idx
    return PackingResult(cloud[best], float(epsilon), "greedy", seed=seed)


def _lattice_axes(S: ConstraintSet, epsilon: float, budget: int) -> list[np.ndarray]:
    step = 2.0 * epsilon
    lo, hi = S.bounding_box()
    if isinstance(S, Ball):
        # anchored at the center so the center itself is a lattice point
        k = int(math.floor(S.radius / step + 1e-9))
        ks = np.arange(-k, k + 1)
        axes = [S.center[i] + step * ks for i in range(S.dim)]
    else:
        axes = []
        for i in range(S.dim):
            k = int(math.floor((hi[i] - lo[i]) / step + 1e-9))
            axes.append(lo[i] + step * np.arange(k + 1))
    total = 1
    for a in axes:
        total *= a.size
        if total > budget:
            raise LatticeBudgetExceeded(
                f"lattice enumeration needs more than {budget} points; instance too large"
            )
    return axes


def lattice_points(
    S: ConstraintSet, epsilon: float, budget: int = DEFAULT_LATTICE_BUDGET
) -> np.ndarray:
    """Points of the spacing-``2 epsilon`` cubic lattice that lie in ``S``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    axes = _lattice_axes(S, epsilon, budget)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, S.dim)
    if isinstance(S, Ball):
        keep = np.linalg.norm(grid - S.center, axis=1) <= S.radius + CONTAINS_TOL
        grid = grid[keep]
    return grid


def lattice_count(S: ConstraintSet, epsilon: float, budget: int = DEFAULT_LATTICE_BUDGET) -> int:
    return int(lattice_points(S, epsilon, budget).shape[0])


def lattice_lower_bound(S: ConstraintSet, epsilon: float) -> float:
    """``(1 / 2eps)^N (Vol(S) - eps * P(S))``; may be non-positive."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return (0.5 / epsilon) ** S.dim * (S.volume() - epsilon * S.surface_area())


def kolmogorov_capacity_estimate(
    S: ConstraintSet,
    epsilon: float,
    seed: int = 0,
    restarts: int = 8,
    budget: int = DEFAULT_LATTICE_BUDGET,
) -> float:
    """Certified lower estimate of ``log M_{2 eps}(S)`` in nats.

    The lattice is dilated by ``1e-9`` so its spacing strictly exceeds ``2 eps``.
    """
    greedy = greedy_packing(S, epsilon, seed=seed, restarts=restarts).count
    try:
        lattice = lattice_count(S, epsilon * (1.0 + 1e-9), budget)
    except LatticeBudgetExceeded:
        lattice = 0
    return math.log(max(greedy, lattice, 1))


def isoperimetric_ratio(S: ConstraintSet) -> float:
    """``Vol(S)`` divided by the isoperimetric upper bound; at most 1, 1 for balls."""
    n = S.dim
    if n < 2:
        raise ValueError("isoperimetric inequality needs dimension >= 2")
    p = n / (n - 1)
    unit_vol = _unit_ball_volume(n)
    unit_surf = n * unit_vol
    return S.volume() / (unit_vol / unit_surf**p * S.surface_area() ** p)


def isoperimetric_check(S: ConstraintSet, tol: float = 1e-9) -> bool:
    # in one dimension the inequality is vacuous
    if S.dim < 2:
        return True
    return isoperimetric_ratio(S) <= 1.0 + tol
