"""KL divergences between shifted noise densities and mixture mutual information."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, linalg
from scipy.special import logsumexp

from .exceptions import QuadratureFailure, SingularSigma
from .noise import NoiseModel, fisher_information

__all__ = [
    "kl_numeric",
    "kl_gaussian_shift",
    "kl_product_shift",
    "KlExpansionReport",
    "kl_expansion_check",
    "MIEstimate",
    "mi_mixture_estimate",
]

KL_EPSABS = 1e-13
CHUNK = 10_000


def kl_numeric(p: NoiseModel, shift: float) -> float:
    """``KL(p(x) || p(x - shift))`` by adaptive Gauss-Kronrod quadrature."""
    shift = float(shift)
    if shift == 0.0:
        return 0.0
    lo, hi = p.support()

    def integrand(x):
        px = float(p.pdf(x))
        if px == 0.0:
            return 0.0
        return px * float(p.logpdf(x) - p.logpdf(x - shift))

    points = sorted({0.0, shift}) if lo < min(0.0, shift) and max(0.0, shift) < hi else None
    with np.errstate(all="ignore"):
        value, err = integrate.quad(
            integrand, lo, hi, points=points, epsabs=KL_EPSABS, epsrel=1e-13, limit=500
        )[:2]
    if not math.isfinite(value) or err > 1e-10:
        raise QuadratureFailure(f"KL quadrature failed for shift {shift} (error estimate {err})")
    return max(float(value), 0.0)


def kl_gaussian_shift(delta, Sigma) -> float:
    """``delta' Sigma^{-1} delta / 2``: KL between ``N(a, Sigma)`` and ``N(a + delta, Sigma)``."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if Sigma.shape != (delta.size, delta.size):
        raise ValueError("Sigma must be square and match delta")
    if not np.allclose(Sigma, Sigma.T, rtol=0, atol=1e-12):
        raise SingularSigma("Sigma must be symmetric")
    try:
        factor = linalg.cho_factor(Sigma)
    except linalg.LinAlgError as exc:
        raise SingularSigma("Sigma is not positive definite") from exc
    return float(0.5 * delta @ linalg.cho_solve(factor, delta))


def kl_product_shift(delta, models: Sequence[NoiseModel]) -> float:
    """KL for independent coordinates: the sum of per-coordinate shift KLs."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if len(models) != delta.size:
        raise ValueError("one noise model per coordinate is required")
    return float(sum(kl_numeric(m, d) for m, d in zip(models, delta)))


@dataclass
class KlExpansionReport:
    shifts: list
    kl_numeric: list
    kl_leading: list
    remainder: list
    slope_estimate: float
    fisher: float
    exact: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["units"] = "nats"
        return out


def kl_expansion_check(p: NoiseModel, shifts: Sequence[float]) -> KlExpansionReport:
    """Compare ``KL(p || p(. - t))`` with ``I t^2 / 2`` over decreasing shifts.

    ``slope_estimate`` is the log-log regression slope of the absolute
    remainder against ``t``.  When every remainder is below ``1e-12`` the
    expansion is treated as exact and the slope is reported as ``inf``.
    """
    t = np.asarray(shifts, dtype=float)
    if t.ndim != 1 or t.size < 3:
        raise ValueError("need at least three shifts")
    if np.any(t <= 0) or np.any(np.diff(t) >= 0):
        raise ValueError("shifts must be positive and strictly decreasing")
    fisher = fisher_information(p)
    kl = np.array([kl_numeric(p, s) for s in t])
    lead = 0.5 * fisher * t**2
    rem = kl - lead
    mag = np.abs(rem)
    if np.all(mag < 1e-12):
        slope, exact = math.inf, True
    else:
        keep = mag > 0
        slope = float(np.polyfit(np.log(t[keep]), np.log(mag[keep]), 1)[0])
        exact = False
    return KlExpansionReport(t.tolist(), kl.tolist(), lead.tolist(), rem.tolist(), slope, fisher, exact)


@dataclass
class MIEstimate:
    value: float
    stderr: float
    samples: int
    seed: int | None
    units: str = "nats"

    def to_dict(self) -> dict:
        return asdict(self)


def _log_density_table(y: np.ndarray, means: np.ndarray, noise) -> np.ndarray:
    """``log p(y_s | m)`` up to a constant shared by all ``m``; shape (samples, K)."""
    diff = y[:, None, :] - means[None, :, :]
    if isinstance(noise, np.ndarray):
        chol = noise
        z = linalg.solve_triangular(chol, diff.reshape(-1, diff.shape[-1]).T, lower=True)
        return -0.5 * np.sum(z * z, axis=0).reshape(diff.shape[:2])
    out = np.zeros(diff.shape[:2])
    for j, model in enumerate(noise):
        out += model.logpdf(diff[:, :, j])
    return out


def _mi_chunk(means, noise, counts, seed_seq):
    rng = np.random.default_rng(seed_seq)
    K, d = means.shape
    labels = np.repeat(np.arange(K), counts)
    if isinstance(noise, np.ndarray):
        w = rng.standard_normal((labels.size, d)) @ noise.T
    else:
        w = np.column_stack([m.sample(rng, labels.size) for m in noise])
    y = means[labels] + w
    table = _log_density_table(y, means, noise)
    own = table[np.arange(labels.size), labels]
    return own - (logsumexp(table, axis=1) - math.log(K))


def mi_mixture_estimate(
    points,
    noise,
    samples: int = 100_000,
    rng: np.random.Generator | int | None = None,
    workers: int = 1,
) -> MIEstimate:
    """Monte Carlo estimate of ``I(M; mu_M + W)`` for ``M`` uniform over ``points``.

    ``noise`` is a covariance matrix (Gaussian ``W``), a single noise model
    applied independently to each coordinate, or a sequence of per-coordinate
    models.  Each sample contributes ``log p(y|m) - log mean_m' p(y|m')``,
    whose mean is ``H(Y) - H(W)``.  Samples are stratified evenly over the
    mixture components and drawn in fixed chunks of 10^4 with independent
    substreams, so the estimate does not depend on ``workers``.
    """
    means = np.atleast_2d(np.asarray(points, dtype=float))
    K, d = means.shape
    if K < 1:
        raise ValueError("need at least one point")
    if samples < 10_000:
        raise ValueError("samples must be >= 10^4")
    if hasattr(noise, "logpdf"):
        noise_spec = [noise] * d
    elif isinstance(noise, (list, tuple)) and noise and hasattr(noise[0], "logpdf"):
        if len(noise) != d:
            raise ValueError("one noise model per coordinate is required")
        noise_spec = list(noise)
    else:
        Sigma = np.atleast_2d(np.asarray(noise, dtype=float))
        if Sigma.shape != (d, d):
            raise ValueError("covariance must be d x d")
        try:
            noise_spec = linalg.cholesky(0.5 * (Sigma + Sigma.T), lower=True)
        except linalg.LinAlgError as exc:
            raise SingularSigma("noise covariance is not positive definite") from exc

    if isinstance(rng, np.random.Generator):
        seed = int(rng.integers(0, 2**63 - 1))
    else:
        seed = 0 if rng is None else int(rng)
    per = -(-samples // K)
    total = per * K
    n_chunks = -(-total // CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    label_counts = []
    remaining = np.full(K, per)
    for c in range(n_chunks):
        size = min(CHUNK, total - c * CHUNK)
        counts = np.zeros(K, dtype=int)
        # deal this chunk's samples out over components, in order
        for k in range(K):
            take = min(remaining[k], size - counts.sum())
            counts[k] = take
            remaining[k] -= take
        label_counts.append(counts)

    jobs = [(means, noise_spec, counts, child) for counts, child in zip(label_counts, children)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_mi_chunk_star, jobs))
    else:
        parts = [_mi_chunk(*job) for job in jobs]
    f = np.concatenate(parts)
    value = float(f.mean())
    stderr = float(f.std(ddof=1) / math.sqrt(f.size)) if f.size > 1 else 0.0
    return MIEstimate(value, stderr, int(f.size), seed)


def _mi_chunk_star(job):
    return _mi_chunk(*job)
