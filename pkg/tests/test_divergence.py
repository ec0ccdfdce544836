import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisynash.divergence import (
    kl_expansion_check,
    kl_gaussian_shift,
    kl_numeric,
    kl_product_shift,
    mi_mixture_estimate,
)
from noisynash.exceptions import SingularSigma
from noisynash.noise import Gaussian, Logistic

# KL(logistic || shifted logistic), s = 1, from 40-digit mpmath quadrature
LOGISTIC_KL = {
    0.2: 0.0066622264507979227682,
    0.1: 0.0016663889550099249942,
    0.05: 0.00041664930658889048932,
    0.025: 0.00010416558161336884823,
}


def test_kl_gaussian_examples():
    assert kl_numeric(Gaussian(1.0), 0.0) == 0.0
    assert kl_numeric(Gaussian(1.0), 0.2) == pytest.approx(0.02, abs=1e-12)


def test_kl_logistic_oracle():
    for t, ref in LOGISTIC_KL.items():
        assert kl_numeric(Logistic(1.0), t) == pytest.approx(ref, abs=1e-12)
    # leading term I t^2 / 2 with I = 1/3, remainder within 2 t^3
    assert abs(kl_numeric(Logistic(1.0), 0.1) - 0.01 / 6) <= 2 * 0.1**3


@given(st.floats(0.0, 1.0), st.floats(0.05, 10.0))
@settings(max_examples=40, deadline=None)
def test_kl_gaussian_consistency(t, sigma2):
    assert abs(kl_numeric(Gaussian(sigma2), t) - t * t / (2 * sigma2)) < 1e-8


@given(st.floats(-2.0, 2.0), st.floats(0.2, 3.0))
@settings(max_examples=30, deadline=None)
def test_gibbs(t, s):
    kl = kl_numeric(Logistic(s), t)
    assert kl >= 0
    if abs(t) > 1e-3:
        assert kl > 0


def test_kl_gaussian_shift_examples():
    assert kl_gaussian_shift([0.2, 0.0], np.eye(2)) == pytest.approx(0.02)
    assert kl_gaussian_shift([0.0, 0.0], np.eye(2)) == 0.0
    # oracle: solve([[6,-4],[-4,6]], d) = (0.1, 0.1); half of d . (0.1, 0.1) = 0.02
    sigma = np.array([[6.0, -4.0], [-4.0, 6.0]])
    d = np.array([0.2, 0.2])
    assert kl_gaussian_shift(d, sigma) == pytest.approx(0.5 * d @ np.linalg.solve(sigma, d))
    assert kl_gaussian_shift(d, sigma) == pytest.approx(0.02)


def test_kl_gaussian_shift_singular():
    with pytest.raises(SingularSigma):
        kl_gaussian_shift([1.0, 0.0], np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SingularSigma):
        kl_gaussian_shift([1.0, 0.0], np.array([[1.0, 0.5], [0.0, 1.0]]))


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(0.1, 5)), min_size=1, max_size=5))
@settings(max_examples=30, deadline=None)
def test_diagonal_sigma_matches_product(pairs):
    delta = np.array([p[0] for p in pairs])
    var = np.array([p[1] for p in pairs])
    joint = kl_gaussian_shift(delta, np.diag(var))
    product = kl_product_shift(delta, [Gaussian(v) for v in var])
    assert abs(joint - product) < 1e-8


def test_expansion_gaussian_exact():
    rep = kl_expansion_check(Gaussian(1.0), [0.2, 0.1, 0.05])
    assert rep.exact
    assert max(abs(r) for r in rep.remainder) < 1e-12
    for kl, lead, rem in zip(rep.kl_numeric, rep.kl_leading, rep.remainder):
        assert rem == kl - lead


def test_expansion_logistic_slope():
    rep = kl_expansion_check(Logistic(1.0), [0.2, 0.1, 0.05, 0.025])
    assert rep.slope_estimate >= 2.7
    # symmetric density: the cubic term vanishes and the remainder is quartic
    assert rep.slope_estimate == pytest.approx(3.99957, abs=1e-3)
    assert rep.fisher == pytest.approx(1 / 3, abs=1e-9)


def test_expansion_preconditions():
    with pytest.raises(ValueError):
        kl_expansion_check(Gaussian(1.0), [0.1])
    with pytest.raises(ValueError):
        kl_expansion_check(Gaussian(1.0), [0.05, 0.1, 0.2])


def test_mi_single_and_duplicate_points():
    est = mi_mixture_estimate([[0.3, 0.1]], np.eye(2), 10_000, rng=0)
    assert est.value == 0.0
    dup = mi_mixture_estimate([[1.0], [1.0]], Gaussian(1.0), 20_000, rng=0)
    assert abs(dup.value) < 1e-12
    with pytest.raises(ValueError):
        mi_mixture_estimate([[0.0]], np.eye(1), 100)


def test_mi_separated_binary():
    est = mi_mixture_estimate([[-5.0], [5.0]], Gaussian(1.0), 100_000, rng=1)
    assert est.value == pytest.approx(math.log(2), abs=0.01)
    assert est.units == "nats"
    assert est.to_dict()["samples"] == 100_000


def test_mi_deterministic_and_worker_independent():
    pts = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]]
    a = mi_mixture_estimate(pts, np.eye(2), 20_000, rng=7)
    b = mi_mixture_estimate(pts, np.eye(2), 20_000, rng=7, workers=2)
    assert a.value == b.value and a.stderr == b.stderr


def test_mi_bounded_by_max_pairwise_kl():
    pts = np.array([[0.6, 0.6], [0.4, 0.6], [0.4, 0.4], [0.6, 0.4]])
    sigma = np.array([[2.0, 0.5], [0.5, 1.5]])
    est = mi_mixture_estimate(pts, sigma, 100_000, rng=2)
    kl_max = max(kl_gaussian_shift(p - q, sigma) for p in pts for q in pts)
    assert est.value <= kl_max + 3 * est.stderr
    assert est.value <= math.log(4) + 3 * est.stderr


def test_mi_product_logistic():
    pts = [[-0.2], [0.2]]
    est = mi_mixture_estimate(pts, [Logistic(0.5)], 50_000, rng=3)
    assert 0 <= est.value + 3 * est.stderr
    assert est.value <= kl_numeric(Logistic(0.5), 0.4) + 3 * est.stderr


def test_mi_data_processing():
    pts = [[-0.5], [0.0], [0.5]]
    values = [mi_mixture_estimate(pts, np.eye(1) * v, 50_000, rng=4) for v in (0.5, 1.0, 2.0)]
    for lo, hi in zip(values, values[1:]):
        assert hi.value <= lo.value + 3 * (lo.stderr + hi.stderr)
