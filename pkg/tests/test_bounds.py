import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisynash.bounds import (
    Theorem4Candidate,
    corollary1_bound,
    default_theorem4_candidates,
    theorem1_bound,
    theorem2_bound,
    theorem3_bound,
    theorem4_bound,
)
from noisynash.exceptions import DeltaTooLarge, ZeroCapacity
from noisynash.games import theorem2_ensemble
from noisynash.geometry import Box, PackingResult, lattice_count
from noisynash.noise import ChannelConfig, Gaussian, Logistic, Topology, covariance_sigma_AG

SQUARE = Box([0.0, 0.0], [1.0, 1.0])


def test_theorem1_values():
    rep = theorem1_bound(math.log(100), math.log(2), 0.1)
    assert rep.value == pytest.approx((0.9 * math.log(100) - 1) / math.log(2))
    assert rep.value == pytest.approx(4.537, abs=1e-3)
    assert rep.inputs == {"logM": math.log(100), "C_down": math.log(2), "delta": 0.1}
    assert theorem1_bound(1.0, 1.0, 0.1).vacuous
    assert theorem1_bound(math.log(100), 1.0, 0.999).value == 0.0
    with pytest.raises(ZeroCapacity):
        theorem1_bound(1.0, 0.0, 0.1)


def test_corollary1_values():
    rep = corollary1_bound(SQUARE, 0.05, 0.1, math.log(2))
    expected = (0.9 * (2 * math.log(10) + math.log(0.8)) - 1) / math.log(2)
    assert rep.value == pytest.approx(expected)
    assert rep.value == pytest.approx(4.247, abs=1e-3)
    assert corollary1_bound(SQUARE, 0.25, 0.1, math.log(2)).vacuous


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.02])
def test_corollary_below_lattice_theorem1(eps):
    c1 = corollary1_bound(SQUARE, eps, 0.1, 1.0)
    t1 = theorem1_bound(math.log(lattice_count(SQUARE, eps)), 1.0, 0.1)
    assert c1.value <= t1.value


def test_theorem2_values():
    assert theorem2_bound(1.0, 1.0, 0.1, 0.25).value == pytest.approx(12.5)
    assert theorem2_bound(1.0, 1.0, 0.1, 0.25).ceil == 13
    assert theorem2_bound(2.0, 2.0, 0.05, 0.1).value == pytest.approx(40.0)
    assert theorem2_bound(1.0, 1.0, 0.1, 0.5).value == 0.0
    with pytest.raises(DeltaTooLarge):
        theorem2_bound(1.0, 1.0, 0.1, 0.6)


def test_theorem3_values():
    rep = theorem3_bound(2, 1.0, 0.1, 0.25, 1 / 3)
    assert rep.value == pytest.approx(18.75)
    assert any("remainder" in c for c in rep.caveats)
    assert theorem3_bound(2, 1.0, 0.1, 0.5, 1.0).value == 0.0
    with pytest.raises(DeltaTooLarge):
        theorem3_bound(2, 1.0, 0.1, 0.7, 1.0)
    # both Gaussian forms evaluate; no dominance is claimed between them
    assert theorem2_bound(1.0, 1.0, 0.1, 0.25).value > 0
    assert theorem3_bound(1, 1.0, 0.1, 0.25, 1.0).value > 0


def test_ceil_tolerates_rounding():
    assert theorem3_bound(2, 1.0, 0.1, 0.25, 1.0 - 1e-12).ceil == 7


@given(
    st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.01, 0.5), st.floats(0.01, 0.49), st.floats(1.01, 3)
)
@settings(max_examples=60, deadline=None)
def test_theorem2_monotone(sigma2, gamma, eps, delta, f):
    base = theorem2_bound(sigma2, gamma, eps, delta).value
    assert theorem2_bound(sigma2, gamma, eps * f, delta).value < base
    assert theorem2_bound(sigma2, gamma * f, eps, delta).value < base
    assert theorem2_bound(sigma2 * f, gamma, eps, delta).value > base


@given(st.floats(-5, 10), st.floats(0.01, 5), st.floats(0.01, 0.99))
@settings(max_examples=60, deadline=None)
def test_bounds_nonnegative(logm, cap, delta):
    assert theorem1_bound(logm, cap, delta).value >= 0


@pytest.fixture(scope="module")
def gaussian_setup():
    topo = Topology.for_set(SQUARE)
    cfg = ChannelConfig.uniform(topo, Gaussian(1.0), uplink_var=1.0)
    return topo, cfg


def test_theorem4_mi_below_analytic_chain(gaussian_setup):
    topo, cfg = gaussian_setup
    ens = theorem2_ensemble(SQUARE, 0.1, 1.0)
    rep = theorem4_bound([(ens.A, ens.packing)], topo, cfg, 0.25, 100_000, 0)
    row = rep.details[0]
    sigma = covariance_sigma_AG(ens.A, topo, cfg)
    limit = 4 * 1.0 * 0.01 * np.linalg.norm(np.linalg.inv(sigma), 2)
    assert row["mi"] <= limit + 3 * row["mi_stderr"]
    assert rep.value >= 0


def test_theorem4_single_point(gaussian_setup):
    topo, cfg = gaussian_setup
    pk = PackingResult([[0.5, 0.5]], 0.1)
    rep = theorem4_bound([(-np.eye(2), pk)], topo, cfg, 0.25, 10_000, 0)
    assert rep.value == 0.0 and rep.vacuous


def test_theorem4_saturated_limit():
    topo = Topology.for_set(Box([0.0, 0.0], [100.0, 100.0]))
    cfg = ChannelConfig.uniform(topo, Gaussian(1e-4), uplink_var=0.0)
    pts = np.array([[10.0, 10.0], [50.0, 10.0], [10.0, 50.0], [50.0, 50.0], [90.0, 90.0], [30.0, 80.0], [80.0, 30.0], [90.0, 10.0]])
    pk = PackingResult(pts, 1.0)
    rep = theorem4_bound([(-np.eye(2), pk)], topo, cfg, 0.2, 20_000, 0)
    M = len(pts)
    assert rep.value == pytest.approx(((1 - 0.2) * math.log(M) - 1) / math.log(M), rel=1e-3)


def test_theorem4_candidate_validation(gaussian_setup):
    topo, cfg = gaussian_setup
    ens = theorem2_ensemble(SQUARE, 0.1, 1.0)
    with pytest.raises(ValueError):
        theorem4_bound([(-0.5 * np.eye(2), ens.packing)], topo, cfg, 0.25, 10_000, 0, gamma=1.0)
    bad = PackingResult([[0.5, 0.5], [0.55, 0.5]], 0.1)
    with pytest.raises(ValueError):
        theorem4_bound([(-np.eye(2), bad)], topo, cfg, 0.25, 10_000, 0, S=SQUARE)


def test_theorem4_non_gaussian_needs_noiseless_uplink():
    topo = Topology.for_set(SQUARE)
    ens = theorem2_ensemble(SQUARE, 0.1, 1.0)
    noisy = ChannelConfig.uniform(topo, Logistic(1.0), uplink_var=1.0)
    with pytest.raises(ValueError):
        theorem4_bound([(ens.A, ens.packing)], topo, noisy, 0.25, 10_000, 0)
    clean = ChannelConfig.uniform(topo, Logistic(1.0), uplink_var=0.0)
    assert theorem4_bound([(ens.A, ens.packing)], topo, clean, 0.25, 10_000, 0).value >= 0


def test_default_candidates():
    cands = default_theorem4_candidates(SQUARE, 0.1, 2.0, rng=0)
    assert len(cands) == 8
    for c in cands:
        assert isinstance(c, Theorem4Candidate)
        norm = np.linalg.norm(c.A, 2)
        assert 2.0 - 1e-9 <= norm <= 3.0
        assert np.max(np.linalg.eigvalsh(c.A)) < 0
        assert c.packing.is_valid(SQUARE)
    assert sorted({c.packing.count for c in cands}) == [2, 4, 8]
