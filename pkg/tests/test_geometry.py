import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisynash.exceptions import LatticeBudgetExceeded
from noisynash.geometry import (
    Ball,
    Box,
    PackingResult,
    constraint_set_from_dict,
    greedy_packing,
    isoperimetric_check,
    isoperimetric_ratio,
    kolmogorov_capacity_estimate,
    lattice_count,
    lattice_lower_bound,
    lattice_points,
    surface_area,
    volume,
)

UNIT_SQUARE = Box([0.0, 0.0], [1.0, 1.0])


def test_box_measures():
    assert volume(UNIT_SQUARE) == 1.0
    assert surface_area(UNIT_SQUARE) == 4.0
    assert surface_area(Box([0.0], [3.0])) == 2.0
    cube = Box([0, 0, 0], [1, 2, 3])
    assert volume(cube) == 6.0
    assert surface_area(cube) == 2 * (6 + 3 + 2)


def test_ball_measures():
    b = Ball([0.0, 0.0], 2.0)
    assert volume(b) == pytest.approx(4 * math.pi)
    assert surface_area(b) == pytest.approx(4 * math.pi)
    b3 = Ball([1.0, 1.0, 1.0], 1.0)
    assert volume(b3) == pytest.approx(4 / 3 * math.pi)
    assert surface_area(b3) == pytest.approx(4 * math.pi)


def test_invalid_sets():
    with pytest.raises(ValueError):
        Box([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        Ball([0.0], 0.0)


def test_dict_round_trip():
    for S in (UNIT_SQUARE, Ball([0.5, -1.0, 2.0], 0.3)):
        assert constraint_set_from_dict(S.to_dict()) == S


def test_contains_and_project():
    assert UNIT_SQUARE.contains([1.0, 0.0])
    assert not UNIT_SQUARE.contains([1.1, 0.0])
    np.testing.assert_allclose(UNIT_SQUARE.project([2.0, -1.0]), [1.0, 0.0])
    b = Ball([0.0, 0.0], 1.0)
    np.testing.assert_allclose(b.project([3.0, 4.0]), [0.6, 0.8])


def test_constraint_functions_box():
    cons = UNIT_SQUARE.constraint_functions()
    assert len(cons) == 4
    x = np.array([0.25, 0.75])
    values = [g(x) for g, _ in cons]
    np.testing.assert_allclose(values, [-0.25, -0.75, -0.75, -0.25])
    assert [p for _, p in cons] == [(0,), (0,), (1,), (1,)]


def test_lattice_examples():
    assert lattice_count(UNIT_SQUARE, 0.05) == 121
    assert lattice_count(UNIT_SQUARE, 0.1) == 36
    assert lattice_count(Box([0.0], [1.0]), 0.5) == 2
    assert lattice_count(Ball([0.0, 0.0], 0.05), 0.5) == 1


def test_lattice_lower_bound_values():
    # (1/2eps)^N (Vol - eps P)
    assert lattice_lower_bound(UNIT_SQUARE, 0.05) == pytest.approx(80.0)
    assert lattice_lower_bound(UNIT_SQUARE, 0.1) == pytest.approx(15.0)
    assert lattice_lower_bound(UNIT_SQUARE, 0.25) == pytest.approx(0.0)


def test_lattice_budget():
    with pytest.raises(LatticeBudgetExceeded):
        lattice_count(Box([0.0] * 8, [1.0] * 8), 0.01)


def test_greedy_examples():
    pk = greedy_packing(UNIT_SQUARE, 0.05, seed=0)
    assert pk.is_valid(UNIT_SQUARE)
    assert pk.count >= 80
    assert greedy_packing(Ball([0.0, 0.0], 1.0), 1.0).count == 1
    assert greedy_packing(Box([0.0], [1.0]), 0.25).count == 2


def test_greedy_deterministic():
    a = greedy_packing(UNIT_SQUARE, 0.1, seed=5)
    b = greedy_packing(UNIT_SQUARE, 0.1, seed=5)
    np.testing.assert_array_equal(a.points, b.points)


def test_packing_strictness():
    touching = PackingResult([[0.0, 0.0], [0.2, 0.0]], 0.1, "greedy")
    assert not touching.is_valid(UNIT_SQUARE)
    assert PackingResult([[0.0, 0.0], [0.2, 0.0]], 0.1, "lattice").is_valid(UNIT_SQUARE)
    assert PackingResult([[0.5, 0.5]], 0.1).min_distance() == math.inf


def test_capacity_estimate_is_certified():
    # the dilated lattice has spacing strictly above 2 eps
    assert math.exp(kolmogorov_capacity_estimate(UNIT_SQUARE, 0.1)) == pytest.approx(25)
    assert kolmogorov_capacity_estimate(Ball([0.0, 0.0], 0.01), 1.0) == 0.0


def test_isoperimetric():
    assert isoperimetric_ratio(Ball([0.0, 0.0, 0.0], 2.0)) == pytest.approx(1.0)
    assert isoperimetric_ratio(UNIT_SQUARE) == pytest.approx(math.pi / 4)
    assert isoperimetric_check(Box([0.0], [1.0]))
    with pytest.raises(ValueError):
        isoperimetric_ratio(Box([0.0], [1.0]))


boxes = st.integers(1, 3).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(-2, 2), min_size=n, max_size=n),
        st.lists(st.floats(0.1, 2), min_size=n, max_size=n),
    )
)


@given(boxes, st.floats(0.05, 0.5))
@settings(max_examples=40, deadline=None)
def test_lattice_points_inside_and_separated(spec, eps):
    lo, ext = spec
    S = Box(lo, np.add(lo, ext))
    pts = lattice_points(S, eps)
    assert all(S.contains(p) for p in pts)
    pk = PackingResult(pts, eps, "lattice")
    assert pk.is_valid(S)


@given(boxes)
@settings(max_examples=30, deadline=None)
def test_isoperimetric_property(spec):
    lo, ext = spec
    S = Box(lo, np.add(lo, ext))
    assert isoperimetric_check(S)


@given(st.floats(0.02, 0.2), st.floats(1.05, 2.0))
@settings(max_examples=15, deadline=None)
def test_greedy_monotone_in_epsilon(eps, factor):
    small = greedy_packing(UNIT_SQUARE, eps, seed=1, restarts=2)
    large = greedy_packing(UNIT_SQUARE, eps * factor, seed=1, restarts=2)
    assert small.is_valid(UNIT_SQUARE) and large.is_valid(UNIT_SQUARE)
    assert large.count <= small.count


@given(st.floats(0.3, 2.0), st.integers(2, 4))
@settings(max_examples=15, deadline=None)
def test_ball_packing_valid(radius, n):
    S = Ball(np.zeros(n), radius)
    pk = greedy_packing(S, 0.25, seed=0, restarts=2)
    assert pk.is_valid(S)
