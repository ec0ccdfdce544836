import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisynash.exceptions import BadASpec, BallDoesNotFit, NotNegativeDefinite, PointOutsideSet
from noisynash.games import (
    QuadraticGame,
    best_response,
    build_quadratic_game,
    gamma_of,
    jacobian_pseudo_gradient,
    pseudo_gradient,
    random_negative_definite,
    theorem1_ensemble,
    theorem2_ensemble,
    utility,
    verify_ne,
)
from noisynash.geometry import Ball, Box

SQUARE = Box([0.0, 0.0], [1.0, 1.0])


@pytest.fixture
def game():
    return build_quadratic_game(-np.eye(2), [0.3, 0.4], SQUARE)


def test_utility_values(game):
    # u_0([1, 0]) = -1/2 + 1 * (0.3) ... with a_00 = -1: -0.5 + 0.3 = -0.2
    assert utility(game, 0, [1.0, 0.0]) == pytest.approx(-0.2)
    assert utility(game, 1, [0.0, 1.0]) == pytest.approx(-0.1)
    with pytest.raises(IndexError):
        utility(game, 2, [0.0, 0.0])


def test_pseudo_gradient(game):
    np.testing.assert_allclose(pseudo_gradient(game, [0.0, 0.0]), [0.3, 0.4])
    np.testing.assert_allclose(pseudo_gradient(game, game.x_star), [0.0, 0.0])
    np.testing.assert_array_equal(jacobian_pseudo_gradient(game), -np.eye(2))


def test_pseudo_gradient_matches_finite_difference():
    rng = np.random.default_rng(3)
    A = random_negative_definite(3, rng)
    g = build_quadratic_game(A, [0.2, 0.5, 0.7], Box([0, 0, 0], [1, 1, 1]))
    x = rng.uniform(size=3)
    h = 1e-6
    fd = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd.append((utility(g, i, x + e) - utility(g, i, x - e)) / (2 * h))
    np.testing.assert_allclose(pseudo_gradient(g, x), fd, atol=1e-8)


def test_verify_ne(game):
    assert verify_ne(game, game.x_star)
    assert not verify_ne(game, [0.0, 0.0])
    with pytest.raises(ValueError):
        verify_ne(game, game.x_star, tol=0)


def test_boundary_equilibrium():
    g = build_quadratic_game(np.array([[-2.0, 0.5], [0.5, -1.0]]), [1.0, 0.0], SQUARE)
    assert verify_ne(g, [1.0, 0.0])
    assert best_response(g, 0, [0.0, 0.0]) <= 1.0


def test_construction_errors():
    with pytest.raises(NotNegativeDefinite):
        build_quadratic_game(np.eye(2), [0.5, 0.5], SQUARE)
    with pytest.raises(NotNegativeDefinite):
        build_quadratic_game(np.array([[-1.0, 0.1], [0.0, -1.0]]), [0.5, 0.5], SQUARE)
    with pytest.raises(PointOutsideSet):
        build_quadratic_game(-np.eye(2), [1.5, 0.5], SQUARE)


def test_dict_round_trip(game):
    again = QuadraticGame.from_dict(game.to_dict())
    np.testing.assert_array_equal(again.A, game.A)
    np.testing.assert_array_equal(again.x_star, game.x_star)


def test_theorem2_ensemble_geometry():
    ens = theorem2_ensemble(SQUARE, 0.1, 1.0)
    assert len(ens) == 4
    np.testing.assert_allclose(ens.points, [[0.6, 0.6], [0.4, 0.6], [0.4, 0.4], [0.6, 0.4]])
    assert ens.packing.min_distance() == pytest.approx(0.2)
    d = np.linalg.norm(ens.points - SQUARE.centroid(), axis=1)
    np.testing.assert_allclose(d, math.sqrt(2) * 0.1)
    assert ens.packing.is_valid(SQUARE)
    np.testing.assert_array_equal(ens.A, -np.eye(2))


def test_theorem2_ensemble_errors():
    with pytest.raises(BallDoesNotFit):
        theorem2_ensemble(SQUARE, 0.4, 1.0)
    with pytest.raises(BallDoesNotFit):
        theorem2_ensemble(Box([0.0], [1.0]), 0.1, 1.0)
    with pytest.raises(BadASpec):
        theorem2_ensemble(SQUARE, 0.1, 1.0, A_spec=-2 * np.eye(2))
    ens = theorem2_ensemble(SQUARE, 0.1, 2.0, A_spec=np.array([[-2.0, 0.0], [0.0, -1.0]]))
    assert ens.gamma == 2.0


def test_theorem2_in_ball():
    S = Ball([0.0, 0.0, 0.0], 1.0)
    ens = theorem2_ensemble(S, 0.2, 1.5)
    assert all(S.contains(p) for p in ens.points)
    assert gamma_of(ens.A) == pytest.approx(1.5)


def test_theorem1_ensemble():
    ens = theorem1_ensemble(SQUARE, 0.1)
    assert len(ens) == ens.packing.count >= 15
    assert all(verify_ne(g, g.x_star) for g in ens.games)


@given(st.sampled_from([2, 3, 5]), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_equilibrium_property(n, seed):
    rng = np.random.default_rng(seed)
    A = random_negative_definite(n, rng)
    S = Box(np.zeros(n), np.ones(n))
    x_star = rng.uniform(0.05, 0.95, size=n)
    g = build_quadratic_game(A, x_star, S)
    assert np.max(np.abs(pseudo_gradient(g, x_star))) < 1e-10
    assert verify_ne(g, x_star)
    # any other interior point is not an equilibrium
    other = np.clip(x_star + 0.05, 0, 1)
    assert not verify_ne(g, other)


@given(st.integers(2, 6), st.floats(0.1, 5.0), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_random_negative_definite_norm(n, gamma, seed):
    A = random_negative_definite(n, np.random.default_rng(seed), gamma)
    assert np.max(np.linalg.eigvalsh(A)) < 0
    assert gamma_of(A) == pytest.approx(gamma)
