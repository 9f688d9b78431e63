import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajadmm.geometry import (
    ConvexHull,
    InfeasibleStateError,
    NoSeparatingPlane,
    SeparatingPlane,
    ccd_max_step,
    gjk_distance,
    plane_from_gjk,
    rodriguez_rotation,
    sphere_exp,
    tangent_project,
)

from oracles import minkowski_distance, random_polygon

SQ = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)


def test_square_gap():
    r = gjk_distance(SQ, SQ + [2, 0])
    assert r.distance == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(r.direction, [-1, 0], atol=1e-14)
    # reversed order: direction points from the left square to the right one
    r2 = gjk_distance(SQ + [2, 0], SQ)
    np.testing.assert_allclose(r2.direction, [1, 0], atol=1e-14)


def test_identical_squares_touch():
    assert gjk_distance(SQ, SQ).distance == 0.0


def test_point_hull():
    r = gjk_distance(np.array([[0.0, 0.0]] * 3), np.array([[3.0, 4.0]]))
    assert r.distance == pytest.approx(5.0)


@pytest.mark.parametrize("dim", [2, 3])
def test_against_minkowski_oracle(dim):
    rng = np.random.default_rng(11 + dim)
    n_touch = 0
    for _ in range(100):
        A = random_polygon(rng, rng.uniform(-1, 1, dim), 0.6, dim=dim)
        B = random_polygon(rng, rng.uniform(-1, 1, dim), 0.6, dim=dim)
        ref = minkowski_distance(A, B)
        r = gjk_distance(A, B)
        assert r.distance == pytest.approx(ref, abs=1e-7)
        assert r.distance == gjk_distance(B, A).distance
        if ref == 0.0:
            n_touch += 1
        else:
            np.testing.assert_allclose(r.witness_a - r.witness_b, r.distance * r.direction, atol=1e-9)
    assert 0 < n_touch < 100


def test_plane_from_gjk_midpoint():
    plane = plane_from_gjk(SQ + [2, 0], SQ)
    np.testing.assert_allclose(plane.normal, [1, 0, 0], atol=1e-14)
    assert plane.offset == pytest.approx(-1.5)
    pts = plane_from_gjk(np.array([[2.0, 0.0]]), np.array([[0.0, 0.0]]))
    assert pts.offset == pytest.approx(-1.0)
    swapped = plane_from_gjk(SQ, SQ + [2, 0])
    np.testing.assert_allclose(swapped.normal, -plane.normal, atol=1e-14)


def test_plane_touching_raises():
    with pytest.raises(NoSeparatingPlane):
        plane_from_gjk(SQ, SQ + [1, 0])


def test_plane_separates_random():
    rng = np.random.default_rng(3)
    for _ in range(200):
        A = random_polygon(rng, rng.uniform(-1, 1, 2), 0.5)
        B = random_polygon(rng, rng.uniform(-1, 1, 2), 0.5)
        if gjk_distance(A, B).distance <= 1e-9:
            continue
        p = plane_from_gjk(A, B)
        assert p.side(A).min() > 0
        assert (-p.side(B)).min() > 0


def test_ccd_examples():
    box = SQ - [0.0, 0.5] + [0.5, 0.0]  # nearest face at x = 0.5
    before = np.array([[-1.0, 0.0]])
    after = np.array([[1.0, 0.0]])
    t = ccd_max_step(before, after, box, 0.1)
    assert t <= 0.7 + 1e-12
    assert t == pytest.approx(0.7, abs=1e-6)
    assert ccd_max_step(before, before - 1, box, 0.1) == 1.0
    assert ccd_max_step(before, before, box, 0.1) == 1.0
    with pytest.raises(InfeasibleStateError):
        ccd_max_step(np.array([[0.45, 0.0]]), after, box, 0.1)


def test_ccd_is_conservative():
    rng = np.random.default_rng(5)
    for _ in range(60):
        A0 = random_polygon(rng, np.array([-1.0, 0.0]), 0.3)
        shift = rng.uniform(-1, 3, 2)
        A1 = A0 + shift + 0.05 * rng.normal(size=A0.shape)
        B = random_polygon(rng, np.array([1.0, 0.0]), 0.3)
        if gjk_distance(A0, B).distance <= 0.05:
            continue
        t = ccd_max_step(A0, A1, B, 0.05)
        d = gjk_distance(A0 + t * (A1 - A0), B).distance
        assert d >= 0.05 - 1e-9
        # the sampled motion never dips below the clearance before t
        for s in np.linspace(0, t, 25):
            assert gjk_distance(A0 + s * (A1 - A0), B).distance >= 0.05 - 1e-9


def test_ccd_two_moving_hulls():
    a0 = np.array([[-1.0, 0.0]])
    b0 = np.array([[1.0, 0.0]])
    t = ccd_max_step(a0, a0 + [1, 0], b0, 0.2, other_after=b0 - [1, 0])
    assert t == pytest.approx(0.9, abs=1e-6)
    assert t <= 0.9 + 1e-12


def test_sphere_exp_examples():
    n = np.array([0.0, 0.0, 1.0])
    np.testing.assert_array_equal(sphere_exp(n, np.zeros(3)), n)
    np.testing.assert_allclose(sphere_exp(n, [math.pi / 2, 0, 0]), [1, 0, 0], atol=1e-15)


def test_sphere_exp_unit_norm_and_rodriguez_agree():
    rng = np.random.default_rng(9)
    for _ in range(50):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        v = tangent_project(n, rng.normal(size=3))
        out = sphere_exp(n, v)
        assert abs(np.linalg.norm(out) - 1) <= 1e-12
        # a great-circle step is a rotation about n x v by |v|
        axis = np.cross(n, v)
        np.testing.assert_allclose(rodriguez_rotation(axis) @ n, out, atol=1e-12)


def test_sphere_exp_circle_case():
    ang = 0.3
    n = np.array([math.cos(ang), math.sin(ang), 0.0])
    v = 0.7 * np.array([-math.sin(ang), math.cos(ang), 0.0])
    np.testing.assert_allclose(sphere_exp(n, v), [math.cos(1.0), math.sin(1.0), 0.0], atol=1e-15)


def test_rodriguez():
    np.testing.assert_array_equal(rodriguez_rotation(np.zeros(3)), np.eye(3))
    np.testing.assert_allclose(rodriguez_rotation([0, 0, math.pi / 2]) @ [1, 0, 0], [0, 1, 0], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_rodriguez_orthogonal(r):
    R = rodriguez_rotation(np.array(r))
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


def test_hull_and_plane_types():
    with pytest.raises(ValueError):
        ConvexHull(np.array([[np.nan, 0.0]]))
    p = SeparatingPlane([3.0, 4.0], 1.0)
    assert np.linalg.norm(p.normal) == pytest.approx(1.0, abs=1e-15)
    assert p.normal.shape == (3,)
