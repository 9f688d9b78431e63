import math

import numpy as np
import pytest

from trajadmm.curves import (
    CompositeBezier,
    PiecewiseLinearTrajectory,
    bernstein_basis,
    bernstein_gram,
    bezier_eval,
    build_stencil,
    finite_difference_va,
)
from trajadmm.kinematics import RobotModel, fk_jacobian, forward_kinematics, joint_positions, link_hulls

from oracles import central_diff


# -- stencils ---------------------------------------------------------------

def test_constant_curve_has_zero_derivatives():
    st = build_stencil(5)
    X = np.tile([[0.3, -1.2]], (6, 1))
    np.testing.assert_allclose(st.velocity_matrix @ X, 0.0, atol=1e-12)
    np.testing.assert_allclose(st.acceleration_matrix @ X, 0.0, atol=1e-12)


def test_degree_two_example():
    st = build_stencil(2)
    x = np.array([0.0, 1.0, 3.0])
    np.testing.assert_array_equal(st.velocity_matrix @ x, [2.0, 4.0])
    np.testing.assert_array_equal(st.acceleration_matrix @ x, [2.0])


def test_rejects_low_degree():
    with pytest.raises(ValueError):
        build_stencil(1)


def test_velocity_stencil_rows():
    M = 5
    st = build_stencil(M)
    for k in range(M):
        e = np.zeros(M + 1)
        e[k + 1], e[k] = M, -M
        np.testing.assert_array_equal(st.velocity_matrix[k], e)


def test_derivative_bounded_by_control_points():
    rng = np.random.default_rng(0)
    st = build_stencil(5)
    X = rng.normal(size=(6, 2))
    V = st.velocity_matrix @ X
    s = np.linspace(0, 1, 1000)
    speeds = np.linalg.norm(bezier_eval(X, s, 1), axis=1)
    assert speeds.max() <= np.linalg.norm(V, axis=1).max() + 1e-9


def test_stencils_match_bernstein_expansion():
    rng = np.random.default_rng(1)
    st = build_stencil(5)
    X = rng.normal(size=(6, 3))
    s = rng.uniform(size=20)
    h = 1e-5
    direct = lambda t: bernstein_basis(5, t) @ X
    vel = bernstein_basis(4, s) @ (st.velocity_matrix @ X)
    acc = bernstein_basis(3, s) @ (st.acceleration_matrix @ X)
    np.testing.assert_allclose(vel, (direct(s + h) - direct(s - h)) / (2 * h), atol=1e-8)
    np.testing.assert_allclose(acc, (direct(s + h) - 2 * direct(s) + direct(s - h)) / h**2, atol=1e-4)
    np.testing.assert_allclose(bezier_eval(X, s, 2), acc, atol=1e-10)


def test_gram_matrix_integrates():
    rng = np.random.default_rng(2)
    c = rng.normal(size=4)
    s = np.linspace(0, 1, 20001)
    f = (bernstein_basis(3, s) @ c) ** 2
    integral = np.sum((f[1:] + f[:-1]) / 2) * (s[1] - s[0])
    assert c @ bernstein_gram(3) @ c == pytest.approx(integral, rel=1e-7)


def test_conservative_speed_limit():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(6, 2))
    V = build_stencil(5).velocity_matrix @ X
    vmax_dt = np.linalg.norm(V, axis=1).max()
    speeds = np.linalg.norm(bezier_eval(X, np.linspace(0, 1, 1000), 1), axis=1)
    assert speeds.max() <= vmax_dt + 1e-12


# -- composite curves -------------------------------------------------------

def test_single_piece_is_whole_vector():
    c = np.arange(12.0).reshape(6, 2)
    curve = CompositeBezier(c, 5)
    np.testing.assert_array_equal(curve.assemble_pieces(0), c)


def test_low_degree_composite_rejected():
    with pytest.raises(ValueError):
        CompositeBezier(np.zeros((CompositeBezier.count(3, 4), 2)), 4)
    assert CompositeBezier(np.zeros((5, 2)), 4).pieces == 1


def test_two_pieces_share_three_globals():
    curve = CompositeBezier(np.zeros((CompositeBezier.count(2, 5), 2)), 5)
    assert curve.control_points.shape[0] == 2 * 3 + 3
    shared = set(curve.piece_indices(0)) & set(curve.piece_indices(1))
    assert len(shared) == 3
    with pytest.raises(IndexError):
        curve.assemble_pieces(2)


def test_perturbing_shared_point_moves_both_pieces():
    rng = np.random.default_rng(6)
    curve = CompositeBezier(rng.normal(size=(9, 2)), 5)
    X0 = curve.all_pieces()
    c = curve.control_points.copy()
    c[4] += [0.1, 0.0]
    X1 = CompositeBezier(c, 5).all_pieces()
    assert not np.allclose(X0[0], X1[0])
    assert not np.allclose(X0[1], X1[1])


@pytest.mark.parametrize("M", [5, 6, 7])
def test_c2_continuity(M):
    rng = np.random.default_rng(M)
    curve = CompositeBezier(rng.normal(size=(CompositeBezier.count(4, M), 2)), M)
    X = curve.all_pieces()
    for i in range(3):
        for d in range(3):
            left = bezier_eval(X[i], [1.0], d)
            right = bezier_eval(X[i + 1], [0.0], d)
            np.testing.assert_allclose(left, right, atol=1e-10)


def test_fit_reproduces_a_line_and_pins_ends():
    line = lambda s: np.array([-2 + 4 * s, 1.0])
    curve = CompositeBezier.fit(line, 4)
    np.testing.assert_allclose(curve.control_points[0], [-2, 1])
    np.testing.assert_allclose(curve.control_points[-1], [2, 1])
    pts = curve.sample(20)
    np.testing.assert_allclose(pts[:, 1], 1.0, atol=1e-10)
    assert curve.length() == pytest.approx(4.0, rel=1e-9)


# -- finite differences -----------------------------------------------------

def test_uniform_motion():
    w = np.outer(np.arange(6) * 0.5, [0.6, 0.8])
    V, A = finite_difference_va(PiecewiseLinearTrajectory(w))
    np.testing.assert_allclose(V, np.tile([0.3, 0.4], (5, 1)))
    np.testing.assert_allclose(A, 0.0, atol=1e-15)


def test_fd_example_and_reversal():
    w = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    V, A = finite_difference_va(w)
    np.testing.assert_array_equal(V, [[1, 0], [2, 0]])
    np.testing.assert_array_equal(A, [[1, 0]])
    Vr, _ = finite_difference_va(w[::-1])
    np.testing.assert_array_equal(Vr[::-1], -V)
    with pytest.raises(ValueError):
        finite_difference_va(w[:2])


# -- kinematics -------------------------------------------------------------

ARM2 = RobotModel("arm", (1.0, 1.0), 0.05)


def test_fk_tip_positions():
    np.testing.assert_allclose(joint_positions(ARM2, [0, 0])[-1], [2, 0], atol=1e-15)
    np.testing.assert_allclose(joint_positions(ARM2, [math.pi / 2, 0])[-1], [0, 2], atol=1e-15)


def test_point_robot_identity():
    m = RobotModel("point", dimension=3)
    np.testing.assert_array_equal(forward_kinematics(m, [1, 2, 3]), [[1, 2, 3]])
    np.testing.assert_array_equal(fk_jacobian(m, [1, 2, 3]), np.eye(3))
    with pytest.raises(ValueError):
        forward_kinematics(m, [1, 2])


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(8)
    model = RobotModel("arm", (0.4, 0.3, 0.2), 0.03, base=(0.1, -0.2), base_angle=0.3)
    for _ in range(50):
        q = rng.uniform(-math.pi, math.pi, 3)
        J = fk_jacobian(model, q)
        fd = np.column_stack([
            central_diff(lambda x: forward_kinematics(model, x).ravel()[r], q) for r in range(J.shape[0])
        ]).T
        assert np.linalg.norm(J - fd) <= 1e-6 * np.linalg.norm(J)


def test_tip_jacobian_at_zero():
    J = fk_jacobian(RobotModel("arm", (1.0, 1.0), 0.0), [0, 0])
    # tip is corner 1 (end - side) of link 2, which equals the joint with zero width
    np.testing.assert_allclose(J[2 * 5:2 * 5 + 2, 0], [0, 2], atol=1e-15)


def test_single_link_rectangle():
    hull = link_hulls(RobotModel("arm", (1.0,), 0.1), [0.0])
    assert len(hull) == 1
    v = hull[0].vertices
    np.testing.assert_allclose(v.min(0), [0, -0.1], atol=1e-15)
    np.testing.assert_allclose(v.max(0), [1, 0.1], atol=1e-15)


def test_hulls_reachable_and_base_rotation():
    rng = np.random.default_rng(10)
    base = np.array([0.3, 0.2])
    for _ in range(20):
        q = rng.uniform(-3, 3, 2)
        hulls = link_hulls(RobotModel("arm", (0.5, 0.4), 0.05, base=tuple(base)), q)
        assert len(hulls) == 2
        for h in hulls:
            assert np.linalg.norm(h.vertices - base, axis=1).max() <= 0.9 + 0.05 + 1e-12
        phi = rng.uniform(-3, 3)
        rot = RobotModel("arm", (0.5, 0.4), 0.05, base=tuple(base), base_angle=phi)
        R = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
        plain = forward_kinematics(RobotModel("arm", (0.5, 0.4), 0.05, base=tuple(base)), q)
        np.testing.assert_allclose(forward_kinematics(rot, q), (plain - base) @ R.T + base, atol=1e-12)
