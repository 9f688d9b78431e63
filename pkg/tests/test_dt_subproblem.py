import math

import numpy as np
import pytest

from trajadmm.curves import build_stencil
from trajadmm.dt_subproblem import DtProblem, dt_gradient, solve_dt

from oracles import dt_objective_ld, dt_stationarity_ld, golden_section

ST = build_stencil(5)


def _random_problem(rng, pieces=None):
    pieces = pieces or int(rng.integers(1, 6))
    X = rng.normal(scale=rng.uniform(0.01, 0.5), size=(pieces, 6, 2))
    return DtProblem(
        [(X, ST)],
        v_max=rng.uniform(0.5, 3),
        a_max=rng.uniform(0.5, 3),
        w=10 ** rng.uniform(2, 8),
        gamma=rng.uniform(1, 20),
        epsilon=1e-4,
    )


def test_zero_slack_matches_golden_section():
    p = DtProblem([(np.zeros((1, 6, 2)), ST)], v_max=2, a_max=2, w=1e8, gamma=10, epsilon=1e-4)
    sol = solve_dt(p)
    ref = golden_section(dt_objective_ld(p), p.dt_min * (1 + 1e-12), 2 * p.dt_min + 1)
    assert sol.dt == pytest.approx(float(ref), rel=1e-8)
    assert sol.residual <= 1e-8 * p.w
    assert sol.dt > p.dt_min


def test_random_instances_match_golden_section():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = _random_problem(rng)
        sol = solve_dt(p)
        assert sol.residual <= 1e-8 * p.w
        assert dt_stationarity_ld(p, sol) <= 1e-8 * p.w
        assert sol.curvature > 0
        hi = sol.dt * 4
        ref = golden_section(dt_objective_ld(p), p.dt_min * (1 + 1e-12), hi)
        assert sol.dt == pytest.approx(float(ref), rel=1e-8)
        assert np.all(p.v_max * sol.dt - p.vn > 0)
        assert np.all(p.a_max * sol.dt**2 - p.an > 0)


def test_large_weight_approaches_lower_bound():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(3, 6, 2))
    prev = math.inf
    for w in (1e8, 1e9, 1e10, 1e11, 1e12):
        p = DtProblem([(X, ST)], w=w)
        dt = solve_dt(p).dt
        assert p.dt_min < dt < prev
        prev = dt
    assert prev == pytest.approx(p.dt_min, rel=1e-6)


def test_velocity_bound_homogeneity():
    rng = np.random.default_rng(2)
    X = np.zeros((2, 6, 2))
    X[:, :, 0] = np.linspace(0, 1, 6) * rng.uniform(1, 2)
    p1 = DtProblem([(X, ST)], epsilon=1e-12)
    p2 = DtProblem([(2 * X, ST)], epsilon=1e-12)
    assert (p2.vn.max() / p2.v_max) == pytest.approx(2 * p1.vn.max() / p1.v_max, rel=1e-9)


def test_gradient_zero_at_zero_slack():
    p = DtProblem([(np.zeros((3, 6, 2)), ST)])
    g = dt_gradient(p, solve_dt(p).dt)
    assert np.all(g[0] == 0)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(10):
        p = _random_problem(rng, pieces=3)
        X = p.blocks[0][0]
        g = dt_gradient(p, solve_dt(p).dt)[0]
        fd = np.zeros_like(X)
        for idx in np.ndindex(X.shape):
            h = 1e-6 * max(1.0, abs(X[idx]))
            vals = []
            for s in (2, 1, -1, -2):
                Xp = X.copy()
                Xp[idx] += s * h
                vals.append(solve_dt(DtProblem([(Xp, ST)], p.v_max, p.a_max, p.w, p.gamma, p.epsilon)).dt)
            fd[idx] = (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * h)
        assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(g)


def test_gradient_sign_and_stale_rejection():
    rng = np.random.default_rng(4)
    p = _random_problem(rng, pieces=2)
    X = p.blocks[0][0]
    dt = solve_dt(p).dt
    g = dt_gradient(p, dt)[0]
    # stretching piece 0 along itself never shortens the time step
    assert float((g[0] * X[0]).sum()) >= 0
    X2 = X.copy()
    X2[0] *= 1.05
    assert solve_dt(DtProblem([(X2, ST)], p.v_max, p.a_max, p.w, p.gamma)).dt >= dt
    with pytest.raises(ValueError):
        dt_gradient(p, dt * 1.5)
