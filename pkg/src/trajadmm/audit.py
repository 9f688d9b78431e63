"""Finite-difference gradient audit on random feasible states."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dt_subproblem import dt_problem_for, solve_dt
from .geometry import InfeasibleStateError, SeparatingPlane, plane_from_gjk, sphere_exp
from .lagrangian import (
    LagrangianState,
    eval_lagrangian,
    grad_lagrangian,
    kinematics,
    pair_distances,
)
from .problem import Problem
from .solvers.engine import check_feasible, initial_dt

__all__ = ["BlockCheck", "random_state", "audit_state", "gradient_audit", "central_difference"]

RELATIVE_TOL = 1e-5


@dataclass(frozen=True)
class BlockCheck:
    mode: str
    block: str
    error: float
    scale: float
    ok: bool


def central_difference(f, x: float, h: float) -> float:
    """Fourth-order central difference of a scalar function."""
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def _tangent_basis(n: np.ndarray, dim: int) -> list[np.ndarray]:
    if dim == 2:
        return [np.array([-n[1], n[0], 0.0])]
    a = np.eye(3)[int(np.argmin(np.abs(n)))]
    t1 = np.cross(n, a)
    t1 /= np.linalg.norm(t1)
    return [t1, np.cross(n, t1)]


def random_state(problem: Problem, mode: str, rng: np.random.Generator, scale: float = 0.02, tries: int = 100):
    """Perturbed feasible state whose planes sit inside the barrier support.

    Every pair closer than three activation distances gets a plane, shifted
    and tilted so at least one side has a live barrier term.
    """
    ghat = 0.5 * problem.activation_distance
    for _ in range(tries):
        theta = problem.theta0() + scale * rng.standard_normal(problem.n_theta)
        kin = kinematics(problem, theta)
        dist = pair_distances(problem, kin.X, cutoff=3 * problem.activation_distance)
        if np.any(dist <= problem.clearance):
            continue
        planes = {}
        for pair, d in zip(problem.pairs, dist):
            if d >= 3 * problem.activation_distance:
                continue
            pa = problem.body_points(kin.X, pair.a)
            pb = problem.body_points(kin.X, pair.b)
            base = plane_from_gjk(pa, pb)
            n = sphere_exp(base.normal, 0.05 * rng.standard_normal() * _tangent_basis(base.normal, problem.dimension)[0])
            # shift so the nearer side lands well inside the support
            target = rng.uniform(0.2, 0.9) * min(ghat, 0.5 * d)
            ga = float((pa @ n[: problem.dimension]).min())
            plane = SeparatingPlane(n, target - ga)
            if plane.side(pa).min() > 0 and plane.side(pb).max() < 0:
                planes[pair] = plane
        dt = initial_dt(problem, kin.qs) * (1.0 + rng.uniform(0.0, 0.2)) if mode != "admm-full" else 0.0
        state = LagrangianState(theta, dt, planes, mode, rho=float(rng.uniform(0.5, 5.0)))
        if mode != "am":
            state.xbar = [X + 0.01 * rng.standard_normal(X.shape) for X in kin.X]
            state.lam = [0.1 * rng.standard_normal(X.shape) for X in kin.X]
            if mode == "admm":
                share = problem.objective.time_weight / problem.n_pieces_total
                state.dtbar = [dt * (1 + 0.05 * rng.standard_normal(t.n_pieces)) for t in problem.tracks]
                state.Lam = [share * (1 + 0.1 * rng.standard_normal(t.n_pieces)) for t in problem.tracks]
            else:
                state.dt = solve_dt(dt_problem_for(state.xbar, problem)).dt
        try:
            check_feasible(problem, state, kin)
            eval_lagrangian(state, problem, kin)
        except InfeasibleStateError:
            continue
        return state
    raise RuntimeError("could not sample a feasible state")


def _value(problem, state, kin=None) -> float:
    try:
        return eval_lagrangian(state, problem, kin)
    except InfeasibleStateError:
        return math.nan


def _fd_array(problem, state, get, set_, h_rel, kin=None):
    s = state.copy()
    x0 = np.array(get(s), float)
    out = np.zeros_like(x0)
    for idx in np.ndindex(x0.shape):
        h = h_rel * max(1.0, abs(x0[idx]))

        def f(v, idx=idx):
            x = x0.copy()
            x[idx] = v
            set_(s, x)
            return _value(problem, s, kin)

        out[idx] = central_difference(f, x0[idx], h)
    return out


def _compare(mode, block, g, fd, value, rel) -> BlockCheck:
    g = np.ravel(np.asarray(g, float))
    fd = np.ravel(np.asarray(fd, float))
    err = float(np.linalg.norm(g - fd))
    scale = max(float(np.linalg.norm(g)), float(np.linalg.norm(fd)))
    floor = 1e-8 * max(1.0, abs(value))  # finite-difference rounding floor
    ok = bool(np.all(np.isfinite(fd))) and err <= rel * scale + floor
    return BlockCheck(mode, block, err, scale, ok)


def audit_state(problem: Problem, state: LagrangianState, rel: float = RELATIVE_TOL, h_rel: float = 1e-5):
    """Compare every analytic block gradient of ``state`` with finite differences."""
    mode = state.mode
    value = eval_lagrangian(state, problem)
    kin = kinematics(problem, state.theta)
    checks = []

    def set_theta(s, x):
        s.theta = x

    checks.append(
        _compare(mode, "theta", grad_lagrangian(state, problem, "theta", kin),
                 _fd_array(problem, state, lambda s: s.theta, set_theta, h_rel), value, rel)
    )
    if mode != "admm-full":
        def set_dt(s, x):
            s.dt = float(x)

        checks.append(
            _compare(mode, "dt", grad_lagrangian(state, problem, "dt", kin),
                     _fd_array(problem, state, lambda s: np.array(s.dt), set_dt, h_rel, kin), value, rel)
        )
    if mode != "am":
        gX = grad_lagrangian(state, problem, "xbar", kin)
        for r in range(len(problem.tracks)):
            def set_x(s, x, r=r):
                s.xbar[r] = x

            fd = _fd_array(problem, state, lambda s, r=r: s.xbar[r], set_x, h_rel, kin)
            checks.append(_compare(mode, f"xbar[{r}]", gX[r], fd, value, rel))
    if mode == "admm":
        gD = grad_lagrangian(state, problem, "dtbar", kin)
        for r in range(len(problem.tracks)):
            def set_d(s, x, r=r):
                s.dtbar[r] = x

            fd = _fd_array(problem, state, lambda s, r=r: s.dtbar[r], set_d, h_rel, kin)
            checks.append(_compare(mode, f"dtbar[{r}]", gD[r], fd, value, rel))
    grads = grad_lagrangian(state, problem, "plane", kin)
    for pair, plane in state.planes.items():
        gv, gd = grads[pair]
        basis = _tangent_basis(plane.normal, problem.dimension)
        analytic, fd = [], []
        for e in basis:
            def f(t, e=e):
                s = state.copy()
                s.planes[pair] = SeparatingPlane(sphere_exp(plane.normal, t * e), plane.offset)
                return _value(problem, s, kin)

            analytic.append(float(gv @ e))
            fd.append(central_difference(f, 0.0, h_rel))

        def fo(t):
            s = state.copy()
            s.planes[pair] = SeparatingPlane(plane.normal, t)
            return _value(problem, s, kin)

        analytic.append(gd)
        fd.append(central_difference(fo, plane.offset, h_rel * max(1.0, abs(plane.offset))))
        checks.append(_compare(mode, f"plane{pair.key}", analytic, fd, value, rel))
    return checks


def gradient_audit(problem: Problem, rng: np.random.Generator, count: int = 20, modes=None, rel: float = RELATIVE_TOL):
    """Audit ``count`` random states for each mode; returns all :class:`BlockCheck` rows."""
    if modes is None:
        bezier = all(t.stencil is not None for t in problem.tracks)
        modes = ("am", "admm", "admm-full") if bezier else ("am", "admm")
    rows = []
    for mode in modes:
        for _ in range(count):
            rows += audit_state(problem, random_state(problem, mode, rng), rel)
    return rows
