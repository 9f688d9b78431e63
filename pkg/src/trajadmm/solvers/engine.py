"""Shared outer loop for alternating minimization and both ADMM variants.

One iteration is a fixed sweep: a CCD-capped Armijo step on ``(theta, dt)``
(``theta`` only for ``admm-full``), the linearized slack and multiplier
updates, the plane updates (obstacle pairs first, then robot pairs) and an
active-set refresh.  Every sweep is audited against the monotonicity and
feasibility invariants; ``diagnostic=True`` turns a violation into an error.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..dt_subproblem import DtProblem, dt_problem_for, reduced_lagrangian_terms, solve_dt
from ..geometry import InfeasibleStateError, NoSeparatingPlane, ccd_max_step, gjk_distance, plane_from_gjk
from ..lagrangian import (
    Kinematics,
    LagrangianState,
    eval_lagrangian,
    kinematics,
    objective_gradient,
    pair_distances,
    pair_gradient,
    pair_value,
    refresh_planes,
    theta_gradient,
    theta_terms,
)
from ..problem import Problem
from .diagnostics import ConvergenceRecord, kkt_residuals
from .linesearch import LineSearchParams, LineSearchStall, armijo_step, riemannian_plane_step

__all__ = ["SolverOptions", "Solution", "AuditViolation", "initial_state", "run_solver", "plane_update"]

INACTIVE_MARGIN = 1e-4


class AuditViolation(RuntimeError):
    pass


@dataclass
class SolverOptions:
    max_iters: int = 1000
    tol: float = 1e-2
    line_search: LineSearchParams = field(default_factory=LineSearchParams)
    threads: int = 1
    fast_planes: bool = True
    diagnostic: bool = False
    stall_limit: int = 3
    audit_slack: float = 1e-9
    callback: Callable | None = None

    def __post_init__(self):
        if self.max_iters < 0 or not self.tol > 0 or self.threads < 1:
            raise ValueError("need max_iters >= 0, tol > 0 and threads >= 1")


@dataclass
class Solution:
    problem: Problem
    state: LagrangianState
    status: str  # converged | max_iters | stalled
    iterations: int
    admm: object = None

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def configurations(self) -> list[np.ndarray]:
        return self.problem.unpack(self.state.theta)

    def lengths(self) -> list[float]:
        from ..curves import CompositeBezier, polyline_length

        out = []
        for t, q in zip(self.problem.tracks, self.configurations()):
            if t.stencil is not None:
                out.append(CompositeBezier(q, t.degree).length())
            elif t.model.kind == "point":
                out.append(polyline_length(q))
            else:
                out.append(polyline_length(q))  # joint-space path length
        return out


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def _limit_norms(problem: Problem, qs):
    vn, an = [], []
    for t, q in zip(problem.tracks, qs):
        V, A = t.limit_vectors(q)
        vn.append(np.sqrt((V * V).sum(1)))
        an.append(np.sqrt((A * A).sum(1)))
    return np.concatenate(vn), np.concatenate(an)


def initial_dt(problem: Problem, qs) -> float:
    """Minimizer of the time terms at fixed ``theta`` (twice the bound if unweighted)."""
    vn, an = _limit_norms(problem, qs)
    p = DtProblem.from_norms(vn, an, problem.v_max, problem.a_max, problem.objective.time_weight, problem.gamma)
    lo = p.dt_min
    if problem.gamma > 0 and problem.objective.time_weight > 0:
        return solve_dt(p).dt
    return 2.0 * lo if lo > 0 else 1.0


def initial_state(problem: Problem, mode: str, theta=None, dt=None, rho: float = 0.0) -> LagrangianState:
    """Feasible starting state with GJK midpoint planes.

    Slack copies start in consensus; ``lambda`` starts at ``grad O(Xbar)``
    and ``Lambda`` at ``w / P`` so the slack block is initially stationary.
    """
    theta = problem.theta0() if theta is None else np.array(theta, float)
    kin = kinematics(problem, theta)
    if dt is None and mode != "admm-full":
        dt = initial_dt(problem, kin.qs)
    state = LagrangianState(theta, float(dt) if dt is not None else 0.0, mode=mode, rho=rho)
    if mode != "am":
        state.xbar = [X.copy() for X in kin.X]
        if mode == "admm-full":
            _, grads, sol = reduced_lagrangian_terms(state.xbar, problem)
            if sol is None:
                raise ValueError("admm-full needs a positive time weight")
            state.dt = sol.dt
            state.lam = grads
        else:
            share = problem.objective.time_weight / problem.n_pieces_total
            state.lam = objective_gradient(problem, state.xbar)
            state.dtbar = [np.full(t.n_pieces, state.dt) for t in problem.tracks]
            state.Lam = [np.full(t.n_pieces, share) for t in problem.tracks]
    check_feasible(problem, state, kin)
    state.planes, _, _ = refresh_planes(problem, {}, kin.X)
    return state


def check_feasible(problem: Problem, state: LagrangianState, kin: Kinematics | None = None):
    """Raise :class:`InfeasibleStateError` naming the first violated constraint."""
    kin = kinematics(problem, state.theta) if kin is None else kin
    dist = pair_distances(problem, kin.X, cutoff=problem.activation_distance)
    for k, (pair, d) in enumerate(zip(problem.pairs, dist)):
        if not d > problem.clearance:
            raise InfeasibleStateError(
                f"pair {k} {pair.key}: distance {d:.6g} not above clearance {problem.clearance:.6g}"
            )
    if state.mode != "admm-full" and problem.gamma > 0:
        for t, q in zip(problem.tracks, kin.qs):
            V, A = t.limit_vectors(q)
            gv = problem.v_max * state.dt - np.sqrt((V * V).sum(1))
            ga = problem.a_max * state.dt**2 - np.sqrt((A * A).sum(1))
            for name, g in (("velocity", gv), ("acceleration", ga)):
                if g.size and g.min() <= 0:
                    j = int(np.argmin(g))
                    raise InfeasibleStateError(f"robot {t.name!r}: {name} limit violated at term {j}")
    if not math.isfinite(theta_terms(problem, state, kin=kin)):
        raise InfeasibleStateError("a plane barrier argument is nonpositive")


# ---------------------------------------------------------------------------
# blocks
# ---------------------------------------------------------------------------

def _piece_motion(X0, X1):
    return [np.sqrt(((b - a) ** 2).sum(-1)).max(-1) for a, b in zip(X0, X1)]


def _pair_clearance(problem, pair, planes):
    if pair in planes:
        return problem.clearance
    return problem.activation_distance * (1.0 - INACTIVE_MARGIN)


def _motion_of(ref, motion):
    r, i, _ = ref
    return 0.0 if r < 0 else float(motion[r][i])


def ccd_cap(problem: Problem, X0, X1, distances, planes) -> float:
    """Largest fraction of the linear point motion ``X0 -> X1`` keeping every
    active pair above clearance and every inactive pair above (almost) the
    activation distance.  Pairs that cannot close the gap are skipped.
    """
    motion = _piece_motion(X0, X1)
    t = 1.0
    for k, pair in enumerate(problem.pairs):
        c = _pair_clearance(problem, pair, planes)
        reach = _motion_of(pair.a, motion) + _motion_of(pair.b, motion)
        if distances[k] - reach > c:
            continue
        pa0 = problem.body_points(X0, pair.a)
        pa1 = problem.body_points(X1, pair.a)
        pb0 = problem.body_points(X0, pair.b)
        pb1 = None if pair.is_obstacle else problem.body_points(X1, pair.b)
        # a loose advancement tolerance only makes the cap more conservative
        tol = max(1e-6, 0.25 * (distances[k] - c))
        try:
            t = min(t, ccd_max_step(pa0, pa1, pb0, c, other_after=pb1, tol=tol, max_iter=100))
        except InfeasibleStateError:
            return 0.0
        if t == 0.0:
            break
    return t


def clear_after(problem: Problem, X0, X1, distances, planes) -> bool:
    """Discrete clearance test of a trial configuration."""
    motion = _piece_motion(X0, X1)
    for k, pair in enumerate(problem.pairs):
        c = _pair_clearance(problem, pair, planes)
        if distances[k] - _motion_of(pair.a, motion) - _motion_of(pair.b, motion) > c:
            continue
        d = gjk_distance(problem.body_points(X1, pair.a), problem.body_points(X1, pair.b)).distance
        if not d >= c:
            return False
    return True


def plane_update(problem: Problem, pair, plane, X, params: LineSearchParams, fast: bool = True):
    """GJK candidate if it strictly lowers the pair's terms, else one Riemannian step.

    Returns ``(plane, alpha, used_gjk, stalled, before, after)``.
    """
    before = pair_value(problem, pair, plane, X)
    if fast:
        try:
            cand = plane_from_gjk(problem.body_points(X, pair.a), problem.body_points(X, pair.b))
        except NoSeparatingPlane:
            cand = None
        if cand is not None:
            after = pair_value(problem, pair, cand, X)
            if after < before:
                return cand, 1.0, True, False, before, after
    grad = pair_gradient(problem, pair, plane, X)
    try:
        res = riemannian_plane_step(plane, lambda p: pair_value(problem, pair, p, X), grad, params, fx=before)
    except LineSearchStall:
        return plane, 0.0, False, True, before, before
    return res.point, res.alpha, False, False, before, res.value


def _slack_track(r, problem, state, X, gO, beta):
    rho = state.rho
    Xb = state.xbar[r] - (gO[r] + rho * (state.xbar[r] - X[r]) - state.lam[r]) / beta
    lam = state.lam[r] + rho * (X[r] - Xb)
    if state.mode != "admm":
        return Xb, lam, None, None
    share = problem.objective.time_weight / problem.n_pieces_total
    db = state.dtbar[r] - (share + rho * (state.dtbar[r] - state.dt) - state.Lam[r]) / beta
    L = state.Lam[r] + rho * (state.dt - db)
    return Xb, lam, db, L


# ---------------------------------------------------------------------------
# outer loop
# ---------------------------------------------------------------------------

def _margins(problem: Problem, state: LagrangianState, kin: Kinematics, distances):
    """Smallest plane barrier argument, limit barrier argument and pair distance."""
    mp = math.inf
    dim = problem.dimension
    for pair, plane in state.planes.items():
        n = plane.normal[:dim]
        ga = problem.body_points(kin.X, pair.a) @ n + plane.offset
        gb = -(problem.body_points(kin.X, pair.b) @ n) - plane.offset
        mp = min(mp, float(ga.min()), float(gb.min()))
    if state.mode == "admm-full":
        p = dt_problem_for(state.xbar, problem)
        ml = min(float((p.v_max * state.dt - p.vn).min()), float((p.a_max * state.dt**2 - p.an).min()))
    elif problem.gamma > 0:
        vn, an = _limit_norms(problem, kin.qs)
        ml = min(float((problem.v_max * state.dt - vn).min()), float((problem.a_max * state.dt**2 - an).min()))
    else:
        ml = math.inf
    md = float(distances.min()) if len(distances) else math.inf
    return mp, ml, md


def run_solver(
    problem: Problem,
    mode: str,
    options: SolverOptions | None = None,
    init: LagrangianState | None = None,
    admm=None,
) -> tuple[Solution, ConvergenceRecord]:
    options = SolverOptions() if options is None else options
    ls = options.line_search
    if init is None:
        state = initial_state(problem, mode, rho=0.0 if admm is None else admm.rho)
    else:
        state = init.copy()
        if state.mode != mode:
            raise ValueError(f"initial state is for mode {state.mode!r}, not {mode!r}")
        check_feasible(problem, state)
    if mode != "am":
        if admm is None:
            raise ValueError("ADMM runs need AdmmParams")
        state.rho = admm.rho
    beta = admm.beta if admm is not None else 0.0
    kappa = admm.kappa if admm is not None else 0.0
    n = problem.n_theta
    with_dt = mode != "admm-full"

    kin = kinematics(problem, state.theta)
    state.planes, distances, _ = refresh_planes(problem, state.planes, kin.X)
    record = ConvergenceRecord()
    pool = ThreadPoolExecutor(max_workers=options.threads) if options.threads > 1 else None
    pmap = pool.map if pool is not None else map
    t_start = time.perf_counter()

    def emit(k, lag, lyap, gth, gdt, alpha, alpha_p, backtracks, step_sq, gjk_acc):
        primal, dual, stat = kkt_residuals(problem, state, kin, (gth, gdt))
        mp, ml, md = _margins(problem, state, kin, distances)
        record.append(
            iteration=k,
            lagrangian=lag,
            lyapunov=lyap,
            grad_inf=max(float(np.abs(gth).max()) if gth.size else 0.0, abs(gdt)),
            plane_grad_inf=stat,
            primal=primal,
            dual=dual,
            alpha_theta=alpha,
            alpha_plane_min=alpha_p,
            backtracks=backtracks,
            step_sq=step_sq,
            active_pairs=len(state.planes),
            gjk_accepts=gjk_acc,
            dt=state.dt,
            min_plane_arg=mp,
            min_limit_arg=ml,
            min_distance=md,
        )
        record.wall_time.append(time.perf_counter() - t_start)
        return record.rows["grad_inf"][-1], primal

    def done(ginf, primal):
        return ginf < options.tol and (mode == "am" or primal < options.tol)

    def violation(msg):
        record.violations.append(msg)
        if options.diagnostic:
            raise AuditViolation(msg)

    lag = eval_lagrangian(state, problem, kin)
    gth, gdt = theta_gradient(problem, state, kin)
    if not with_dt:
        gdt = 0.0
    ginf, primal = emit(0, lag, lag, gth, gdt, math.nan, math.nan, 0, 0.0, 0)
    status = "converged" if done(ginf, primal) else "max_iters"
    lyap = lag
    stalls = 0
    k = 0
    try:
        while status != "converged" and k < options.max_iters:
            k += 1
            lag_prev, lyap_prev = lag, lyap
            # -- theta (and dt) block ------------------------------------------
            t0 = time.perf_counter()
            x0 = np.concatenate([state.theta, [state.dt]]) if with_dt else state.theta.copy()
            g = np.concatenate([gth, [gdt]]) if with_dt else gth
            f0 = theta_terms(problem, state, kin=kin)
            full = kinematics(problem, state.theta - gth)
            cap = ccd_cap(problem, kin.X, full.X, distances, state.planes)
            cache = {}

            def f(x):
                kt = kinematics(problem, x[:n])
                if not clear_after(problem, kin.X, kt.X, distances, state.planes):
                    return math.inf
                val = theta_terms(problem, state, dt=x[n] if with_dt else state.dt, kin=kt)
                cache[x.tobytes()] = kt
                return val

            theta_stalled = False
            if cap <= 0.0:
                theta_stalled = True
                alpha, backtracks, step_sq = 0.0, 0, 0.0
            else:
                try:
                    res = armijo_step(f, g, x0, ls, fx=f0, alpha0=cap)
                    alpha, backtracks = res.alpha, res.backtracks
                    step_sq = float(((res.point - x0) ** 2).sum())
                    if res.point is not x0:
                        state.theta = res.point[:n].copy()
                        if with_dt:
                            state.dt = float(res.point[n])
                        kin = cache[res.point.tobytes()]
                except LineSearchStall:
                    theta_stalled = True
                    alpha, backtracks, step_sq = 0.0, ls.max_backtracks, 0.0
            record.stage_time["theta"].append(time.perf_counter() - t0)

            # -- slack and multipliers ---------------------------------------------
            t0 = time.perf_counter()
            move = 0.0
            if mode != "am":
                if mode == "admm-full":
                    gO = reduced_lagrangian_terms(state.xbar, problem)[1]
                else:
                    gO = objective_gradient(problem, state.xbar)
                out = list(pmap(lambda r: _slack_track(r, problem, state, kin.X, gO, beta), range(len(problem.tracks))))
                for r, (Xb, lam, db, L) in enumerate(out):
                    move += float(((Xb - state.xbar[r]) ** 2).sum())
                    state.xbar[r], state.lam[r] = Xb, lam
                    if db is not None:
                        move += float(((db - state.dtbar[r]) ** 2).sum())
                        state.dtbar[r], state.Lam[r] = db, L
                if mode == "admm-full":
                    state.dt = solve_dt(dt_problem_for(state.xbar, problem)).dt
            record.stage_time["slack"].append(time.perf_counter() - t0)

            # -- planes: obstacle pairs come first in canonical order ------------
            t0 = time.perf_counter()
            items = list(state.planes.items())
            results = list(pmap(lambda it: plane_update(problem, it[0], it[1], kin.X, ls, options.fast_planes), items))
            alpha_p = math.nan
            gjk_acc = 0
            for (pair, _), (plane, a, used, st, before, after) in zip(items, results):
                if after > before:
                    violation(f"iteration {k}: plane update raised the Lagrangian for pair {pair.key}")
                if abs(float(np.linalg.norm(plane.normal)) - 1.0) > 1e-12:
                    violation(f"iteration {k}: plane normal drifted off the unit sphere")
                state.planes[pair] = plane
                gjk_acc += used
                alpha_p = a if math.isnan(alpha_p) else min(alpha_p, a)
            record.stage_time["planes"].append(time.perf_counter() - t0)

            # -- active set --------------------------------------------------------
            t0 = time.perf_counter()
            state.planes, distances, _ = refresh_planes(problem, state.planes, kin.X)
            record.stage_time["refresh"].append(time.perf_counter() - t0)

            lag = eval_lagrangian(state, problem, kin)
            lyap = lag + kappa * move
            slack = options.audit_slack * max(1.0, abs(lag_prev))
            if mode == "am":
                if lag + ls.sufficient_decrease * step_sq > lag_prev + slack:
                    violation(f"iteration {k}: sufficient decrease failed ({lag:.17g} vs {lag_prev:.17g})")
            elif lyap > lyap_prev + slack:
                violation(f"iteration {k}: Lyapunov value increased ({lyap:.17g} vs {lyap_prev:.17g})")

            gth, gdt = theta_gradient(problem, state, kin)
            if not with_dt:
                gdt = 0.0
            ginf, primal = emit(k, lag, lyap, gth, gdt, alpha, alpha_p, backtracks, step_sq, gjk_acc)
            mp, ml, md = (record.rows[c][-1] for c in ("min_plane_arg", "min_limit_arg", "min_distance"))
            if not (mp > 0 and ml > 0) or md < problem.clearance - 1e-9:
                violation(f"iteration {k}: feasibility margin lost")
            if options.callback is not None:
                options.callback(k, state, kin)

            stalls = stalls + 1 if theta_stalled else 0
            record.stalls += theta_stalled
            if done(ginf, primal):
                status = "converged"
            elif stalls >= options.stall_limit:
                status = "stalled"
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return Solution(problem, state, status, k, admm), record
