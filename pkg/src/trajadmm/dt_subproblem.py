"""The one-dimensional time-step subproblem and its implicit gradient.

For slack Bezier pieces ``Xbar_i`` the time step is

    dt(Xbar) = argmin_dt  w dt - gamma sum log(v_max dt - |V~_i|)
                                 - gamma sum log(a_max dt^2 - |A~_i|)

with regularized norms ``|V~| = sqrt(|V|^2 + eps)`` and
``|A~| = sqrt(|A|^2 + eps^2)``.  The objective is strictly convex on its
domain, so a bracketed Newton iteration finds the unique root of the
derivative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curves import BezierStencil

__all__ = ["DtProblem", "DtSolution", "solve_dt", "dt_gradient", "reduced_lagrangian_terms"]


@dataclass
class DtProblem:
    """Time-step subproblem over one or more blocks of slack Bezier pieces.

    ``blocks`` holds ``(Xbar, stencil)`` with ``Xbar`` of shape
    ``(pieces, M + 1, dim)``.
    """

    blocks: list[tuple[np.ndarray, BezierStencil]]
    v_max: float = 2.0
    a_max: float = 2.0
    w: float = 1e8
    gamma: float = 10.0
    epsilon: float = 1e-4

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        Vs, As = [], []
        for X, st in self.blocks:
            X = np.asarray(X, float)
            Vs.append(np.einsum("ij,pjd->pid", st.velocity_matrix, X).reshape(X.shape[0], -1))
            As.append(np.einsum("ij,pjd->pid", st.acceleration_matrix, X).reshape(X.shape[0], -1))
        self.V = np.concatenate(Vs) if Vs else np.zeros((0, 1))
        self.A = np.concatenate(As) if As else np.zeros((0, 1))
        if not (np.all(np.isfinite(self.V)) and np.all(np.isfinite(self.A))):
            raise ValueError("slack control points must be finite")
        self.vn = np.sqrt((self.V**2).sum(1) + self.epsilon)
        self.an = np.sqrt((self.A**2).sum(1) + self.epsilon**2)

    @classmethod
    def from_norms(cls, vn, an, v_max=2.0, a_max=2.0, w=1e8, gamma=10.0) -> "DtProblem":
        """Problem over precomputed term norms (no gradient support)."""
        p = cls([], v_max, a_max, w, gamma)
        p.vn = np.asarray(vn, float)
        p.an = np.asarray(an, float)
        return p

    @property
    def dt_min(self) -> float:
        lo = 0.0
        if self.vn.size:
            lo = max(lo, float(self.vn.max()) / self.v_max)
        if self.an.size:
            lo = max(lo, math.sqrt(float(self.an.max()) / self.a_max))
        return lo

    def objective(self, dt: float) -> float:
        gv = self.v_max * dt - self.vn
        ga = self.a_max * dt * dt - self.an
        if np.any(gv <= 0) or np.any(ga <= 0):
            return math.inf
        return self.w * dt - self.gamma * (np.log(gv).sum() + np.log(ga).sum())

    def _offsets(self):
        base = self.dt_min
        return base, self.v_max * base - self.vn, self.a_max * base * base - self.an

    def gap_derivatives(self, s: float) -> tuple[float, float]:
        """Derivatives of the objective at ``dt = dt_min + s``.

        Barrier arguments are formed from ``s`` directly so they keep full
        relative precision when ``dt`` sits just above its lower bound.
        """
        base, cv, ca = self._offsets()
        dt = base + s
        gv = self.v_max * s + cv
        ga = self.a_max * s * (2.0 * base + s) + ca
        d1 = self.w - self.gamma * ((self.v_max / gv).sum() + (2 * self.a_max * dt / ga).sum())
        d2 = self.gamma * (
            (self.v_max**2 / gv**2).sum()
            + ((2 * self.a_max**2 * dt * dt + 2 * self.a_max * self.an) / ga**2).sum()
        )
        return float(d1), float(d2)

    def derivatives(self, dt: float) -> tuple[float, float]:
        """First and second derivative of the objective at ``dt``."""
        return self.gap_derivatives(dt - self.dt_min)

    def tolerance(self) -> float:
        return 1e-8 * self.w


@dataclass
class DtSolution:
    dt: float
    gap: float  # dt - dt_min, kept separately for precision
    residual: float
    curvature: float
    iterations: int
    gradient: list[np.ndarray] | None = None


def solve_dt(problem: DtProblem, with_gradient: bool = False, max_iter: int = 200) -> DtSolution:
    if not problem.w > 0:
        raise ValueError("the time subproblem needs a positive time weight")
    base, cv, ca = problem._offsets()
    # Open lower end of the feasible gap interval (zero up to rounding).
    lo = 0.0
    if cv.size:
        lo = max(lo, float((-cv / problem.v_max).max()))
    if ca.size and base > 0:
        lo = max(lo, float((-ca / (2 * problem.a_max * base)).max()))
    hi = max(base, 1e-300)
    while problem.gap_derivatives(hi)[0] <= 0.0:
        lo, hi = hi, 2.0 * hi
    x = hi
    tol = problem.tolerance()
    it = 0
    for it in range(1, max_iter + 1):
        d1, d2 = problem.gap_derivatives(x)
        if d1 > 0:
            hi = x
        else:
            lo = x
        xn = x - d1 / d2
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        done = abs(d1) <= tol and abs(xn - x) <= 1e-15 * x
        x = xn
        if done or hi - lo <= 4e-16 * hi:
            break
    d1, d2 = problem.gap_derivatives(x)
    sol = DtSolution(base + x, x, abs(d1), d2, it)
    if with_gradient:
        sol.gradient = dt_gradient(problem, sol)
    return sol


def dt_gradient(problem: DtProblem, dt) -> list[np.ndarray]:
    """Implicit-function gradient of ``dt`` with respect to each slack block.

    ``dt`` may be a :class:`DtSolution` (preferred, exact gap) or a float.
    """
    base, cv, ca = problem._offsets()
    if isinstance(dt, DtSolution):
        s = dt.gap
        slack = 0.0
    else:
        s = float(dt) - base
        # a rounded dt cannot resolve the root better than one ulp
        slack = problem.gap_derivatives(max(s, 1e-300))[1] * np.spacing(float(dt))
    if s <= 0:
        raise ValueError("time step is not above its feasibility bound")
    d1, d2 = problem.gap_derivatives(s)
    if not abs(d1) <= problem.tolerance() + slack:
        raise ValueError(f"stale time step: stationarity residual {abs(d1):.3g}")
    dtv = base + s
    gv = problem.v_max * s + cv
    ga = problem.a_max * s * (2.0 * base + s) + ca
    # Curvature d2 carries the factor gamma; so do the numerators below.
    cV = problem.gamma * problem.v_max / (gv**2 * problem.vn) / d2
    cA = problem.gamma * 2 * problem.a_max * dtv / (ga**2 * problem.an) / d2
    gV = cV[:, None] * problem.V
    gA = cA[:, None] * problem.A
    out = []
    start = 0
    for X, st in problem.blocks:
        n, m, d = np.shape(X)
        bv = gV[start:start + n].reshape(n, st.velocity_matrix.shape[0], d)
        ba = gA[start:start + n].reshape(n, st.acceleration_matrix.shape[0], d)
        out.append(
            np.einsum("ji,pjd->pid", st.velocity_matrix, bv)
            + np.einsum("ji,pjd->pid", st.acceleration_matrix, ba)
        )
        start += n
    return out


def reduced_lagrangian_terms(xbar, problem) -> tuple[float, list[np.ndarray], DtSolution | None]:
    """``sum O(Xbar_i) + w dt(Xbar)`` and its gradient with respect to every slack block.

    ``problem`` is a compiled :class:`~trajadmm.problem.Problem`; every track
    must be a Bezier trajectory.
    """
    weight = problem.objective.weight
    w = problem.objective.time_weight
    value = 0.0
    grads = []
    for X, Q in zip(xbar, problem.Q):
        QX = np.einsum("ij,pjd->pid", Q, X)
        value += weight * float(np.einsum("pid,pid->", X, QX))
        grads.append(2.0 * weight * QX)
    if w == 0.0:
        return value, grads, None
    sol = solve_dt(dt_problem_for(xbar, problem), with_gradient=True)
    value += w * sol.dt
    grads = [g + w * gd for g, gd in zip(grads, sol.gradient)]
    return value, grads, sol


def dt_problem_for(xbar, problem) -> DtProblem:
    blocks = []
    for X, t in zip(xbar, problem.tracks):
        if t.stencil is None:
            raise ValueError(f"robot {t.name!r}: the time subproblem needs Bezier pieces")
        blocks.append((X, t.stencil))
    return DtProblem(
        blocks,
        v_max=problem.v_max,
        a_max=problem.a_max,
        w=problem.objective.time_weight,
        gamma=problem.gamma,
        epsilon=problem.epsilon,
    )
