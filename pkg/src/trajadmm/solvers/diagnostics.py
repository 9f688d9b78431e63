"""Per-iteration convergence records and KKT residuals."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..lagrangian import LagrangianState, grad_lagrangian, kinematics, objective_gradient
from ..dt_subproblem import reduced_lagrangian_terms

__all__ = ["ConvergenceRecord", "kkt_residuals", "HISTORY_COLUMNS"]

HISTORY_COLUMNS = (
    "iteration",
    "lagrangian",
    "lyapunov",
    "grad_inf",
    "plane_grad_inf",
    "primal",
    "dual",
    "alpha_theta",
    "alpha_plane_min",
    "backtracks",
    "step_sq",
    "active_pairs",
    "gjk_accepts",
    "dt",
    "min_plane_arg",
    "min_limit_arg",
    "min_distance",
)


@dataclass
class ConvergenceRecord:
    """Column-wise history; row ``k`` describes the state after iteration ``k``."""

    rows: dict = field(default_factory=lambda: {c: [] for c in HISTORY_COLUMNS})
    wall_time: list = field(default_factory=list)
    stage_time: dict = field(default_factory=lambda: {"theta": [], "slack": [], "planes": [], "refresh": []})
    violations: list = field(default_factory=list)
    stalls: int = 0

    def append(self, **values):
        for c in HISTORY_COLUMNS:
            self.rows[c].append(values[c])

    def __len__(self):
        return len(self.rows["iteration"])

    def column(self, name) -> np.ndarray:
        return np.asarray(self.rows[name], float)

    def residual_sq(self) -> np.ndarray:
        """Squared combined KKT residual ``max(grad, primal, dual)^2`` per row."""
        g = self.column("grad_inf")
        p = np.nan_to_num(self.column("primal"))
        d = np.nan_to_num(self.column("dual"))
        return np.maximum(np.maximum(g, p), d) ** 2


def kkt_residuals(problem, state: LagrangianState, kin=None, theta_grad=None) -> tuple[float, float, float]:
    """Primal ``max |X(theta) - Xbar|_inf``, dual ``max |grad O(Xbar) - lambda|_inf`` and
    stationarity ``|grad L o exp|_inf`` over ``(theta, dt)`` and plane tangents.
    """
    if kin is None:
        kin = kinematics(problem, state.theta)
    if theta_grad is None:
        gt = grad_lagrangian(state, problem, "theta", kin)
        gdt = grad_lagrangian(state, problem, "dt", kin) if state.mode != "admm-full" else 0.0
    else:
        gt, gdt = theta_grad
    stat = max(_inf(gt), abs(gdt))
    for gv, gd in grad_lagrangian(state, problem, "plane", kin).values():
        stat = max(stat, _inf(gv), abs(gd))
    if state.mode == "am":
        return 0.0, 0.0, stat
    primal = max(_inf(X - Xb) for X, Xb in zip(kin.X, state.xbar))
    if state.mode == "admm-full":
        gO = reduced_lagrangian_terms(state.xbar, problem)[1]
    else:
        gO = objective_gradient(problem, state.xbar)
    dual = max(_inf(g - lam) for g, lam in zip(gO, state.lam))
    if state.mode == "admm":
        share = problem.objective.time_weight / problem.n_pieces_total
        primal = max(primal, max(_inf(state.dt - d) for d in state.dtbar))
        dual = max(dual, max(_inf(share - L) for L in state.Lam))
    return primal, dual, stat


def _inf(a) -> float:
    a = np.asarray(a, float)
    return float(np.abs(a).max()) if a.size else 0.0
