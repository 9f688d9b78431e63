"""Optimization loops and their building blocks."""
from .admm import AdmmParams, estimate_lipschitz, multiplier_update, run_admm, slack_update
from .am import run_am
from .diagnostics import ConvergenceRecord, kkt_residuals
from .engine import AuditViolation, Solution, SolverOptions, initial_state, run_solver
from .linesearch import LineSearchParams, LineSearchStall, armijo_step, riemannian_plane_step
from .planes import fast_plane_update

__all__ = [
    "AdmmParams",
    "AuditViolation",
    "ConvergenceRecord",
    "LineSearchParams",
    "LineSearchStall",
    "Solution",
    "SolverOptions",
    "armijo_step",
    "estimate_lipschitz",
    "fast_plane_update",
    "initial_state",
    "kkt_residuals",
    "multiplier_update",
    "riemannian_plane_step",
    "run_admm",
    "run_am",
    "run_solver",
    "slack_update",
]
