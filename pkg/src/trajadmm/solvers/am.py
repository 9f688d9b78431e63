"""Alternating minimization over (theta, dt) and the separating planes."""
from __future__ import annotations

from ..problem import Problem
from .engine import SolverOptions, run_solver

__all__ = ["run_am"]


def run_am(problem: Problem, options: SolverOptions | None = None, init=None):
    """Returns ``(Solution, ConvergenceRecord)``; ``init`` defaults to the problem's initial guess."""
    return run_solver(problem, "am", options, init)
