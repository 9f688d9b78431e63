"""Armijo backtracking in Euclidean space and on the unit-normal manifold."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from ..geometry import SeparatingPlane, sphere_exp, tangent_project

__all__ = ["LineSearchParams", "LineSearchStall", "StepResult", "armijo_step", "riemannian_plane_step"]


@dataclass(frozen=True)
class LineSearchParams:
    sufficient_decrease: float = 0.1
    shrink: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0 < self.sufficient_decrease < 1:
            raise ValueError("sufficient decrease constant must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if not self.initial_step > 0 or self.max_backtracks < 0:
            raise ValueError("initial step must be positive and max_backtracks >= 0")


class LineSearchStall(RuntimeError):
    def __init__(self, message, alpha, f0, grad_sq):
        super().__init__(message)
        self.alpha = alpha
        self.f0 = f0
        self.grad_sq = grad_sq


class StepResult(NamedTuple):
    point: object
    alpha: float
    value: float
    backtracks: int


def armijo_step(
    f: Callable,
    grad,
    x,
    params: LineSearchParams = LineSearchParams(),
    fx: float | None = None,
    alpha0: float | None = None,
) -> StepResult:
    """One backtracking gradient step ``x - alpha grad``.

    ``f`` must return ``inf`` (not raise) outside its domain so infeasible
    trials are simply rejected.  ``alpha0`` lets callers cap the first trial,
    e.g. by a continuous-collision bound.
    """
    x = np.asarray(x, float)
    g = np.asarray(grad, float)
    f0 = f(x) if fx is None else fx
    if not math.isfinite(f0):
        raise ValueError("line search started outside the domain")
    gg = float(g.ravel() @ g.ravel())
    a = params.initial_step if alpha0 is None else min(params.initial_step, alpha0)
    if gg == 0.0:
        return StepResult(x, 1.0, f0, 0)
    c = params.sufficient_decrease
    for m in range(params.max_backtracks + 1):
        trial = x - a * g
        ft = f(trial)
        if ft <= f0 - c * a * gg:
            return StepResult(trial, a, ft, m)
        a *= params.shrink
    raise LineSearchStall("Armijo backtracking exhausted", a, f0, gg)


def riemannian_plane_step(
    plane: SeparatingPlane,
    f: Callable[[SeparatingPlane], float],
    grad: tuple[np.ndarray, float],
    params: LineSearchParams = LineSearchParams(),
    fx: float | None = None,
) -> StepResult:
    """Joint backtracking on ``(v, d)``; the new normal is ``exp_n(-alpha g_v)``.

    ``grad`` is ``(g_n, g_d)``; ``g_n`` may be Euclidean, it is projected onto
    the tangent space here.
    """
    n = plane.normal
    gv = tangent_project(n, np.asarray(grad[0], float))
    gd = float(grad[1])
    f0 = f(plane) if fx is None else fx
    if not math.isfinite(f0):
        raise ValueError("plane is infeasible")
    gg = float(gv @ gv) + gd * gd
    if gg == 0.0:
        return StepResult(plane, 1.0, f0, 0)
    c = params.sufficient_decrease
    a = params.initial_step
    for m in range(params.max_backtracks + 1):
        trial = SeparatingPlane(sphere_exp(n, -a * gv), plane.offset - a * gd)
        ft = f(trial)
        if ft <= f0 - c * a * gg:
            return StepResult(trial, a, ft, m)
        a *= params.shrink
    raise LineSearchStall("Riemannian backtracking exhausted", a, f0, gg)
