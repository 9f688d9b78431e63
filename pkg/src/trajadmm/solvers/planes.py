"""Plane block: GJK fast path with a Riemannian fallback."""
from __future__ import annotations

from ..geometry import SeparatingPlane
from ..lagrangian import LagrangianState, kinematics
from ..problem import Pair, Problem
from .engine import plane_update
from .linesearch import LineSearchParams

__all__ = ["fast_plane_update"]


def fast_plane_update(
    problem: Problem,
    pair: Pair,
    plane: SeparatingPlane,
    state: LagrangianState,
    params: LineSearchParams = LineSearchParams(),
) -> SeparatingPlane:
    """GJK midpoint plane when it strictly lowers the Lagrangian, else one Riemannian step."""
    X = kinematics(problem, state.theta).X
    return plane_update(problem, pair, plane, X, params, fast=True)[0]
