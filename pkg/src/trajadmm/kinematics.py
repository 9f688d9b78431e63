"""Forward kinematics for point robots and planar serial arms.

Arm links are rectangles spanning joint to joint, inflated sideways by the
link half-width.  Vertices come out link by link, four corners each, so a
configuration maps to a ``(4 * n_links, 2)`` array.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ConvexHull

__all__ = ["RobotModel", "forward_kinematics", "fk_jacobian", "link_hulls", "joint_positions"]

POINT = "point"
ARM = "arm"


@dataclass(frozen=True)
class RobotModel:
    kind: str = POINT
    link_lengths: tuple[float, ...] = ()
    link_half_width: float = 0.0
    base: tuple[float, ...] = (0.0, 0.0)
    base_angle: float = 0.0
    dimension: int = 2

    def __post_init__(self):
        if self.kind not in (POINT, ARM):
            raise ValueError(f"unknown robot kind {self.kind!r}")
        object.__setattr__(self, "link_lengths", tuple(float(x) for x in self.link_lengths))
        object.__setattr__(self, "base", tuple(float(x) for x in self.base))
        if self.kind == ARM:
            if not self.link_lengths or min(self.link_lengths) <= 0:
                raise ValueError("arm link lengths must be positive")
            if self.link_half_width < 0:
                raise ValueError("link half-width must be nonnegative")
            if self.dimension != 2 or len(self.base) != 2:
                raise ValueError("serial arms are planar")

    @property
    def dof(self) -> int:
        return len(self.link_lengths) if self.kind == ARM else self.dimension

    @property
    def n_bodies(self) -> int:
        return len(self.link_lengths) if self.kind == ARM else 1

    @property
    def vertices_per_body(self) -> int:
        return 4 if self.kind == ARM else 1


def _check(model: RobotModel, theta) -> np.ndarray:
    q = np.asarray(theta, float).ravel()
    if q.size != model.dof:
        raise ValueError(f"configuration has {q.size} entries, model expects {model.dof}")
    return q


def joint_positions(model: RobotModel, theta) -> np.ndarray:
    """Base, intermediate joints and the distal tip, shape ``(n_links + 1, 2)``."""
    q = _check(model, theta)
    phi = model.base_angle + np.cumsum(q)
    steps = np.asarray(model.link_lengths)[:, None] * np.column_stack([np.cos(phi), np.sin(phi)])
    return np.vstack([np.asarray(model.base), np.asarray(model.base) + np.cumsum(steps, axis=0)])


def forward_kinematics(model: RobotModel, theta) -> np.ndarray:
    if model.kind == POINT:
        return _check(model, theta)[None, :].copy()
    q = _check(model, theta)
    P = joint_positions(model, q)
    phi = model.base_angle + np.cumsum(q)
    side = model.link_half_width * np.column_stack([-np.sin(phi), np.cos(phi)])
    start, end = P[:-1], P[1:]
    corners = np.stack([start - side, end - side, end + side, start + side], axis=1)
    return corners.reshape(-1, 2)


def fk_jacobian(model: RobotModel, theta) -> np.ndarray:
    """Jacobian of the flattened vertex array (row order x0, y0, x1, y1, ...)."""
    if model.kind == POINT:
        _check(model, theta)
        return np.eye(model.dof)
    q = _check(model, theta)
    X = forward_kinematics(model, q)
    P = joint_positions(model, q)
    n = q.size
    J = np.zeros((X.shape[0], 2, n))
    link_of = np.repeat(np.arange(n), 4)
    for m in range(n):
        rel = X - P[m]
        mask = link_of >= m
        # rotation about joint m moves every vertex distal to it
        J[mask, 0, m] = -rel[mask, 1]
        J[mask, 1, m] = rel[mask, 0]
    return J.reshape(-1, n)


def link_hulls(model: RobotModel, theta) -> list[ConvexHull]:
    X = forward_kinematics(model, theta)
    k = model.vertices_per_body
    return [ConvexHull(X[i * k:(i + 1) * k]) for i in range(model.n_bodies)]
