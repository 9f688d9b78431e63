"""Convex-hull proximity queries and unit-normal manifold helpers.

GJK here works on explicit vertex lists; hulls at desk scale have a handful
of vertices, so the support function is a single ``argmax``.  The simplex
sub-problem is solved with closed-form Voronoi-region tests (point, segment,
triangle, tetrahedron) which keeps the result exact up to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "ConvexHull",
    "SeparatingPlane",
    "TangentStep",
    "Proximity",
    "NoSeparatingPlane",
    "InfeasibleStateError",
    "gjk_distance",
    "plane_from_gjk",
    "ccd_max_step",
    "sphere_exp",
    "tangent_project",
    "rodriguez_rotation",
]


class InfeasibleStateError(RuntimeError):
    """Raised when a state violates a strict feasibility requirement."""


class NoSeparatingPlane(ValueError):
    """Raised when two hulls touch or overlap so no strict separator exists."""


@dataclass(frozen=True)
class ConvexHull:
    """Convex hull of a finite point set, stored by its generating vertices."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[0] < 1 or v.shape[1] not in (2, 3):
            raise ValueError(f"hull needs >=1 vertex in 2D or 3D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("hull vertices must be finite")
        object.__setattr__(self, "vertices", v)

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]


@dataclass(frozen=True)
class SeparatingPlane:
    """Plane ``n . x + d = 0``; ``normal`` is always stored as a 3-vector."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.zeros(3)
        raw = np.asarray(self.normal, dtype=float).ravel()
        n[: raw.size] = raw
        norm = np.linalg.norm(n)
        if not norm > 0:
            raise ValueError("plane normal must be nonzero")
        if abs(norm - 1.0) > 1e-12:
            n = n / norm
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    def side(self, points: np.ndarray) -> np.ndarray:
        """Signed values ``n . x + d`` for each row of ``points``."""
        points = np.atleast_2d(points)
        return points @ self.normal[: points.shape[1]] + self.offset


@dataclass(frozen=True)
class TangentStep:
    normal_tangent: np.ndarray
    offset_delta: float


class Proximity(NamedTuple):
    distance: float
    direction: np.ndarray  # unit vector from b toward a (zeros when touching)
    witness_a: np.ndarray
    witness_b: np.ndarray


# ---------------------------------------------------------------------------
# GJK
# ---------------------------------------------------------------------------

def _closest_segment(p0, p1):
    d = p1 - p0
    dd = d @ d
    if dd <= 0.0:
        return p0, (0,), (1.0,)
    t = -(p0 @ d) / dd
    if t <= 0.0:
        return p0, (0,), (1.0,)
    if t >= 1.0:
        return p1, (1,), (1.0,)
    return p0 + t * d, (0, 1), (1.0 - t, t)


def _closest_triangle(a, b, c):
    # Voronoi-region walk for the origin against triangle abc (any dimension).
    ab = b - a
    ac = c - a
    ap = -a
    d1 = ab @ ap
    d2 = ac @ ap
    if d1 <= 0.0 and d2 <= 0.0:
        return a, (0,), (1.0,)
    bp = -b
    d3 = ab @ bp
    d4 = ac @ bp
    if d3 >= 0.0 and d4 <= d3:
        return b, (1,), (1.0,)
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3)
        return a + t * ab, (0, 1), (1.0 - t, t)
    cp = -c
    d5 = ab @ cp
    d6 = ac @ cp
    if d6 >= 0.0 and d5 <= d6:
        return c, (2,), (1.0,)
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6)
        return a + t * ac, (0, 2), (1.0 - t, t)
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + t * (c - b), (1, 2), (1.0 - t, t)
    denom = va + vb + vc
    if denom <= 0.0:
        # Degenerate (collinear) triangle: fall back to its edges.
        return _best_of_edges((a, b, c), ((0, 1), (0, 2), (1, 2)))
    v = vb / denom
    w = vc / denom
    return a + v * ab + w * ac, (0, 1, 2), (1.0 - v - w, v, w)


def _best_of_edges(pts, edges):
    best = None
    for i, j in edges:
        p, ids, lam = _closest_segment(pts[i], pts[j])
        n = p @ p
        if best is None or n < best[0]:
            best = (n, p, tuple((i, j)[k] for k in ids), lam)
    return best[1], best[2], best[3]


def _closest_tetrahedron(pts):
    a, b, c, d = pts
    faces = ((0, 1, 2, 3), (0, 1, 3, 2), (0, 2, 3, 1), (1, 2, 3, 0))
    best = None
    inside = True
    for i, j, k, opp in faces:
        pa, pb, pc = pts[i], pts[j], pts[k]
        nrm = np.cross(pb - pa, pc - pa)
        s_origin = -(nrm @ pa)
        s_opp = nrm @ (pts[opp] - pa)
        if s_opp == 0.0:
            inside = False  # degenerate (flat) tetrahedron
        elif s_origin * s_opp < 0.0:
            inside = False
        else:
            continue
        p, ids, lam = _closest_triangle(pa, pb, pc)
        n = p @ p
        if best is None or n < best[0]:
            best = (n, p, tuple((i, j, k)[m] for m in ids), lam)
    if inside:
        return None
    return best[1], best[2], best[3]


def _closest_on_simplex(W):
    k = len(W)
    if k == 1:
        return W[0], (0,), (1.0,)
    if k == 2:
        return _closest_segment(W[0], W[1])
    if k == 3:
        return _closest_triangle(W[0], W[1], W[2])
    return _closest_tetrahedron(W)


def _gjk(A: np.ndarray, B: np.ndarray) -> Proximity:
    dim = A.shape[1]
    v = A[0] - B[0]
    simplex: list[np.ndarray] = []
    ids: list[tuple[int, int]] = []
    lam: tuple = (1.0,)
    support_ids: list[tuple[int, int]] = [(0, 0)]
    for _ in range(64):
        vv = v @ v
        if vv <= 1e-28:
            return _touching(A, B, support_ids, lam)
        ia = int(np.argmin(A @ v))
        ib = int(np.argmax(B @ v))
        w = A[ia] - B[ib]
        if vv - v @ w <= 1e-13 * vv or (ia, ib) in ids:
            break
        simplex.append(w)
        ids.append((ia, ib))
        res = _closest_on_simplex(simplex)
        if res is None or len(res[1]) == dim + 1:
            return _touching(A, B, ids, None)
        v, keep, lam = res
        simplex = [simplex[i] for i in keep]
        ids = [ids[i] for i in keep]
        support_ids = ids
    wa = sum(l * A[i] for l, (i, _) in zip(lam, support_ids))
    wb = sum(l * B[j] for l, (_, j) in zip(lam, support_ids))
    dist = math.sqrt(v @ v)
    if dist <= 1e-14:
        return _touching(A, B, support_ids, lam)
    return Proximity(dist, v / dist, np.asarray(wa, float), np.asarray(wb, float))


def _touching(A, B, ids, lam):
    if lam is None:
        wa = A[ids[0][0]]
    else:
        wa = sum(l * A[i] for l, (i, _) in zip(lam, ids))
    wa = np.asarray(wa, float)
    return Proximity(0.0, np.zeros(A.shape[1]), wa, wa.copy())


def gjk_distance(a: ConvexHull | np.ndarray, b: ConvexHull | np.ndarray) -> Proximity:
    """Minimum distance between two convex hulls.

    ``direction`` points from ``b`` toward ``a``; it is zero when the hulls
    touch or overlap.  The computation is canonicalized on argument order so
    that swapping the hulls yields exactly the same distance.
    """
    A = a.vertices if isinstance(a, ConvexHull) else np.atleast_2d(np.asarray(a, float))
    B = b.vertices if isinstance(b, ConvexHull) else np.atleast_2d(np.asarray(b, float))
    if A.shape[1] != B.shape[1]:
        raise ValueError("hull dimensions differ")
    if _order_key(A) <= _order_key(B):
        return _gjk(A, B)
    r = _gjk(B, A)
    return Proximity(r.distance, -r.direction, r.witness_b, r.witness_a)


def _order_key(V: np.ndarray):
    return (V.shape[0], V.tobytes())


def plane_from_gjk(a, b) -> SeparatingPlane:
    """Plane through the midpoint of the witness segment, ``a`` on the positive side."""
    prox = gjk_distance(a, b)
    if prox.distance <= 0.0:
        raise NoSeparatingPlane("hulls touch or intersect")
    n = prox.direction
    mid = 0.5 * (prox.witness_a + prox.witness_b)
    return SeparatingPlane(n, -float(n @ mid))


# ---------------------------------------------------------------------------
# Continuous collision detection
# ---------------------------------------------------------------------------

def ccd_max_step(
    moving_before,
    moving_after,
    other,
    clearance: float,
    other_after=None,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> float:
    """Largest safe fraction of a linear vertex motion, by conservative advancement.

    Vertices move as ``before + t (after - before)``.  When ``other_after`` is
    given the other hull moves too; the speed bound then adds both hulls'
    fastest vertices.
    """
    P0 = _verts(moving_before)
    P1 = _verts(moving_after)
    Q0 = _verts(other)
    Q1 = Q0 if other_after is None else _verts(other_after)
    dP = P1 - P0
    dQ = Q1 - Q0
    speed = float(np.sqrt((dP * dP).sum(1)).max())
    if other_after is not None:
        speed += float(np.sqrt((dQ * dQ).sum(1)).max())
    d0 = gjk_distance(P0, Q0).distance
    if not d0 > clearance:
        raise InfeasibleStateError(
            f"hull distance {d0:.6g} already within clearance {clearance:.6g}"
        )
    if speed == 0.0:
        return 1.0
    t = 0.0
    gap = d0 - clearance
    for _ in range(max_iter):
        if gap < tol:
            break
        t_next = t + gap / speed
        if t_next >= 1.0:
            return 1.0
        t = t_next
        gap = gjk_distance(P0 + t * dP, Q0 + t * dQ).distance - clearance
        if gap < 0.0:
            # Rounding pushed us past the wall; retreat conservatively.
            t = max(0.0, t + gap / speed)
            break
    return t


def _verts(h):
    return h.vertices if isinstance(h, ConvexHull) else np.atleast_2d(np.asarray(h, float))


# ---------------------------------------------------------------------------
# Unit-normal manifold
# ---------------------------------------------------------------------------

def tangent_project(n: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Project ``g`` onto the tangent space of the unit sphere at ``n``."""
    return g - (n @ g) * n


def sphere_exp(n: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Exponential map of the unit sphere at ``n`` applied to tangent ``v``."""
    n = np.asarray(n, float)
    v = np.asarray(v, float)
    t = math.sqrt(v @ v)
    if t == 0.0:
        return n.copy()
    out = math.cos(t) * n + (math.sin(t) / t) * v
    return out / math.sqrt(out @ out)


def rodriguez_rotation(r: np.ndarray) -> np.ndarray:
    """Rotation matrix for the axis-angle vector ``r`` (Rodrigues' formula)."""
    r = np.asarray(r, float).ravel()
    theta = math.sqrt(r @ r)
    if theta == 0.0:
        return np.eye(3)
    k = r / theta
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(theta) * K + (1.0 - math.cos(theta)) * (K @ K)
