"""Composite Bezier and piecewise-linear trajectory representations.

Composite curves keep ``N(M-2)+3`` global control points.  Piece ``i``
reads the global block starting at ``i(M-2)``; for every piece after the
first, its leading three Bernstein points are the C2 continuation of the
previous piece's trailing three, so continuity holds by construction and
no constraint is needed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

__all__ = [
    "BezierStencil",
    "build_stencil",
    "bernstein_basis",
    "bernstein_gram",
    "bezier_eval",
    "CompositeBezier",
    "PiecewiseLinearTrajectory",
    "finite_difference_va",
    "polyline_length",
]


def _diff_matrix(n: int) -> np.ndarray:
    """Maps ``n+1`` Bernstein coefficients to the ``n`` of the derivative."""
    D = np.zeros((n, n + 1))
    idx = np.arange(n)
    D[idx, idx] = -n
    D[idx, idx + 1] = n
    return D


@dataclass(frozen=True)
class BezierStencil:
    degree: int
    position_matrix: np.ndarray
    velocity_matrix: np.ndarray
    acceleration_matrix: np.ndarray
    jerk_matrix: np.ndarray | None = None


@lru_cache(maxsize=None)
def build_stencil(degree: int) -> BezierStencil:
    M = int(degree)
    if M < 2:
        raise ValueError(f"Bezier degree must be >= 2, got {degree}")
    I = np.eye(M + 1)
    dI = _diff_matrix(M)
    ddI = _diff_matrix(M - 1) @ dI
    jerk = _diff_matrix(M - 2) @ ddI if M >= 3 else None
    for m in (I, dI, ddI, jerk):
        if m is not None:
            m.setflags(write=False)
    return BezierStencil(M, I, dI, ddI, jerk)


def bernstein_basis(n: int, s) -> np.ndarray:
    """Rows of Bernstein polynomials ``b_{k,n}(s)`` for each sample ``s``."""
    s = np.atleast_1d(np.asarray(s, float))[:, None]
    k = np.arange(n + 1)[None, :]
    coef = np.array([comb(n, j) for j in range(n + 1)], float)[None, :]
    return coef * s**k * (1.0 - s) ** (n - k)


@lru_cache(maxsize=None)
def bernstein_gram(n: int) -> np.ndarray:
    """Exact Gram matrix of degree-``n`` Bernstein polynomials on ``[0, 1]``."""
    G = np.empty((n + 1, n + 1))
    for j in range(n + 1):
        for k in range(n + 1):
            G[j, k] = comb(n, j) * comb(n, k) / ((2 * n + 1) * comb(2 * n, j + k))
    G.setflags(write=False)
    return G


def bezier_eval(points: np.ndarray, s, derivative: int = 0) -> np.ndarray:
    """Evaluate a single Bezier piece (or one of its derivatives) at ``s``."""
    P = np.asarray(points, float)
    if derivative >= P.shape[0]:
        return np.zeros((np.size(s), P.shape[1]))
    for _ in range(derivative):
        P = _diff_matrix(P.shape[0] - 1) @ P
    return bernstein_basis(P.shape[0] - 1, s) @ P


def _continuation_matrix(M: int) -> np.ndarray:
    """Local map from a piece's global block to its Bernstein points."""
    T = np.eye(M + 1)
    # p0 = c, p1 = 2c - b, p2 = a - 4b + 4c, with (a, b, c) the shared block.
    T[0, :3] = [0.0, 0.0, 1.0]
    T[1, :3] = [0.0, -1.0, 2.0]
    T[2, :3] = [1.0, -4.0, 4.0]
    return T


@dataclass
class CompositeBezier:
    """``N`` pieces of degree ``M`` with C2 joints, stored by global control points."""

    control_points: np.ndarray
    degree: int = 5
    pieces: int = field(init=False)

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.control_points, float))
        M = int(self.degree)
        build_stencil(M)
        extra = c.shape[0] - 3
        if M < 3 or extra <= 0 or extra % (M - 2):
            raise ValueError(
                f"{c.shape[0]} control points is not N(M-2)+3 for degree {M}"
            )
        self.control_points = c
        self.pieces = extra // (M - 2)
        if self.pieces > 1 and M < 5:
            # leading and trailing triples of a piece must not overlap
            raise ValueError("multi-piece C2 curves need degree >= 5")

    @classmethod
    def count(cls, pieces: int, degree: int = 5) -> int:
        return pieces * (degree - 2) + 3

    @property
    def dimension(self) -> int:
        return self.control_points.shape[1]

    def piece_indices(self, i: int) -> np.ndarray:
        M = self.degree
        return np.arange(i * (M - 2), i * (M - 2) + M + 1)

    def piece_transform(self, i: int) -> np.ndarray:
        return np.eye(self.degree + 1) if i == 0 else _continuation_matrix(self.degree)

    def sharing_maps(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked index sets ``S`` (N, M+1) and transforms ``T`` (N, M+1, M+1)."""
        S = np.stack([self.piece_indices(i) for i in range(self.pieces)])
        T = np.stack([self.piece_transform(i) for i in range(self.pieces)])
        return S, T

    def assemble_pieces(self, i: int) -> np.ndarray:
        """Bernstein control points of piece ``i`` (0-based storage index)."""
        if not 0 <= i < self.pieces:
            raise IndexError(f"piece {i} out of range for {self.pieces} pieces")
        return self.piece_transform(i) @ self.control_points[self.piece_indices(i)]

    def all_pieces(self) -> np.ndarray:
        S, T = self.sharing_maps()
        return np.einsum("pij,pjd->pid", T, self.control_points[S])

    def evaluate(self, u, derivative: int = 0) -> np.ndarray:
        """Evaluate at global parameter ``u`` in ``[0, N]`` (per-piece parameter units)."""
        u = np.atleast_1d(np.asarray(u, float))
        idx = np.clip(np.floor(u).astype(int), 0, self.pieces - 1)
        out = np.empty((u.size, self.dimension))
        X = self.all_pieces()
        for i in np.unique(idx):
            m = idx == i
            out[m] = bezier_eval(X[i], u[m] - i, derivative)
        return out

    def sample(self, per_piece: int = 64) -> np.ndarray:
        u = np.linspace(0.0, self.pieces, self.pieces * per_piece + 1)
        return self.evaluate(u)

    def length(self, per_piece: int = 32) -> float:
        """Arc length by composite 16-point Gauss-Legendre quadrature of the speed."""
        x, w = np.polynomial.legendre.leggauss(16)
        edges = np.linspace(0.0, 1.0, per_piece + 1)
        half = 0.5 * np.diff(edges)
        s = ((edges[:-1] + half)[:, None] + half[:, None] * x).ravel()
        ws = (half[:, None] * w).ravel()
        total = 0.0
        for P in self.all_pieces():
            v = bezier_eval(P, s, 1)
            total += float(ws @ np.sqrt((v * v).sum(1)))
        return total

    @classmethod
    def fit(cls, path, pieces: int, degree: int = 5, samples_per_piece: int = 12):
        """Least-squares fit to a parametric path ``path(s)``, ``s`` in ``[0, 1]``.

        The first and last control points are pinned to the path ends.
        """
        K = cls.count(pieces, degree)
        dim = np.asarray(path(0.0)).size
        u = np.linspace(0.0, pieces, pieces * samples_per_piece + 1)
        target = np.array([path(x / pieces) for x in u])
        proto = cls(np.zeros((K, dim)), degree)
        # Basis matrix: curve samples as a linear function of global points.
        B = np.zeros((u.size, K))
        S, T = proto.sharing_maps()
        idx = np.clip(np.floor(u).astype(int), 0, pieces - 1)
        for r, (i, x) in enumerate(zip(idx, u)):
            B[r, S[i]] += bernstein_basis(degree, x - i)[0] @ T[i]
        first = np.asarray(path(0.0), float)
        last = np.asarray(path(1.0), float)
        rhs = target - np.outer(B[:, 0], first) - np.outer(B[:, -1], last)
        inner, *_ = np.linalg.lstsq(B[:, 1:-1], rhs, rcond=None)
        return cls(np.vstack([first, inner, last]), degree)


@dataclass
class PiecewiseLinearTrajectory:
    """Waypoints ``x_0 .. x_{N+1}``; first and last are fixed boundary points."""

    waypoints: np.ndarray

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.waypoints, float))
        if w.shape[0] < 2:
            raise ValueError("need at least two waypoints")
        self.waypoints = w

    @property
    def pieces(self) -> int:
        return self.waypoints.shape[0] - 1

    def length(self) -> float:
        return polyline_length(self.waypoints)


def finite_difference_va(trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences ``V_i = x_{i+1} - x_i`` and ``A_i = x_{i+2} - 2x_{i+1} + x_i``."""
    w = trajectory.waypoints if isinstance(trajectory, PiecewiseLinearTrajectory) else np.asarray(trajectory, float)
    w = np.atleast_2d(w)
    if w.shape[0] < 3:
        raise ValueError("finite differences need at least 3 waypoints")
    V = np.diff(w, axis=0)
    A = np.diff(w, n=2, axis=0)
    return V, A


def polyline_length(points: np.ndarray) -> float:
    return float(np.sqrt((np.diff(points, axis=0) ** 2).sum(1)).sum())
