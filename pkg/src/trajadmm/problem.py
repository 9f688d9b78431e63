"""Compiled optimization problem: robots as tracks, pieces, bodies and pairs.

A *track* is one robot's trajectory.  It owns the full configuration array
``q`` (control points, waypoints or joint configurations, first and last row
fixed) and knows how to produce the per-piece Cartesian point sets ``X_i``,
how to pull gradients on those points back to ``q``, and which linear
combinations of ``q`` are limited in velocity and acceleration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curves import CompositeBezier, bernstein_gram, build_stencil
from .kinematics import ARM, RobotModel, fk_jacobian, forward_kinematics

__all__ = ["ObjectiveSpec", "Track", "LinearTrack", "ArmTrack", "Pair", "Problem", "make_track"]

OBJECTIVE_KINDS = ("length", "acceleration", "jerk")


@dataclass(frozen=True)
class ObjectiveSpec:
    """Per-piece quadratic smoothness ``weight * tr(X^T Q X)`` plus ``w * dt``."""

    kind: str = "length"
    weight: float = 1.0
    time_weight: float = 1e8

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"objective kind must be one of {OBJECTIVE_KINDS}")
        if self.weight < 0 or self.time_weight < 0:
            raise ValueError("objective weights must be nonnegative")


class Track:
    name: str
    model: RobotModel
    representation: str
    q0: np.ndarray
    n_pieces: int
    points_per_piece: int
    bodies: list[np.ndarray]
    vel_index: np.ndarray  # (terms, s)
    vel_coef: np.ndarray  # (terms, rows, s)
    acc_index: np.ndarray
    acc_coef: np.ndarray
    stencil = None  # Bezier stencil when pieces are Bernstein control points

    @property
    def n_free(self) -> int:
        return (self.q0.shape[0] - 2) * self.q0.shape[1]

    def with_free(self, free: np.ndarray) -> np.ndarray:
        q = self.q0.copy()
        q[1:-1] = free.reshape(self.q0.shape[0] - 2, self.q0.shape[1])
        return q

    def limit_vectors(self, q: np.ndarray):
        """Stacked velocity and acceleration terms, each ``(terms, rows * dof)``."""
        V = np.einsum("tij,tjd->tid", self.vel_coef, q[self.vel_index])
        A = np.einsum("tij,tjd->tid", self.acc_coef, q[self.acc_index])
        return V.reshape(V.shape[0], -1), A.reshape(A.shape[0], -1)

    def pull_limits(self, q, gV, gA) -> np.ndarray:
        out = np.zeros_like(q)
        for idx, coef, g in ((self.vel_index, self.vel_coef, gV), (self.acc_index, self.acc_coef, gA)):
            if g is None or len(idx) == 0:
                continue
            g = g.reshape(coef.shape[0], coef.shape[1], q.shape[1])
            np.add.at(out, idx, np.einsum("tij,tid->tjd", coef, g))
        return out

    def objective_matrix(self, kind: str) -> np.ndarray:
        raise NotImplementedError

    def piece_points(self, q):
        raise NotImplementedError

    def pullback(self, q, G, cache=None):
        raise NotImplementedError


class LinearTrack(Track):
    """Point robot whose piece points are a fixed linear map of ``q``."""

    def __init__(self, name, model: RobotModel, representation: str, q0, degree: int = 5):
        self.name = name
        self.model = model
        self.representation = representation
        self.q0 = np.array(q0, float)
        if self.q0.ndim != 2 or self.q0.shape[1] != model.dimension:
            raise ValueError(f"robot {name!r}: points must be (K, {model.dimension})")
        if representation == "bezier":
            curve = CompositeBezier(self.q0, degree)
            self.degree = degree
            self.stencil = build_stencil(degree)
            self.S, self.T = curve.sharing_maps()
            st = self.stencil
            self.vel_index = self.S
            self.vel_coef = np.einsum("ij,pjk->pik", st.velocity_matrix, self.T)
            self.acc_index = self.S
            self.acc_coef = np.einsum("ij,pjk->pik", st.acceleration_matrix, self.T)
        elif representation == "piecewise-linear":
            K = self.q0.shape[0]
            if K < 3:
                raise ValueError(f"robot {name!r}: piecewise-linear needs >= 3 waypoints")
            self.degree = 1
            self.S = np.column_stack([np.arange(K - 1), np.arange(1, K)])
            self.T = np.broadcast_to(np.eye(2), (K - 1, 2, 2)).copy()
            self.vel_index = self.S
            self.vel_coef = np.broadcast_to(np.array([[[-1.0, 1.0]]]), (K - 1, 1, 2)).copy()
            self.acc_index = np.column_stack([np.arange(K - 2), np.arange(1, K - 1), np.arange(2, K)])
            self.acc_coef = np.broadcast_to(np.array([[[1.0, -2.0, 1.0]]]), (K - 2, 1, 3)).copy()
        else:
            raise ValueError(f"unknown representation {representation!r}")
        self.n_pieces = self.S.shape[0]
        self.points_per_piece = self.S.shape[1]
        self.bodies = [np.arange(self.points_per_piece)]

    def piece_points(self, q):
        return np.einsum("pij,pjd->pid", self.T, q[self.S])

    def pullback(self, q, G, cache=None):
        out = np.zeros_like(q)
        np.add.at(out, self.S, np.einsum("pji,pjd->pid", self.T, G))
        return out

    def objective_matrix(self, kind: str) -> np.ndarray:
        m = self.points_per_piece
        if kind == "length":
            D = np.diff(np.eye(m), axis=0)
            return D.T @ D
        if self.stencil is None:
            raise ValueError(f"objective {kind!r} needs a Bezier trajectory")
        st = self.stencil
        if kind == "acceleration":
            return st.acceleration_matrix.T @ bernstein_gram(self.degree - 2) @ st.acceleration_matrix
        if st.jerk_matrix is None:
            raise ValueError("jerk objective needs degree >= 3")
        return st.jerk_matrix.T @ bernstein_gram(self.degree - 3) @ st.jerk_matrix


class ArmTrack(Track):
    """Planar arm moving piecewise-linearly in configuration space.

    Piece ``i`` holds the link vertices at configurations ``i`` and ``i+1``;
    one body per link collects that link's corners at both ends of the piece.
    """

    representation = "piecewise-linear"

    def __init__(self, name, model: RobotModel, q0):
        self.name = name
        self.model = model
        self.q0 = np.array(q0, float)
        if self.q0.ndim != 2 or self.q0.shape[1] != model.dof or self.q0.shape[0] < 3:
            raise ValueError(f"robot {name!r}: configurations must be (K>=3, {model.dof})")
        K = self.q0.shape[0]
        nv = 4 * model.n_bodies
        self.n_vertices = nv
        self.n_pieces = K - 1
        self.points_per_piece = 2 * nv
        self.bodies = [np.r_[4 * l:4 * l + 4, nv + 4 * l:nv + 4 * l + 4] for l in range(model.n_bodies)]
        self.vel_index = np.column_stack([np.arange(K - 1), np.arange(1, K)])
        self.vel_coef = np.broadcast_to(np.array([[[-1.0, 1.0]]]), (K - 1, 1, 2)).copy()
        self.acc_index = np.column_stack([np.arange(K - 2), np.arange(1, K - 1), np.arange(2, K)])
        self.acc_coef = np.broadcast_to(np.array([[[1.0, -2.0, 1.0]]]), (K - 2, 1, 3)).copy()

    def vertices(self, q):
        return np.stack([forward_kinematics(self.model, qi) for qi in q])

    def piece_points(self, q):
        F = self.vertices(q)
        return np.concatenate([F[:-1], F[1:]], axis=1)

    def pullback(self, q, G, cache=None):
        nv = self.n_vertices
        J = np.stack([fk_jacobian(self.model, qi) for qi in q])  # (K, 2nv, dof)
        gv = np.zeros((q.shape[0], nv, 2))
        gv[:-1] += G[:, :nv]
        gv[1:] += G[:, nv:]
        return np.einsum("kvd,kv->kd", J, gv.reshape(q.shape[0], -1))

    def objective_matrix(self, kind: str) -> np.ndarray:
        if kind != "length":
            raise ValueError("arms support only the squared-length objective")
        nv = self.n_vertices
        D = np.hstack([-np.eye(nv), np.eye(nv)])
        return D.T @ D


def make_track(name, model: RobotModel, representation: str, q0, degree: int = 5) -> Track:
    if model.kind == ARM:
        if representation != "piecewise-linear":
            raise ValueError("arm trajectories are piecewise-linear in configuration space")
        return ArmTrack(name, model, q0)
    return LinearTrack(name, model, representation, q0, degree)


@dataclass(frozen=True)
class Pair:
    """Candidate collision pair between a robot body and an obstacle or another body.

    ``a`` is ``(track, piece, body)``; ``b`` is ``(track, piece, body)`` for a
    robot pair or ``(-1, obstacle, 0)`` for an obstacle pair.  ``a`` sits on
    the positive side of the pair's plane.
    """

    a: tuple[int, int, int]
    b: tuple[int, int, int]

    @property
    def is_obstacle(self) -> bool:
        return self.b[0] < 0

    @property
    def key(self):
        return self.a + self.b


@dataclass
class Problem:
    tracks: list[Track]
    obstacles: list[np.ndarray]
    objective: ObjectiveSpec
    gamma: float
    v_max: float
    a_max: float
    activation_distance: float
    clearance: float
    epsilon: float = 1e-4
    pairs: list[Pair] = field(init=False)
    Q: list[np.ndarray] = field(init=False)

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError("gamma must be nonnegative")
        if not self.activation_distance > self.clearance >= 0:
            raise ValueError("need activation_distance > clearance >= 0")
        if self.v_max <= 0 or self.a_max <= 0:
            raise ValueError("limits must be positive")
        dims = {t.model.dimension for t in self.tracks}
        dims |= {o.shape[1] for o in self.obstacles}
        if len(dims) != 1:
            raise ValueError("all robots and obstacles must share one dimension")
        self.dimension = dims.pop()
        self.obstacles = [np.atleast_2d(np.asarray(o, float)) for o in self.obstacles]
        self.Q = [t.objective_matrix(self.objective.kind) for t in self.tracks]
        sizes = [t.n_free for t in self.tracks]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.n_pieces_total = int(sum(t.n_pieces for t in self.tracks))
        self.pairs = self._build_pairs()

    # -- layout -------------------------------------------------------------
    @property
    def n_theta(self) -> int:
        return int(self.offsets[-1])

    def theta0(self) -> np.ndarray:
        return np.concatenate([t.q0[1:-1].ravel() for t in self.tracks])

    def unpack(self, theta: np.ndarray) -> list[np.ndarray]:
        return [t.with_free(theta[self.offsets[r]:self.offsets[r + 1]]) for r, t in enumerate(self.tracks)]

    def pack(self, grads_q: list[np.ndarray]) -> np.ndarray:
        return np.concatenate([g[1:-1].ravel() for g in grads_q])

    def piece_points(self, qs) -> list[np.ndarray]:
        return [t.piece_points(q) for t, q in zip(self.tracks, qs)]

    def body_points(self, X, ref) -> np.ndarray:
        r, i, b = ref
        if r < 0:
            return self.obstacles[i]
        return X[r][i][self.tracks[r].bodies[b]]

    def _build_pairs(self) -> list[Pair]:
        pairs = []
        for r, t in enumerate(self.tracks):
            for i in range(t.n_pieces):
                for b in range(len(t.bodies)):
                    for o in range(len(self.obstacles)):
                        pairs.append(Pair((r, i, b), (-1, o, 0)))
        # bodies of one arm that do not share a joint
        for r, t in enumerate(self.tracks):
            nb = len(t.bodies)
            for i in range(t.n_pieces):
                for b1 in range(nb):
                    for b2 in range(b1 + 2, nb):
                        pairs.append(Pair((r, i, b1), (r, i, b2)))
        # different robots, same time slot
        for r1 in range(len(self.tracks)):
            for r2 in range(r1 + 1, len(self.tracks)):
                t1, t2 = self.tracks[r1], self.tracks[r2]
                if t1.n_pieces != t2.n_pieces:
                    raise ValueError(
                        f"robots {t1.name!r} and {t2.name!r} must have the same number of pieces"
                    )
                for i in range(t1.n_pieces):
                    for b1 in range(len(t1.bodies)):
                        for b2 in range(len(t2.bodies)):
                            pairs.append(Pair((r1, i, b1), (r2, i, b2)))
        return pairs

    def lipschitz_objective(self) -> float:
        """Largest Hessian eigenvalue of the per-piece slack objective."""
        from .solvers.admm import estimate_lipschitz

        return max(estimate_lipschitz(Q, self.objective.weight) for Q in self.Q)
