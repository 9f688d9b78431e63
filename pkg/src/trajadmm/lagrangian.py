"""Barrier, augmented and reduced Lagrangians with analytic block gradients.

Three modes share one state type:

``am``
    objective on ``X(theta)`` + ``w dt`` + limit barriers + plane barriers.
``admm``
    objective on the slack copies ``Xbar``/``dtbar`` + limit and plane
    barriers on ``X(theta)`` + consensus penalties and multipliers.
``admm-full``
    ``sum O(Xbar) + w dt(Xbar)`` + plane barriers + consensus on ``X`` only;
    the limits are enforced through ``dt(Xbar)``.

Every barrier group is repulsive: each contributes ``-gamma log(arg)`` (plain
form for limits, locally supported form for planes) and a nonpositive
argument makes the value ``+inf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dt_subproblem import reduced_lagrangian_terms
from .geometry import InfeasibleStateError, SeparatingPlane, gjk_distance, plane_from_gjk, tangent_project
from .problem import Pair, Problem

__all__ = [
    "BarrierParams",
    "LagrangianState",
    "Kinematics",
    "barrier",
    "barrier_derivative",
    "kinematics",
    "theta_terms",
    "slack_terms",
    "eval_lagrangian",
    "grad_lagrangian",
    "theta_gradient",
    "slack_gradient",
    "pair_value",
    "pair_gradient",
    "pair_distances",
    "refresh_planes",
    "active_pairs",
    "objective_gradient",
    "MODES",
]

MODES = ("am", "admm", "admm-full")


@dataclass(frozen=True)
class BarrierParams:
    """Barrier weight and the two distance scales.

    The plane barrier vanishes for arguments above ``support``, which is half
    the activation distance: a plane placed midway across a gap of exactly
    the activation distance contributes nothing.
    """

    gamma: float = 10.0
    activation_distance: float = 0.1
    clearance: float = 0.01

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.activation_distance > self.clearance >= 0:
            raise ValueError("need activation_distance > clearance >= 0")

    @property
    def support(self) -> float:
        return 0.5 * self.activation_distance


def _barrier_parts(g, gamma, ghat, derivative=True):
    """Values and derivatives for positive ``g``; zero outside the support."""
    g = np.asarray(g, float)
    u = np.atleast_1d(g / ghat)
    val = np.zeros_like(u)
    der = np.zeros_like(u) if derivative else None
    m = u < 1.0
    if m.any():
        um = u[m]
        lg = np.log(um)
        val[m] = -gamma * (um - 1.0) ** 2 * lg
        if derivative:
            der[m] = -gamma * (2.0 * (um - 1.0) * lg + (um - 1.0) ** 2 / um) / ghat
    if g.ndim == 0:
        return val.reshape(()), None if der is None else der.reshape(())
    return val, der


def barrier(g, params: BarrierParams):
    """Locally supported log barrier ``-gamma (u-1)^2 log u``, ``u = g / support``."""
    g = np.asarray(g, float)
    if np.any(g <= 0):
        raise InfeasibleStateError("barrier argument must be positive")
    val, _ = _barrier_parts(g, params.gamma, params.support)
    return float(val) if val.ndim == 0 else val


def barrier_derivative(g, params: BarrierParams):
    g = np.asarray(g, float)
    if np.any(g <= 0):
        raise InfeasibleStateError("barrier argument must be positive")
    _, der = _barrier_parts(g, params.gamma, params.support)
    return float(der) if der.ndim == 0 else der


def _bsum(g, gamma, ghat, derivative=True):
    """Sum of plane barriers over ``g`` and their derivatives, ``inf`` when infeasible."""
    if g.size == 0:
        return 0.0, np.zeros_like(g)
    lo = g.min()
    if lo <= 0.0:
        return math.inf, None
    if lo >= ghat:
        return 0.0, np.zeros_like(g) if derivative else None
    val, der = _barrier_parts(g, gamma, ghat, derivative)
    return float(val.sum()), der


@dataclass
class LagrangianState:
    theta: np.ndarray
    dt: float
    planes: dict = field(default_factory=dict)  # Pair -> SeparatingPlane
    mode: str = "am"
    xbar: list | None = None
    lam: list | None = None
    dtbar: list | None = None
    Lam: list | None = None
    rho: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def copy(self) -> "LagrangianState":
        cp = lambda xs: None if xs is None else [np.array(x, copy=True) for x in xs]
        return replace(
            self,
            theta=self.theta.copy(),
            planes=dict(self.planes),
            xbar=cp(self.xbar),
            lam=cp(self.lam),
            dtbar=cp(self.dtbar),
            Lam=cp(self.Lam),
        )


@dataclass
class Kinematics:
    theta: np.ndarray
    qs: list[np.ndarray]
    X: list[np.ndarray]


def kinematics(problem: Problem, theta: np.ndarray) -> Kinematics:
    qs = problem.unpack(theta)
    return Kinematics(theta, qs, problem.piece_points(qs))


# ---------------------------------------------------------------------------
# plane terms
# ---------------------------------------------------------------------------

def _pair_sides(problem: Problem, pair: Pair, plane: SeparatingPlane, X):
    dim = problem.dimension
    n = plane.normal[:dim]
    pa = problem.body_points(X, pair.a)
    pb = problem.body_points(X, pair.b)
    return pa, pb, pa @ n + plane.offset, -(pb @ n) - plane.offset


def pair_value(problem: Problem, pair: Pair, plane: SeparatingPlane, X) -> float:
    gamma, ghat = problem.gamma, 0.5 * problem.activation_distance
    _, _, ga, gb = _pair_sides(problem, pair, plane, X)
    va, _ = _bsum(ga, gamma, ghat, False)
    vb, _ = _bsum(gb, gamma, ghat, False)
    return va + vb


def pair_gradient(problem: Problem, pair: Pair, plane: SeparatingPlane, X):
    """Euclidean gradient of the pair's barrier terms in ``(n, d)``."""
    gamma, ghat = problem.gamma, 0.5 * problem.activation_distance
    pa, pb, ga, gb = _pair_sides(problem, pair, plane, X)
    va, da = _bsum(ga, gamma, ghat)
    vb, db = _bsum(gb, gamma, ghat)
    if not (math.isfinite(va) and math.isfinite(vb)):
        raise InfeasibleStateError(f"plane barrier argument nonpositive for pair {pair.key}")
    gn = np.zeros(3)
    gn[: problem.dimension] = da @ pa - db @ pb
    return gn, float(da.sum() - db.sum())


# ---------------------------------------------------------------------------
# theta block
# ---------------------------------------------------------------------------

def _limit_parts(problem: Problem, q, track, dt):
    V, A = track.limit_vectors(q)
    vn = np.sqrt((V * V).sum(1))
    an = np.sqrt((A * A).sum(1))
    gv = problem.v_max * dt - vn
    ga = problem.a_max * dt * dt - an
    return V, A, vn, an, gv, ga


def theta_terms(problem: Problem, state: LagrangianState, theta=None, dt=None, kin=None) -> float:
    """All Lagrangian terms that depend on ``(theta, dt)``; ``inf`` when infeasible."""
    if kin is None:
        kin = kinematics(problem, state.theta if theta is None else theta)
    dt = state.dt if dt is None else dt
    gamma = problem.gamma
    total = 0.0
    for pair, plane in state.planes.items():
        total += pair_value(problem, pair, plane, kin.X)
        if total == math.inf:
            return math.inf
    weight = problem.objective.weight
    for r, track in enumerate(problem.tracks):
        q, X = kin.qs[r], kin.X[r]
        if state.mode != "admm-full" and gamma > 0:
            _, _, _, _, gv, ga = _limit_parts(problem, q, track, dt)
            if (gv.size and gv.min() <= 0) or (ga.size and ga.min() <= 0):
                return math.inf
            total -= gamma * (float(np.log(gv).sum()) + float(np.log(ga).sum()))
        if state.mode == "am":
            total += weight * float(np.einsum("pid,ij,pjd->", X, problem.Q[r], X))
        else:
            R = X - state.xbar[r]
            total += 0.5 * state.rho * float((R * R).sum()) + float((state.lam[r] * R).sum())
            if state.mode == "admm":
                e = dt - state.dtbar[r]
                total += 0.5 * state.rho * float(e @ e) + float(state.Lam[r] @ e)
    if state.mode == "am":
        total += problem.objective.time_weight * dt
    return total


def theta_gradient(problem: Problem, state: LagrangianState, kin: Kinematics | None = None, dt=None):
    """Gradient of the Lagrangian in ``theta`` and ``dt`` (``dt`` part is 0 for admm-full)."""
    if kin is None:
        kin = kinematics(problem, state.theta)
    dt = state.dt if dt is None else dt
    gamma = problem.gamma
    G = [np.zeros_like(X) for X in kin.X]
    dim = problem.dimension
    for pair, plane in state.planes.items():
        pa, pb, ga, gb = _pair_sides(problem, pair, plane, kin.X)
        va, da = _bsum(ga, gamma, 0.5 * problem.activation_distance)
        vb, db = _bsum(gb, gamma, 0.5 * problem.activation_distance)
        if not (math.isfinite(va) and math.isfinite(vb)):
            raise InfeasibleStateError(f"plane barrier argument nonpositive for pair {pair.key}")
        n = plane.normal[:dim]
        r, i, b = pair.a
        G[r][i, problem.tracks[r].bodies[b]] += da[:, None] * n
        if not pair.is_obstacle:
            r, i, b = pair.b
            G[r][i, problem.tracks[r].bodies[b]] -= db[:, None] * n
    g_dt = 0.0
    weight = problem.objective.weight
    grads_q = []
    for r, track in enumerate(problem.tracks):
        q, X = kin.qs[r], kin.X[r]
        if state.mode == "am":
            G[r] += 2.0 * weight * np.einsum("ij,pjd->pid", problem.Q[r], X)
        else:
            G[r] += state.rho * (X - state.xbar[r]) + state.lam[r]
            if state.mode == "admm":
                g_dt += float((state.rho * (dt - state.dtbar[r]) + state.Lam[r]).sum())
        gq = track.pullback(q, G[r])
        if state.mode != "admm-full" and gamma > 0:
            V, A, vn, an, gv, ga = _limit_parts(problem, q, track, dt)
            if (gv.size and gv.min() <= 0) or (ga.size and ga.min() <= 0):
                raise InfeasibleStateError(f"limit barrier argument nonpositive on robot {track.name!r}")
            sv = np.where(vn > 0, gamma / (np.where(vn > 0, vn, 1.0) * gv), 0.0)
            sa = np.where(an > 0, gamma / (np.where(an > 0, an, 1.0) * ga), 0.0)
            gq = gq + track.pull_limits(q, sv[:, None] * V, sa[:, None] * A)
            g_dt -= gamma * float((problem.v_max / gv).sum() + (2 * problem.a_max * dt / ga).sum())
        grads_q.append(gq)
    if state.mode == "am":
        g_dt += problem.objective.time_weight
    return problem.pack(grads_q), g_dt


# ---------------------------------------------------------------------------
# slack block
# ---------------------------------------------------------------------------

def objective_gradient(problem: Problem, xbar):
    """``grad O`` of the per-piece smoothness term for each track."""
    return [2.0 * problem.objective.weight * np.einsum("ij,pjd->pid", Q, X) for Q, X in zip(problem.Q, xbar)]


def slack_terms(problem: Problem, state: LagrangianState) -> float:
    if state.mode == "am":
        return 0.0
    if state.mode == "admm-full":
        return reduced_lagrangian_terms(state.xbar, problem)[0]
    weight = problem.objective.weight
    share = problem.objective.time_weight / problem.n_pieces_total
    total = 0.0
    for r, X in enumerate(state.xbar):
        total += weight * float(np.einsum("pid,ij,pjd->", X, problem.Q[r], X))
        total += share * float(state.dtbar[r].sum())
    return total


def slack_gradient(problem: Problem, state: LagrangianState, kin: Kinematics | None = None):
    """Gradients in ``Xbar`` (per track) and ``dtbar`` (``None`` for admm-full)."""
    if kin is None:
        kin = kinematics(problem, state.theta)
    if state.mode == "admm-full":
        gO = reduced_lagrangian_terms(state.xbar, problem)[1]
    else:
        gO = objective_gradient(problem, state.xbar)
    gX = [g - state.rho * (X - Xb) - lam for g, X, Xb, lam in zip(gO, kin.X, state.xbar, state.lam)]
    if state.mode != "admm":
        return gX, None
    share = problem.objective.time_weight / problem.n_pieces_total
    gD = [share - state.rho * (state.dt - d) - L for d, L in zip(state.dtbar, state.Lam)]
    return gX, gD


# ---------------------------------------------------------------------------
# full Lagrangian
# ---------------------------------------------------------------------------

def eval_lagrangian(state: LagrangianState, problem: Problem, kin: Kinematics | None = None) -> float:
    value = theta_terms(problem, state, kin=kin)
    if not math.isfinite(value):
        raise InfeasibleStateError("a barrier argument is nonpositive")
    return value + slack_terms(problem, state)


def grad_lagrangian(state: LagrangianState, problem: Problem, block: str, kin: Kinematics | None = None):
    """Analytic gradient of one block.

    ``theta`` and ``dt`` return arrays/floats; ``xbar`` and ``dtbar`` return
    per-track lists; ``plane`` returns ``{pair: (tangent_gradient, d_gradient)}``
    with the normal part projected onto the tangent space at ``n``.
    """
    if kin is None:
        kin = kinematics(problem, state.theta)
    if block == "theta":
        return theta_gradient(problem, state, kin)[0]
    if block == "dt":
        return theta_gradient(problem, state, kin)[1]
    if block in ("xbar", "dtbar"):
        if state.mode == "am":
            raise ValueError("no slack variables in am mode")
        gX, gD = slack_gradient(problem, state, kin)
        return gX if block == "xbar" else gD
    if block == "plane":
        out = {}
        for pair, plane in state.planes.items():
            gn, gd = pair_gradient(problem, pair, plane, kin.X)
            out[pair] = (tangent_project(plane.normal, gn), gd)
        return out
    raise ValueError(f"unknown block {block!r}")


# ---------------------------------------------------------------------------
# activation
# ---------------------------------------------------------------------------

def pair_distances(problem: Problem, X, pairs=None, cutoff: float | None = None) -> np.ndarray:
    """Hull distance for every pair.

    With ``cutoff`` set, pairs whose bounding spheres are already farther
    apart than ``cutoff`` get that sphere lower bound instead of an exact GJK
    distance (an all-pairs distance filter).
    """
    pairs = problem.pairs if pairs is None else pairs
    out = np.empty(len(pairs))
    for k, pair in enumerate(pairs):
        pa = problem.body_points(X, pair.a)
        pb = problem.body_points(X, pair.b)
        if cutoff is not None:
            ca, cb = pa.mean(0), pb.mean(0)
            ra = np.sqrt(((pa - ca) ** 2).sum(1)).max()
            rb = np.sqrt(((pb - cb) ** 2).sum(1)).max()
            lb = float(np.sqrt(((ca - cb) ** 2).sum())) - ra - rb
            if lb >= cutoff:
                out[k] = lb
                continue
        out[k] = gjk_distance(pa, pb).distance
    return out


def refresh_planes(problem: Problem, planes: dict, X, distances=None):
    """Active set = pairs closer than the activation distance.

    Existing planes are kept; newly active pairs get a GJK midpoint plane.
    Returns the new ``{pair: plane}`` mapping (in canonical pair order), the
    distance array and the number of newly created planes.
    """
    if distances is None:
        distances = pair_distances(problem, X, cutoff=problem.activation_distance)
    new = {}
    created = 0
    for pair, dist in zip(problem.pairs, distances):
        if dist >= problem.activation_distance:
            continue
        plane = planes.get(pair)
        if plane is None:
            plane = plane_from_gjk(problem.body_points(X, pair.a), problem.body_points(X, pair.b))
            created += 1
        new[pair] = plane
    return new, distances, created


def active_pairs(problem: Problem, state: LagrangianState, kin: Kinematics | None = None):
    """``[(pair, plane)]`` for every pair closer than the activation distance."""
    if kin is None:
        kin = kinematics(problem, state.theta)
    planes, _, _ = refresh_planes(problem, state.planes, kin.X)
    return list(planes.items())
