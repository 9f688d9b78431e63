"""Independent reference computations used by the test-suite.

Nothing in here imports the package's geometry or solver internals; each
oracle recomputes its answer from first principles so a shared bug cannot
make both sides agree.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.spatial import ConvexHull as _QHull
from scipy.spatial import QhullError


def _point_segment(p, a, b):
    ab = b - a
    denom = ab @ ab
    t = 0.0 if denom == 0 else min(1.0, max(0.0, ((p - a) @ ab) / denom))
    return np.linalg.norm(p - (a + t * ab))


def _point_triangle(p, a, b, c):
    # Project onto the plane; inside test in barycentric coordinates, else
    # fall back to the three edges.
    n = np.cross(b - a, c - a)
    nn = n @ n
    if nn > 0:
        t = ((p - a) @ n) / nn
        q = p - t * n
        m = np.column_stack([b - a, c - a])
        uv, *_ = np.linalg.lstsq(m, q - a, rcond=None)
        if uv[0] >= 0 and uv[1] >= 0 and uv.sum() <= 1:
            return abs(t) * math.sqrt(nn)
    return min(_point_segment(p, a, b), _point_segment(p, b, c), _point_segment(p, a, c))


def minkowski_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Distance from the origin to conv(A - B), via the hull of all differences."""
    D = (A[:, None, :] - B[None, :, :]).reshape(-1, A.shape[1])
    origin = np.zeros(A.shape[1])
    try:
        hull = _QHull(D)
    except QhullError:
        return _degenerate_distance(D)
    eq = hull.equations
    if np.all(eq[:, -1] <= 1e-14):
        return 0.0
    best = math.inf
    for simplex in hull.simplices:
        pts = D[simplex]
        if len(pts) == 2:
            best = min(best, _point_segment(origin, pts[0], pts[1]))
        else:
            best = min(best, _point_triangle(origin, *pts))
    return best


def _degenerate_distance(D):
    best = math.inf
    origin = np.zeros(D.shape[1])
    for i in range(len(D)):
        for j in range(i, len(D)):
            best = min(best, _point_segment(origin, D[i], D[j]))
    return best


def golden_section(f, lo, hi, tol=1e-15, max_iter=500):
    """Minimize a unimodal scalar function on ``[lo, hi]``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def central_diff(f, x, h=1e-6):
    """Fourth-order central difference gradient of ``f`` at ``x``."""
    x = np.asarray(x, float)
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for k in range(flat.size):
        step = h * max(1.0, abs(flat[k]))
        vals = []
        for s in (2, 1, -1, -2):
            xp = flat.copy()
            xp[k] += s * step
            vals.append(f(xp.reshape(x.shape)))
        gf[k] = (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * step)
    return g


def random_polygon(rng, center, radius, n_max=8, dim=2):
    n = int(rng.integers(1, n_max + 1))
    return center + radius * rng.uniform(-1, 1, size=(n, dim))


def _plane_barrier_ld(g, gamma, ghat):
    u = np.asarray(g, np.longdouble) / np.longdouble(ghat)
    if np.any(u <= 0):
        return None
    u = u[u < 1]
    return [-np.longdouble(gamma) * (x - 1) ** 2 * np.log(x) for x in u]


def lagrangian_ld(problem, state, qs, X) -> float:
    """Barrier / augmented Lagrangian re-summed term by term in long double.

    Works from raw arrays only: configurations ``qs``, piece points ``X``, the
    per-piece matrices ``problem.Q`` and the limit difference vectors of each
    track.  Supports the ``am`` and ``admm`` modes.
    """
    L = np.longdouble
    terms = []
    gamma = problem.gamma
    ghat = 0.5 * problem.activation_distance
    dim = problem.dimension
    for pair, plane in state.planes.items():
        pa = np.asarray(problem.body_points(X, pair.a), L)
        pb = np.asarray(problem.body_points(X, pair.b), L)
        n = np.asarray(plane.normal[:dim], L)
        d = L(plane.offset)
        for g in (pa @ n + d, -(pb @ n) - d):
            part = _plane_barrier_ld(g, gamma, ghat)
            if part is None:
                return math.inf
            terms += part
    dt = L(state.dt)
    w = L(problem.objective.time_weight)
    wt = L(problem.objective.weight)
    P = problem.n_pieces_total
    for r, track in enumerate(problem.tracks):
        V, A = track.limit_vectors(qs[r])
        for v in np.asarray(V, L):
            terms.append(-L(gamma) * np.log(L(problem.v_max) * dt - np.sqrt((v * v).sum())))
        for a in np.asarray(A, L):
            terms.append(-L(gamma) * np.log(L(problem.a_max) * dt * dt - np.sqrt((a * a).sum())))
        Q = np.asarray(problem.Q[r], L)
        smooth = X[r] if state.mode == "am" else state.xbar[r]
        for Xi in np.asarray(smooth, L):
            for k in range(dim):
                terms.append(wt * (Xi[:, k] @ Q @ Xi[:, k]))
        if state.mode == "admm":
            R = np.asarray(X[r], L) - np.asarray(state.xbar[r], L)
            rho = L(state.rho)
            terms += list((rho / 2 * R * R).ravel()) + list((np.asarray(state.lam[r], L) * R).ravel())
            e = dt - np.asarray(state.dtbar[r], L)
            terms += list(rho / 2 * e * e) + list(np.asarray(state.Lam[r], L) * e)
            terms += [w / P * x for x in np.asarray(state.dtbar[r], L)]
    if state.mode == "am":
        terms.append(w * dt)
    terms.sort(key=abs)
    total = L(0)
    for t in terms:
        total += t
    return float(total)


def armijo_descent(f, grad, x0, iters, c=0.1, shrink=0.5):
    """Plain backtracking gradient descent; returns the value after every step."""
    x = np.array(x0, float)
    fx = f(x)
    values = [fx]
    for _ in range(iters):
        g = grad(x)
        gg = float(g @ g)
        if gg == 0.0:
            break
        a = 1.0
        while f(x - a * g) > fx - c * a * gg:
            a *= shrink
        x = x - a * g
        fx = f(x)
        values.append(fx)
    return np.array(values)


def composite_bezier_pieces(points, degree):
    """Bernstein control points of every piece of a C2 composite Bezier curve.

    Each later piece's first three points are rebuilt from the previous
    piece's last three by matching position, first and second derivative at
    the joint.
    """
    points = np.asarray(points, float)
    M = degree
    n = (len(points) - 3) // (M - 2)
    pieces = []
    for i in range(n):
        block = points[i * (M - 2): i * (M - 2) + M + 1].copy()
        if i:
            q3, q4, q5 = pieces[-1][-3:]
            block[0] = q5
            block[1] = 2 * q5 - q4
            block[2] = q3 - 4 * q4 + 4 * q5
        pieces.append(block)
    return pieces


def composite_bezier_length(points, degree):
    """Arc length by adaptive quadrature of the speed of every piece."""
    from scipy.integrate import quad
    from scipy.interpolate import BPoly

    total = 0.0
    for P in composite_bezier_pieces(points, degree):
        curve = BPoly(P[:, None, :], [0.0, 1.0]).derivative()
        speed = lambda s: float(np.linalg.norm(curve(s)))
        total += quad(speed, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return total


def composite_bezier_samples(points, degree, per_piece):
    """Dense samples ``(positions, speeds)`` of every piece, parameter step ``1/per_piece``."""
    from scipy.interpolate import BPoly

    s = np.linspace(0.0, 1.0, per_piece + 1)
    pos, speed = [], []
    for P in composite_bezier_pieces(points, degree):
        curve = BPoly(P[:, None, :], [0.0, 1.0])
        pos.append(curve(s))
        speed.append(np.linalg.norm(curve.derivative()(s), axis=1))
    return pos, speed


def box_distance(points, lo, hi):
    """Euclidean distance from each point to the axis-aligned box ``[lo, hi]``."""
    d = np.maximum(np.maximum(lo - points, points - hi), 0.0)
    return np.sqrt((d * d).sum(-1))


def dt_objective_ld(p):
    """Same 1D objective, evaluated independently in extended precision."""
    V = np.asarray(p.V, np.longdouble)
    A = np.asarray(p.A, np.longdouble)
    vn = np.sqrt((V * V).sum(1) + np.longdouble(p.epsilon))
    an = np.sqrt((A * A).sum(1) + np.longdouble(p.epsilon) ** 2)

    def f(dt):
        dt = np.longdouble(dt)
        gv = p.v_max * dt - vn
        ga = p.a_max * dt * dt - an
        if np.any(gv <= 0) or np.any(ga <= 0):
            return np.longdouble(np.inf)
        return p.w * dt - p.gamma * (np.log(gv).sum() + np.log(ga).sum())

    return f


def dt_stationarity_ld(p, sol) -> float:
    """|w - gamma (sum v/(v dt - |V~|) + sum 2 a dt/(a dt^2 - |A~|))| in long double."""
    V = np.asarray(p.V, np.longdouble)
    A = np.asarray(p.A, np.longdouble)
    vn = np.sqrt((V * V).sum(1) + np.longdouble(p.epsilon))
    an = np.sqrt((A * A).sum(1) + np.longdouble(p.epsilon) ** 2)
    dt = np.longdouble(p.dt_min) + np.longdouble(sol.gap)
    rhs = (p.v_max / (p.v_max * dt - vn)).sum() + (2 * p.a_max * dt / (p.a_max * dt * dt - an)).sum()
    return float(abs(p.w - p.gamma * rhs))
