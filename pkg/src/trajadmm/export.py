"""Result files: trajectory, convergence history, timings and SVG plots.

All text formats are line oriented, start with a versioned header and write
floats with 17 significant digits so a reload reproduces them exactly.  The
history holds no wall-clock data, which keeps reruns byte-identical; timings
go to a separate file.
"""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .kinematics import ARM, forward_kinematics, joint_positions
from .lagrangian import kinematics
from .solvers.diagnostics import HISTORY_COLUMNS, ConvergenceRecord

__all__ = [
    "export_results",
    "write_trajectory",
    "read_trajectory",
    "write_history",
    "read_history",
    "write_timing",
    "write_svg",
]

TRAJECTORY_HEADER = "# trajadmm-trajectory 1"
HISTORY_HEADER = "# trajadmm-history 1"
TIMING_HEADER = "# trajadmm-timing 1"


def _num(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _open(path):
    path = Path(path)
    try:
        return path.open("w")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_trajectory(solution, path, algorithm: str = "") -> None:
    problem = solution.problem
    with _open(path) as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        fh.write(f"algorithm {algorithm or solution.state.mode}\n")
        fh.write(f"status {solution.status}\n")
        fh.write(f"iterations {solution.iterations}\n")
        fh.write(f"dt {_num(solution.state.dt)}\n")
        for t, q in zip(problem.tracks, solution.configurations()):
            degree = t.degree if t.stencil is not None else 1
            fh.write(f"robot {t.name} {t.model.kind} {t.representation} {degree} {q.shape[0]} {q.shape[1]}\n")
            for row in q:
                fh.write(" ".join(_num(v) for v in row) + "\n")


def read_trajectory(path) -> dict:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != TRAJECTORY_HEADER:
        raise ValueError(f"{path}: not a trajectory file")
    out = {"robots": []}
    k = 1
    while k < len(lines):
        head, *rest = lines[k].split()
        if head == "robot":
            name, kind, rep, degree, rows, cols = rest
            rows, cols = int(rows), int(cols)
            q = np.array([[float(v) for v in lines[k + 1 + j].split()] for j in range(rows)]).reshape(rows, cols)
            out["robots"].append({"name": name, "kind": kind, "representation": rep, "degree": int(degree), "points": q})
            k += rows + 1
            continue
        out[head] = float(rest[0]) if head == "dt" else (int(rest[0]) if head == "iterations" else rest[0])
        k += 1
    return out


def write_history(record: ConvergenceRecord, path, meta: dict | None = None) -> None:
    with _open(path) as fh:
        fh.write(HISTORY_HEADER + "\n")
        for key, value in sorted((meta or {}).items()):
            fh.write(f"# {key} {value}\n")
        fh.write(" ".join(HISTORY_COLUMNS) + "\n")
        for k in range(len(record)):
            fh.write(" ".join(_num(record.rows[c][k]) for c in HISTORY_COLUMNS) + "\n")


def read_history(path) -> dict[str, np.ndarray]:
    lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
    cols = lines[0].split()
    data = np.array([[float(v) for v in l.split()] for l in lines[1:]]).reshape(-1, len(cols))
    return {c: data[:, j] for j, c in enumerate(cols)}


def write_timing(record: ConvergenceRecord, path) -> None:
    stages = sorted(record.stage_time)
    with _open(path) as fh:
        fh.write(TIMING_HEADER + "\n")
        fh.write("iteration wall " + " ".join(stages) + "\n")
        for k, wall in enumerate(record.wall_time):
            parts = [_num(record.stage_time[s][k - 1]) if k > 0 else "0" for s in stages]
            fh.write(f"{k} {_num(wall)} " + " ".join(parts) + "\n")


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

def _robot_polylines(problem, q, track):
    """Drawable paths of one robot: tip path, plus link outlines for arms."""
    if track.model.kind == ARM:
        tips = np.array([joint_positions(track.model, qi)[-1] for qi in q])
        outlines = [forward_kinematics(track.model, qi) for qi in (q[0], q[len(q) // 2], q[-1])]
        return tips, outlines
    if track.stencil is not None:
        from .curves import CompositeBezier

        return CompositeBezier(q, track.degree).sample(32), []
    return q, []


def write_svg(solution, path, initial_configurations=None, size: int = 480) -> None:
    """Obstacles, initial (dashed) and optimized trajectories and active planes."""
    problem = solution.problem
    if problem.dimension != 2:
        raise ValueError("SVG export supports 2D scenes only")
    final = solution.configurations()
    initial = initial_configurations if initial_configurations is not None else [t.q0 for t in problem.tracks]
    drawn = []
    for t, qi, qf in zip(problem.tracks, initial, final):
        drawn.append(_robot_polylines(problem, qi, t))
        drawn.append(_robot_polylines(problem, qf, t))
    pts = [p for p, outl in drawn] + [o for _, outl in drawn for o in outl] + list(problem.obstacles)
    allp = np.vstack(pts)
    lo, hi = allp.min(0), allp.max(0)
    span = float(max(hi - lo)) or 1.0
    lo = lo - 0.1 * span
    span *= 1.2
    scale = size / span

    def xy(p):
        return f"{(p[0] - lo[0]) * scale:.3f},{size - (p[1] - lo[1]) * scale:.3f}"

    def poly(points, closed, style):
        tag = "polygon" if closed else "polyline"
        return f'<{tag} points="{" ".join(xy(p) for p in points)}" style="{style}"/>'

    body = []
    for o in problem.obstacles:
        body.append(poly(_hull_order(o), True, "fill:#bbbbbb;stroke:#555555"))
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    for r, t in enumerate(problem.tracks):
        c = colors[r % len(colors)]
        (pi, _), (pf, of) = drawn[2 * r], drawn[2 * r + 1]
        body.append(poly(pi, False, f"fill:none;stroke:{c};stroke-dasharray:4 3;stroke-width:1"))
        body.append(poly(pf, False, f"fill:none;stroke:{c};stroke-width:2"))
        for o in of:
            for l in range(0, len(o), 4):
                body.append(poly(o[l:l + 4], True, f"fill:none;stroke:{c};stroke-width:1"))
    X = kinematics(problem, solution.state.theta).X
    for pair, plane in solution.state.planes.items():
        n = plane.normal[:2]
        mid = 0.5 * (problem.body_points(X, pair.a).mean(0) + problem.body_points(X, pair.b).mean(0))
        foot = mid - (mid @ n + plane.offset) * n
        tang = np.array([-n[1], n[0]]) * 0.15 * span
        body.append(poly([foot - tang, foot + tang], False, "fill:none;stroke:#ff7f0e;stroke-width:1"))
    title = escape(f"{solution.state.mode} {solution.status} after {solution.iterations} iterations")
    with _open(path) as fh:
        fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">\n')
        fh.write(f"<title>{title}</title>\n")
        fh.write('<rect width="100%" height="100%" fill="white"/>\n')
        for line in body:
            fh.write(line + "\n")
        fh.write("</svg>\n")


def _hull_order(points):
    c = points.mean(0)
    ang = np.arctan2(points[:, 1] - c[1], points[:, 0] - c[0])
    return points[np.argsort(ang)]


def export_results(solution, record: ConvergenceRecord, out=None, history=None, svg=None, meta=None, initial=None):
    """Write whichever of trajectory / history (+ timing) / SVG paths are given."""
    written = []
    if out:
        write_trajectory(solution, out)
        written.append(out)
    if history:
        write_history(record, history, meta)
        timing = str(history) + ".timing"
        write_timing(record, timing)
        written += [history, timing]
    if svg:
        write_svg(solution, svg, initial)
        written.append(svg)
    return written
