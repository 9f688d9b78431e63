"""Scene files, run configuration and the built-in demo scenes.

Scenes are JSON documents with a format tag and version::

    {"format": "trajadmm-scene", "version": 1, "dimension": 2,
     "obstacles": [[[x, y], ...], ...],
     "robots": [{"name": "r0", "kind": "point", "representation": "bezier",
                 "degree": 5, "initial": [[x, y], ...]}],
     "limits": {"v_max": 2.0, "a_max": 2.0},
     "objective": {"kind": "length", "weight": 1.0},
     "solver": {"w": 1.0}}

``initial`` holds control points (Bezier), waypoints (piecewise-linear
point robots) or joint configurations (arms); its first and last rows are the
fixed start and goal.  ``solver`` carries per-scene overrides of
:class:`RunConfig` fields.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .curves import CompositeBezier
from .geometry import InfeasibleStateError
from .kinematics import ARM, POINT, RobotModel
from .problem import ObjectiveSpec, Problem, make_track

__all__ = [
    "SceneError",
    "RobotSpec",
    "SceneFile",
    "RunConfig",
    "load_scene",
    "save_scene",
    "parse_scene",
    "demo_scene",
    "DEMOS",
]

SCENE_FORMAT = "trajadmm-scene"
SCENE_VERSION = 1
ALGORITHMS = ("am", "admm", "admm-full")


class SceneError(ValueError):
    """Malformed or infeasible scene."""


@dataclass
class RobotSpec:
    name: str
    model: RobotModel
    representation: str
    initial: np.ndarray
    degree: int = 5

    @property
    def pieces(self) -> int:
        if self.representation == "bezier":
            return (self.initial.shape[0] - 1 - self.degree) // (self.degree - 2) + 1
        return self.initial.shape[0] - 1


@dataclass
class SceneFile:
    dimension: int
    obstacles: list[np.ndarray]
    robots: list[RobotSpec]
    v_max: float | None = None
    a_max: float | None = None
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    solver: dict = field(default_factory=dict)
    name: str = ""

    @property
    def has_arms(self) -> bool:
        return any(r.model.kind == ARM for r in self.robots)

    def to_dict(self) -> dict:
        robots = []
        for r in self.robots:
            d = {"name": r.name, "kind": r.model.kind, "representation": r.representation}
            if r.representation == "bezier":
                d["degree"] = r.degree
            if r.model.kind == ARM:
                d["link_lengths"] = list(r.model.link_lengths)
                d["link_half_width"] = r.model.link_half_width
                d["base"] = list(r.model.base)
                d["base_angle"] = r.model.base_angle
            d["initial"] = r.initial.tolist()
            robots.append(d)
        out = {
            "format": SCENE_FORMAT,
            "version": SCENE_VERSION,
            "name": self.name,
            "dimension": self.dimension,
            "obstacles": [o.tolist() for o in self.obstacles],
            "robots": robots,
            "objective": {"kind": self.objective.kind, "weight": self.objective.weight},
            "solver": dict(self.solver),
        }
        limits = {k: v for k, v in (("v_max", self.v_max), ("a_max", self.a_max)) if v is not None}
        if limits:
            out["limits"] = limits
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SceneFile":
        if not isinstance(data, dict) or data.get("format") != SCENE_FORMAT:
            raise SceneError(f"not a scene file (expected format {SCENE_FORMAT!r})")
        if data.get("version") != SCENE_VERSION:
            raise SceneError(f"unsupported scene version {data.get('version')!r}")
        try:
            dim = int(data["dimension"])
            obstacles = [np.asarray(o, float).reshape(len(o), dim) for o in data.get("obstacles", [])]
            robots = [_robot_from_dict(r, dim, k) for k, r in enumerate(data["robots"])]
            obj = data.get("objective", {})
            objective = ObjectiveSpec(obj.get("kind", "length"), float(obj.get("weight", 1.0)))
            limits = data.get("limits", {})
            solver = dict(data.get("solver", {}))
        except SceneError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"invalid scene: {exc}") from exc
        unknown = set(solver) - set(RunConfig.overridable())
        if unknown:
            raise SceneError(f"unknown solver settings: {sorted(unknown)}")
        if not robots:
            raise SceneError("scene has no robots")
        return cls(
            dim,
            obstacles,
            robots,
            limits.get("v_max"),
            limits.get("a_max"),
            objective,
            solver,
            str(data.get("name", "")),
        )

    def build_problem(self, config: "RunConfig") -> Problem:
        tracks = []
        for r in self.robots:
            try:
                tracks.append(make_track(r.name, r.model, r.representation, r.initial, r.degree))
            except ValueError as exc:
                raise SceneError(f"robot {r.name!r}: {exc}") from exc
        objective = ObjectiveSpec(self.objective.kind, self.objective.weight, config.w)
        try:
            return Problem(
                tracks,
                list(self.obstacles),
                objective,
                gamma=config.gamma,
                v_max=config.v_max,
                a_max=config.a_max,
                activation_distance=config.activation_distance,
                clearance=config.clearance,
                epsilon=config.epsilon,
            )
        except ValueError as exc:
            raise SceneError(str(exc)) from exc


def _robot_from_dict(d: dict, dim: int, k: int) -> RobotSpec:
    name = str(d.get("name", f"robot{k}"))
    kind = d.get("kind", POINT)
    if kind == ARM:
        model = RobotModel(
            ARM,
            tuple(d["link_lengths"]),
            float(d.get("link_half_width", 0.0)),
            tuple(d.get("base", (0.0, 0.0))),
            float(d.get("base_angle", 0.0)),
            dim,
        )
        rep = d.get("representation", "piecewise-linear")
    elif kind == POINT:
        model = RobotModel(POINT, dimension=dim)
        rep = d.get("representation", "bezier")
    else:
        raise SceneError(f"robot {name!r}: unknown kind {kind!r}")
    initial = np.asarray(d["initial"], float)
    if initial.ndim != 2 or initial.shape[1] != model.dof:
        raise SceneError(f"robot {name!r}: initial trajectory must have {model.dof} columns")
    return RobotSpec(name, model, rep, initial, int(d.get("degree", 5)))


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

POINT_DEFAULTS = dict(v_max=2.0, a_max=2.0, activation_distance=0.1, clearance=0.01, tol=1e-2)
ARM_DEFAULTS = dict(v_max=0.1, a_max=0.1, activation_distance=0.04, clearance=1e-3, tol=1e-1)


@dataclass
class RunConfig:
    """Solver settings; precedence is command line over scene over defaults."""

    algorithm: str = "admm"
    gamma: float = 10.0
    rho: float | None = None
    beta: float | None = None
    w: float = 1e8
    epsilon: float = 1e-4
    v_max: float = 2.0
    a_max: float = 2.0
    activation_distance: float = 0.1
    clearance: float = 0.01
    tol: float = 1e-2
    max_iters: int = 5000
    seed: int = 0
    threads: int = 1
    fast_planes: bool = True
    out: str | None = None
    history: str | None = None
    svg: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise SceneError(f"algorithm must be one of {ALGORITHMS}")
        if self.max_iters < 0 or self.threads < 1 or not self.tol > 0:
            raise SceneError("need max_iters >= 0, threads >= 1 and tol > 0")
        if not self.epsilon > 0:
            raise SceneError("epsilon must be positive")

    @staticmethod
    def overridable() -> tuple[str, ...]:
        skip = {"out", "history", "svg"}
        return tuple(f.name for f in fields(RunConfig) if f.name not in skip)

    @classmethod
    def resolve(cls, scene: SceneFile | None = None, overrides: dict | None = None) -> "RunConfig":
        values = {}
        if scene is not None:
            values.update(ARM_DEFAULTS if scene.has_arms else POINT_DEFAULTS)
            for key in ("v_max", "a_max"):
                if getattr(scene, key) is not None:
                    values[key] = getattr(scene, key)
            values.update(scene.solver)
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls(**values)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def parse_scene(text: str, source: str = "<string>", config: RunConfig | None = None, validate: bool = True) -> SceneFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    scene = SceneFile.from_dict(data)
    if validate:
        validate_scene(scene, config)
    return scene


def load_scene(path, config: RunConfig | None = None, validate: bool = True) -> SceneFile:
    """Read and validate a scene; feasibility is checked under ``config``
    (default: the scene's own resolved configuration)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SceneError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_scene(text, str(path), config, validate)


def save_scene(scene: SceneFile, path) -> None:
    Path(path).write_text(dumps_scene(scene))


def dumps_scene(scene: SceneFile) -> str:
    # repr() of a float is the shortest round-tripping form
    return json.dumps(scene.to_dict(), indent=1) + "\n"


def validate_scene(scene: SceneFile, config: RunConfig | None = None) -> Problem:
    """Build the problem and check the initial trajectory's feasibility."""
    from .solvers.engine import initial_state

    config = RunConfig.resolve(scene) if config is None else config
    problem = scene.build_problem(config)
    try:
        initial_state(problem, "am")
    except InfeasibleStateError as exc:
        raise SceneError(f"infeasible initial trajectory: {exc}") from exc
    return problem


# ---------------------------------------------------------------------------
# demo scenes
# ---------------------------------------------------------------------------

UNIT_BOX = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])


def _arc(x0, x1, height):
    x0, x1 = np.asarray(x0, float), np.asarray(x1, float)
    span = x1 - x0
    normal = np.array([-span[1], span[0]]) / np.linalg.norm(span)
    return lambda s: x0 + s * span + height * math.sin(math.pi * s) * normal


def box_scene(pieces: int = 4, height: float = 0.7) -> SceneFile:
    """Point robot detouring over a unit box, fitted Bezier arc as the initial guess."""
    path = lambda s: np.array([-2.0 * math.cos(math.pi * s), height * math.sin(math.pi * s)])
    cb = CompositeBezier.fit(path, pieces, 5)
    robot = RobotSpec("r0", RobotModel(POINT), "bezier", cb.control_points, 5)
    return SceneFile(2, [UNIT_BOX.copy()], [robot], 2.0, 2.0, ObjectiveSpec("length", 1.0), {"w": 1.0}, "box")


def uav_swap_scene(pieces: int = 4, height: float = 0.4) -> SceneFile:
    """Two point robots exchanging positions, one arcing each way."""
    a = CompositeBezier.fit(_arc((-1.0, 0.0), (1.0, 0.0), height), pieces, 5)
    b = CompositeBezier.fit(_arc((1.0, 0.0), (-1.0, 0.0), height), pieces, 5)
    robots = [
        RobotSpec("uav0", RobotModel(POINT), "bezier", a.control_points, 5),
        RobotSpec("uav1", RobotModel(POINT), "bezier", b.control_points, 5),
    ]
    return SceneFile(2, [], robots, 2.0, 2.0, ObjectiveSpec("length", 1.0), {"w": 1.0}, "uav-swap")


def two_link_ik(base, lengths, target, elbow: int = 1) -> np.ndarray:
    """Joint angles placing a two-link arm's tip at ``target``."""
    l1, l2 = lengths
    dx, dy = np.asarray(target, float) - np.asarray(base, float)
    r2 = dx * dx + dy * dy
    c2 = (r2 - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    if not -1.0 <= c2 <= 1.0:
        raise ValueError("target out of reach")
    q2 = elbow * math.acos(c2)
    q1 = math.atan2(dy, dx) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
    return np.array([q1, q2])


def arms_scene(waypoints: int = 9) -> SceneFile:
    """Two planar two-link arms swapping end-effector positions."""
    lengths = (0.3, 0.25)
    hw = 0.02
    base_a, base_b = (-0.35, 0.0), (0.35, 0.0)
    top, bottom = np.array([0.0, 0.4]), np.array([0.0, -0.4])
    s = np.linspace(0.0, 1.0, waypoints)
    # tip paths bulge toward each arm's own base
    tip_a = [top + t * (bottom - top) + np.array([-0.2 * math.sin(math.pi * t), 0.0]) for t in s]
    tip_b = [bottom + t * (top - bottom) + np.array([0.2 * math.sin(math.pi * t), 0.0]) for t in s]
    qa = np.array([two_link_ik(base_a, lengths, p, elbow=-1) for p in tip_a])
    qb = np.array([two_link_ik(base_b, lengths, p, elbow=-1) for p in tip_b])
    robots = [
        RobotSpec("arm0", RobotModel(ARM, lengths, hw, base_a), "piecewise-linear", np.unwrap(qa, axis=0)),
        RobotSpec("arm1", RobotModel(ARM, lengths, hw, base_b), "piecewise-linear", np.unwrap(qb, axis=0)),
    ]
    return SceneFile(2, [], robots, 0.1, 0.1, ObjectiveSpec("length", 1.0), {"w": 1.0}, "arms")


DEMOS = {"box": box_scene, "uav-swap": uav_swap_scene, "arms": arms_scene}


def demo_scene(name: str) -> SceneFile:
    try:
        return DEMOS[name]()
    except KeyError:
        raise SceneError(f"unknown demo {name!r}; choose from {sorted(DEMOS)}") from None
