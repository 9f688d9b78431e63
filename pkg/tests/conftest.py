import numpy as np
import pytest

from trajadmm.kinematics import POINT, RobotModel
from trajadmm.problem import ObjectiveSpec, Problem, make_track
from trajadmm.scene import RunConfig, demo_scene, validate_scene


def box(x0, x1, y0, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], float)


def point_problem(waypoints, obstacles=(), representation="piecewise-linear", **kw):
    """Single point robot; keyword arguments override the problem parameters."""
    params = dict(gamma=10.0, v_max=2.0, a_max=2.0, activation_distance=0.1, clearance=0.01)
    objective = kw.pop("objective", ObjectiveSpec("length", 1.0, 1.0))
    params.update(kw)
    track = make_track("r0", RobotModel(POINT), representation, np.asarray(waypoints, float))
    return Problem([track], [np.asarray(o, float) for o in obstacles], objective, **params)


def demo_problem(name, **overrides):
    scene = demo_scene(name)
    return validate_scene(scene, RunConfig.resolve(scene, overrides))


@pytest.fixture(scope="session")
def box_problem():
    return demo_problem("box")


@pytest.fixture(scope="session")
def uav_problem():
    return demo_problem("uav-swap")


@pytest.fixture(scope="session")
def arms_problem():
    return demo_problem("arms")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in mod.TITLES.items():
        ok, detail = mod.RESULTS.get(n, (False, "not run"))
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}")
