"""Command-line driver: ``trajadmm solve|check|demo``.

Exit status: 0 converged (or audit passed), 2 iteration cap, 3 stalled line
search, 4 failed audit, 1 bad input.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .audit import gradient_audit
from .export import export_results
from .geometry import InfeasibleStateError
from .scene import DEMOS, RunConfig, SceneError, demo_scene, dumps_scene, load_scene, validate_scene
from .solvers import AdmmParams, AuditViolation, SolverOptions, run_admm, run_am
from .solvers.admm import default_params

EXIT_OK, EXIT_INPUT, EXIT_CAP, EXIT_STALL, EXIT_AUDIT = 0, 1, 2, 3, 4
STATUS_EXIT = {"converged": EXIT_OK, "max_iters": EXIT_CAP, "stalled": EXIT_STALL}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# flag -> RunConfig field
FLAGS = {
    "algorithm": "algorithm",
    "max_iters": "max_iters",
    "gamma": "gamma",
    "rho": "rho",
    "beta": "beta",
    "w": "w",
    "vmax": "v_max",
    "amax": "a_max",
    "epsilon": "epsilon",
    "tol": "tol",
    "seed": "seed",
    "threads": "threads",
    "out": "out",
    "history": "history",
    "svg": "svg",
}


def _add_run_flags(p):
    p.add_argument("scene", help="scene file (JSON)")
    p.add_argument("--algorithm", choices=["am", "admm", "admm-full"])
    p.add_argument("--max-iters", type=int)
    p.add_argument("--gamma", type=float, help="barrier weight")
    p.add_argument("--rho", type=float, help="ADMM penalty (default: from the objective's Lipschitz constant)")
    p.add_argument("--beta", type=float, help="proximal weight (default: equal to rho)")
    p.add_argument("--w", type=float, help="time weight")
    p.add_argument("--vmax", type=float)
    p.add_argument("--amax", type=float)
    p.add_argument("--epsilon", type=float, help="norm regularization of the time subproblem")
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="trajectory output file")
    p.add_argument("--history", help="convergence history file (timings go to <history>.timing)")
    p.add_argument("--svg", help="SVG plot of a 2D scene")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trajadmm", description="Collision-free trajectory optimization by barrier ADMM.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    solve = sub.add_parser("solve", help="optimize a scene")
    _add_run_flags(solve)
    check = sub.add_parser("check", help="gradient and monotonicity audits on a scene")
    _add_run_flags(check)
    check.add_argument("--samples", type=int, default=20, help="random states per mode")
    check.add_argument("--iters", type=int, default=200, help="iterations of each audited solver run")
    demo = sub.add_parser("demo", help="write the built-in scenes")
    demo.add_argument("name", nargs="?", default="all", choices=sorted(DEMOS) + ["all"])
    demo.add_argument("--out", help="directory for the scene files (default: print a single scene)")
    return parser


def _config(args, scene) -> RunConfig:
    overrides = {field: getattr(args, flag) for flag, field in FLAGS.items() if hasattr(args, flag)}
    return RunConfig.resolve(scene, overrides)


def _admm_params(problem, config: RunConfig):
    if config.rho is None and config.beta is None:
        return default_params(problem, config.algorithm)
    rho = config.rho if config.rho is not None else config.beta
    beta = config.beta if config.beta is not None else rho
    return AdmmParams(rho, beta, beta / 4.0, problem.lipschitz_objective())


def _run(problem, config: RunConfig, options: SolverOptions):
    if config.algorithm == "am":
        return run_am(problem, options)
    return run_admm(problem, config.algorithm, options, _admm_params(problem, config))


def cmd_solve(args) -> int:
    scene = load_scene(args.scene, validate=False)
    config = _config(args, scene)
    problem = validate_scene(scene, config)
    options = SolverOptions(max_iters=config.max_iters, tol=config.tol, threads=config.threads, fast_planes=config.fast_planes)
    solution, record = _run(problem, config, options)
    meta = {"algorithm": config.algorithm, "seed": config.seed, "scene": scene.name or Path(args.scene).stem}
    export_results(solution, record, config.out, config.history, config.svg, meta)
    lengths = ", ".join(f"{t.name}={v:.6g}" for t, v in zip(problem.tracks, solution.lengths()))
    print(
        f"{config.algorithm}: {solution.status} after {solution.iterations} iterations; "
        f"L={record.rows['lagrangian'][-1]:.10g} dt={solution.state.dt:.6g} lengths {lengths}"
    )
    if record.violations:
        print(f"warning: {len(record.violations)} audit violations; first: {record.violations[0]}", file=sys.stderr)
    return STATUS_EXIT[solution.status]


def cmd_check(args) -> int:
    scene = load_scene(args.scene, validate=False)
    config = _config(args, scene)
    problem = validate_scene(scene, config)
    rng = np.random.default_rng(config.seed)
    rows = gradient_audit(problem, rng, args.samples)
    failed = [r for r in rows if not r.ok]
    print(f"gradient audit: {len(rows) - len(failed)}/{len(rows)} blocks within tolerance")
    for r in failed[:10]:
        print(f"  FAIL {r.mode} {r.block}: error {r.error:.3g} vs scale {r.scale:.3g}")
    ok = not failed
    algorithms = ["am", "admm"] + (["admm-full"] if all(t.stencil is not None for t in problem.tracks) else [])
    for alg in algorithms:
        options = SolverOptions(max_iters=args.iters, tol=config.tol, diagnostic=True, threads=config.threads)
        cfg = RunConfig(**{**config.to_dict(), "algorithm": alg})
        try:
            solution, record = _run(problem, cfg, options)
            print(f"monotonicity audit {alg}: ok ({solution.iterations} iterations, {solution.status})")
        except AuditViolation as exc:
            # the fully decoupled Lyapunov check is informative only
            print(f"monotonicity audit {alg}: {'warning' if alg == 'admm-full' else 'FAIL'}: {exc}")
            ok = ok and alg == "admm-full"
    return EXIT_OK if ok else EXIT_AUDIT


def cmd_demo(args) -> int:
    names = sorted(DEMOS) if args.name == "all" else [args.name]
    if args.out is None:
        if len(names) != 1:
            print("demo: give --out DIR to write several scenes", file=sys.stderr)
            return EXIT_INPUT
        sys.stdout.write(dumps_scene(demo_scene(names[0])))
        return EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in names:
        path = out / f"{name}.json"
        path.write_text(dumps_scene(demo_scene(name)))
        print(path)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "check": cmd_check, "demo": cmd_demo}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (SceneError, InfeasibleStateError, OSError, ValueError) as exc:
        print(f"trajadmm: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
