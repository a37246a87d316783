"""Command line entry point: ``wbplan {plan,bench,validate,ik}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from wbplan import _textfmt as tf
from wbplan import bench
from wbplan.collision import check_collision, is_state_valid
from wbplan.kinematics import Transform, fk
from wbplan.model import load_trajectory, save_trajectory
from wbplan.rotations import matrix_to_rpy, rpy_to_matrix


def _select(cfg: bench.BenchConfig, args) -> bench.BenchConfig:
    if getattr(args, "task", None):
        cfg.tasks = [cfg.task(n) for n in args.task.split(",")]
    if getattr(args, "planner", None):
        wanted = args.planner.split(",")
        picked = [p for p in cfg.planners if p.label in wanted or p.planner in wanted]
        if not picked:
            raise bench.ConfigError(f"no planner matches '{args.planner}'")
        cfg.planners = picked
    if args.time_budget is not None:
        if not args.time_budget > 0.0:
            raise bench.ConfigError("--time-budget must be positive")
        cfg.time_budget = args.time_budget
    return cfg


def _cmd_plan(args) -> int:
    cfg = _select(bench.load_config(args.config), args)
    task, spec = cfg.tasks[0], cfg.planners[0]
    rec, res = bench.run_cell(cfg, task, spec, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    line = (f"{rec.task} {spec.label} seed={rec.seed}: {rec.status} in {rec.planning_time:.3f} s, "
            f"{rec.n_ik_calls} IK calls, {rec.n_evaluations} evaluations")
    print(line)
    if res is None or not res.solved:
        return 1
    path = out / bench.trajectory_name(rec)
    save_trajectory([s.config for s in res.path], path, bench._trajectory_meta(task, spec, rec))
    print(f"c_cost={rec.c_cost:.4f} w_cost={rec.w_cost:.4f} com_cost={rec.com_cost:.4f}")
    print(f"wrote {path}")
    return 0


def _cmd_bench(args) -> int:
    cfg = _select(bench.load_config(args.config), args)
    if args.seed is not None:
        cfg.seeds = tuple(range(args.seed, args.seed + len(cfg.seeds)))
    if args.seeds is not None:
        cfg.seeds = tuple(range(cfg.seeds[0], cfg.seeds[0] + args.seeds))
    n = len(cfg.tasks) * len(cfg.planners) * len(cfg.seeds)
    done = [0]

    def log(rec):
        done[0] += 1
        if not args.quiet:
            print(f"[{done[0]}/{n}] {rec.task} {rec.planner}-{rec.space} seed={rec.seed}: "
                  f"{rec.status} {rec.planning_time:.3f} s", flush=True)

    records = bench.run_benchmark(cfg, out=args.out, jobs=args.jobs, log=log)
    summary = bench.summarize(records)
    for key, cell in summary.items():
        t = cell["planning_time"]
        frac = cell["ik_fraction"]
        tt = f"{t['median']:.3f} s median" if t else "n/a"
        ff = f"{frac['mean']:.2f}" if frac else "n/a"
        print(f"{key}: solved {cell['solved']}/{cell['runs']}, time {tt}, ik fraction {ff}")
    print(f"wrote {Path(args.out) / 'records.csv'}")
    return 0


def _validate_one(cfg: bench.BenchConfig, path: Path, resolution: float | None, verbose: bool) -> int:
    traj, meta = load_trajectory(path, with_meta=True)
    task = cfg.task(meta.get("task", cfg.tasks[0].name))
    kind = meta.get("space", "cspace")
    frames = tuple(meta.get("frames", "").split())
    solver = cfg.solver if resolution is None else replace(cfg.solver, resolution=resolution)
    space = bench.make_space(task, kind, 0, solver, frames)
    model, scene, balance, _ = task.load()
    states = [space.state_from_config(q) for q in traj]
    bad = 0
    for k, (q, s) in enumerate(zip(traj, states)):
        ok = is_state_valid(model, scene, q, balance)
        if not ok:
            bad += 1
            report = check_collision(model, scene, q)
            why = f"collision {report.first_contact}" if report.in_collision else "bounds or balance"
            print(f"{path.name}: waypoint {k} INVALID ({why})")
        elif verbose:
            print(f"{path.name}: waypoint {k} ok")
    for k, (a, b) in enumerate(zip(states, states[1:])):
        if not space.check_motion(a, b):
            bad += 1
            print(f"{path.name}: motion {k}->{k + 1} INVALID")
        elif verbose:
            print(f"{path.name}: motion {k}->{k + 1} ok")
    status = "valid" if bad == 0 else f"{bad} violations"
    print(f"{path.name}: {len(traj)} waypoints, {status}")
    return bad


def _cmd_validate(args) -> int:
    cfg = bench.load_config(args.config)
    files = []
    for p in args.trajectories:
        p = Path(p)
        files.extend(sorted(p.glob("traj_*.traj")) if p.is_dir() else [p])
    if not files:
        print("no trajectory files given", file=sys.stderr)
        return 2
    total = sum(_validate_one(cfg, f, args.resolution, args.verbose) for f in files)
    print(f"checked {len(files)} trajectories: {total} violations")
    return 0 if total == 0 else 1


def _cmd_ik(args) -> int:
    cfg = _select(bench.load_config(args.config), args)
    task = cfg.tasks[0]
    model, scene, balance, start = task.load()
    targets = list(task.goal_poses)
    if args.pose:
        frame, *vals = args.pose
        v = tf.parse_floats(" ".join(vals), 6, "--pose")
        targets = [(frame, Transform.from_matrix(rpy_to_matrix(v[3:]), v[:3]))]
    if not targets:
        print("task has no goal pose; pass --pose", file=sys.stderr)
        return 2
    try:
        q = bench.goal_from_pose(model, scene, targets, balance, start, seed=args.seed,
                                 budget=cfg.solver.goal_budget, options=cfg.solver.options,
                                 position_only=task.position_only)
    except bench.InvalidGoal as exc:
        print(f"invalid_goal: {exc}")
        return 1
    result = {"configuration": q.tolist(), "frames": {}}
    for frame, _ in targets:
        x = fk(model, q, frame)
        result["frames"][frame] = np.r_[x.translation, matrix_to_rpy(x.matrix)].tolist()
    print(json.dumps(result, indent=1))
    if args.out:
        out = Path(args.out)
        if out.suffix != ".traj":
            out.mkdir(parents=True, exist_ok=True)
            out = out / f"ik_{task.name}_{args.seed}.traj"
        save_trajectory([q], out, {"task": task.name, "space": "cspace"})
        print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wbplan", description="Balanced whole-body motion planning for a floating-base biped.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_default="out"):
        p.add_argument("--config", required=True, help="benchmark config file")
        p.add_argument("--task", help="task name(s), comma separated")
        p.add_argument("--planner", help="planner name or planner-space label(s)")
        p.add_argument("--time-budget", type=float, help="seconds per planning run")
        p.add_argument("--out", default=out_default, help="output directory")

    p = sub.add_parser("plan", help="single planning query; writes a trajectory file")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("bench", help="run a benchmark grid; writes records.csv and summary.json")
    common(p, "bench_out")
    p.add_argument("--seed", type=int, help="first seed (default: from config)")
    p.add_argument("--seeds", type=int, help="number of seeds (default: from config)")
    p.add_argument("--jobs", type=int, help="parallel worker processes")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("validate", help="revalidate trajectory files waypoint by waypoint")
    p.add_argument("--config", required=True)
    p.add_argument("trajectories", nargs="+", help="trajectory files or directories")
    p.add_argument("--resolution", type=float, help="motion check resolution (default: config)")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("ik", help="single whole-body IK query; prints the configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--task")
    p.add_argument("--pose", nargs=7, metavar=("FRAME", "X", "Y", "Z", "ROLL", "PITCH", "YAW"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory or .traj file for the configuration")
    p.set_defaults(func=_cmd_ik, time_budget=None, planner=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (bench.ConfigError, tf.ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
