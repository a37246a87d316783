"""Benchmark harness: task/planner grids, records, summaries and trajectories.

A benchmark config has ``[task]`` blocks (one per task), ``[planner]``
blocks (one per planner/space combination), an optional ``[solver]`` block
and a ``[bench]`` block.  Paths inside a config are relative to the config
file.  Every (task, planner, space, seed) cell gets its own space, RNG and
counters, so cells can run in any order or in parallel.

``records.csv`` holds only fields that are reproducible from the seeds;
wall-clock fields go to ``timings.csv`` and ``summary.json``.
"""

from __future__ import annotations

import csv
import io
import json
import platform
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from wbplan import _textfmt as tf
from wbplan import ik, kernels
from wbplan.balance import BalanceSpec
from wbplan.collision import is_state_valid
from wbplan.kinematics import Transform, fk
from wbplan.model import RobotModel, Scene, load_robot, load_scene, save_trajectory
from wbplan.planners import PLANNERS, GoalRegion, PlannerQuery, PlanResult, plan
from wbplan.rotations import rpy_to_matrix
from wbplan.spaces import ConfigurationSpace, EndEffectorSpace, MetaEndEffectorSpace

__all__ = [
    "ConfigError",
    "InvalidGoal",
    "TaskSpec",
    "PlannerSpec",
    "SolverSpec",
    "BenchConfig",
    "BenchRecord",
    "parse_config",
    "load_config",
    "make_space",
    "goal_from_pose",
    "run_cell",
    "run_benchmark",
    "summarize",
    "emit_report",
    "trajectory_name",
    "DATA_DIR",
]

DATA_DIR = Path(__file__).resolve().parent / "data"
SPACES = ("cspace", "eespace", "meta")


class ConfigError(ValueError):
    """Invalid benchmark configuration."""


class InvalidGoal(RuntimeError):
    """No balanced, collision-free configuration reaches the goal pose."""


# --------------------------------------------------------------- specs
@dataclass(eq=False)
class TaskSpec:
    name: str
    robot: Path
    scene: Path | None
    start_base: np.ndarray = field(default_factory=lambda: np.zeros(6))
    start_joints: dict = field(default_factory=dict)
    feet: tuple = ()
    com_margin: float = 0.0
    feet_pos_tol: float = 1e-3
    feet_rot_tol: float = 1e-2
    goal_poses: tuple = ()  # ((frame, Transform), ...)
    goal_config: np.ndarray | None = None
    goal_pos_tol: float = 0.02
    goal_rot_tol: float = 0.1
    position_only: bool = False
    base_translation: float = 0.5
    base_rotation: float = 0.5

    @property
    def frames(self) -> tuple[str, ...]:
        return tuple(f for f, _ in self.goal_poses)

    def load(self):
        """``(model, scene, balance, start)`` for this task (cached per process)."""
        key = id(self)
        hit = _TASK_CACHE.get(key)
        if hit is not None and hit[0] is self:
            return hit[1]
        model = _load_robot_cached(self.robot)
        scene = load_scene(self.scene) if self.scene is not None else Scene()
        start = model.zero_configuration()
        start[:6] = self.start_base
        names = {n: 6 + i for i, n in enumerate(model.joint_names)}
        for name, value in self.start_joints.items():
            if name not in names:
                raise ConfigError(f"task '{self.name}': unknown start joint '{name}'")
            start[names[name]] = value
        feet = self.feet or None
        balance = BalanceSpec.from_configuration(model, start, feet, com_margin=self.com_margin,
                                                 feet_pos_tol=self.feet_pos_tol, feet_rot_tol=self.feet_rot_tol)
        for f in self.frames:
            model.frame(f)
        if self.goal_config is not None and self.goal_config.shape != (model.dim,):
            raise ConfigError(f"task '{self.name}': goal_config needs {model.dim} values")
        out = (model, scene, balance, start)
        _TASK_CACHE[key] = (self, out)
        return out

    def goal_region(self) -> GoalRegion | None:
        if not self.goal_poses:
            return None
        return GoalRegion(self.frames, tuple(t for _, t in self.goal_poses), self.goal_pos_tol,
                          self.goal_rot_tol, self.position_only)


_TASK_CACHE: dict = {}
_ROBOT_CACHE: dict = {}


def _load_robot_cached(path) -> RobotModel:
    key = str(Path(path).resolve())
    if key not in _ROBOT_CACHE:
        _ROBOT_CACHE[key] = load_robot(path)
    return _ROBOT_CACHE[key]


@dataclass(frozen=True)
class PlannerSpec:
    planner: str
    space: str = "cspace"
    params: tuple = ()  # sorted (key, value) pairs
    frames: tuple = ()  # end-effector frames; default: the task's goal frames

    @property
    def label(self) -> str:
        return f"{self.planner}-{self.space}"


@dataclass(frozen=True)
class SolverSpec:
    options: ik.SolverOptions = field(default_factory=ik.SolverOptions)
    retry_budget: int = 100
    resolution: float = 0.05
    goal_budget: int = 50


@dataclass(eq=False)
class BenchConfig:
    tasks: list
    planners: list
    solver: SolverSpec = field(default_factory=SolverSpec)
    seeds: tuple = tuple(range(10))
    time_budget: float = 60.0
    max_iterations: int | None = None
    trajectories: bool = True
    jobs: int = 1
    source: Path | None = None

    def task(self, name: str) -> TaskSpec:
        for t in self.tasks:
            if t.name == name:
                return t
        raise ConfigError(f"unknown task '{name}'")


@dataclass
class BenchRecord:
    task: str
    planner: str
    space: str
    seed: int
    status: str
    planning_time: float = 0.0
    c_cost: float | None = None
    w_cost: float | None = None
    com_cost: float | None = None
    n_evaluations: int = 0
    n_ik_calls: int = 0
    ik_time: float = 0.0
    iterations: int = 0
    waypoints: int = 0

    @property
    def key(self):
        return (self.task, self.planner, self.space, self.seed)

    @property
    def ik_fraction(self) -> float | None:
        return self.ik_time / self.planning_time if self.planning_time > 0.0 else None


# ---------------------------------------------------------------- parsing
def _bool(raw: str, where: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got '{raw}'")


def _param(raw: str):
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def _path(raw: str, base: Path) -> Path:
    p = Path(raw)
    return p if p.is_absolute() else base / p


def _parse_task(sec: tf.Section, base: Path) -> TaskSpec:
    where = f"[task] at line {sec.line}"
    name = sec.require("name")
    robot = _path(sec.require("robot"), base)
    scene_raw = sec.get("scene")
    scene = _path(scene_raw, base) if scene_raw else None
    for p in (robot, scene):
        if p is not None and not p.exists():
            raise ConfigError(f"{where}: file not found: {p}")
    joints = {}
    for raw in sec.get_all("start_joint"):
        parts = raw.split()
        if len(parts) != 2:
            raise ConfigError(f"{where}: start_joint expects '<name> <value>'")
        joints[parts[0]] = float(parts[1])
    poses = []
    for raw in sec.get_all("goal_pose"):
        parts = raw.split()
        if len(parts) != 7:
            raise ConfigError(f"{where}: goal_pose expects '<frame> x y z roll pitch yaw'")
        v = tf.parse_floats(" ".join(parts[1:]), 6, where)
        poses.append((parts[0], Transform.from_matrix(rpy_to_matrix(v[3:]), v[:3])))
    goal_config = sec.floats("goal_config") if sec.get("goal_config") else None
    if not poses and goal_config is None:
        raise ConfigError(f"{where}: a goal_pose or goal_config is required")
    feet = tuple(sec.get("feet", "").split())
    return TaskSpec(
        name=name,
        robot=robot,
        scene=scene,
        start_base=sec.floats("start_base", 6, default=np.zeros(6)),
        start_joints=joints,
        feet=feet,
        com_margin=sec.float("com_margin", 0.0),
        feet_pos_tol=sec.float("feet_pos_tol", 1e-3),
        feet_rot_tol=sec.float("feet_rot_tol", 1e-2),
        goal_poses=tuple(poses),
        goal_config=goal_config,
        goal_pos_tol=sec.float("goal_pos_tol", 0.02),
        goal_rot_tol=sec.float("goal_rot_tol", 0.1),
        position_only=_bool(sec.get("position_only", "false"), where),
        base_translation=sec.float("base_translation", 0.5),
        base_rotation=sec.float("base_rotation", 0.5),
    )


def _parse_planner(sec: tf.Section) -> PlannerSpec:
    where = f"[planner] at line {sec.line}"
    name = sec.get("planner") or sec.require("name")
    if name not in PLANNERS:
        raise ConfigError(f"{where}: unknown planner '{name}' (known: {', '.join(PLANNERS)})")
    space = sec.get("space", "cspace")
    if space not in SPACES:
        raise ConfigError(f"{where}: unknown space '{space}'")
    params = {k: _param(v) for k, v in sec.entries if k not in ("planner", "name", "space", "frames")}
    frames = tuple(sec.get("frames", "").split())
    return PlannerSpec(name, space, tuple(sorted(params.items())), frames)


_SOLVER_KEYS = {f.name: f.type for f in fields(ik.SolverOptions)}


def _parse_solver(sec: tf.Section | None) -> SolverSpec:
    if sec is None:
        return SolverSpec()
    opts = {}
    spec = {}
    for k, v in sec.entries:
        if k in _SOLVER_KEYS:
            opts[k] = int(v) if k in ("max_iterations", "stall_window") else float(v)
        elif k in ("retry_budget", "goal_budget"):
            spec[k] = int(v)
        elif k == "resolution":
            spec[k] = float(v)
        else:
            raise ConfigError(f"[solver] at line {sec.line}: unknown key '{k}'")
    return SolverSpec(ik.SolverOptions(**opts), **spec)


def _included_tasks(sec: tf.Section, base: Path) -> list[TaskSpec]:
    """``[task]`` blocks of another file, optionally filtered by ``tasks = a b`` (or ``a, b``)."""
    path = _path(sec.require("file"), base)
    if not path.exists():
        raise ConfigError(f"[include] at line {sec.line}: file not found: {path}")
    found = [_parse_task(s, path.parent) for s in tf.read(path) if s.name == "task"]
    wanted = sec.get("tasks")
    if wanted is None:
        return found
    wanted = wanted.replace(",", " ").split()
    by_name = {t.name: t for t in found}
    missing = [n for n in wanted if n not in by_name]
    if missing:
        raise ConfigError(f"[include] at line {sec.line}: no task named {', '.join(missing)} in {path}")
    return [by_name[n] for n in wanted]


def parse_config(text: str, base_dir: str | Path = ".") -> BenchConfig:
    """Parse benchmark config text; relative paths resolve against ``base_dir``."""
    base = Path(base_dir)
    try:
        sections = tf.parse(text)
    except tf.ParseError as exc:
        raise ConfigError(str(exc)) from exc
    tasks, planners = [], []
    solver_sec = bench_sec = None
    try:
        for sec in sections:
            if sec.name == "task":
                tasks.append(_parse_task(sec, base))
            elif sec.name == "planner":
                planners.append(_parse_planner(sec))
            elif sec.name == "solver":
                solver_sec = sec
            elif sec.name == "bench":
                bench_sec = sec
            elif sec.name == "include":
                tasks.extend(_included_tasks(sec, base))
            else:
                raise ConfigError(f"line {sec.line}: unknown section [{sec.name}]")
        solver = _parse_solver(solver_sec)
    except (tf.ParseError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if not tasks:
        raise ConfigError("config declares no [task]")
    if not planners:
        raise ConfigError("config declares no [planner]")
    names = [t.name for t in tasks]
    if len(set(names)) != len(names):
        raise ConfigError("task names must be unique")
    cfg = BenchConfig(tasks, planners, solver)
    if bench_sec is not None:
        where = f"[bench] at line {bench_sec.line}"
        n = int(bench_sec.get("seeds", "10"))
        first = int(bench_sec.get("first_seed", "0"))
        if n < 1:
            raise ConfigError(f"{where}: seeds must be >= 1")
        cfg.seeds = tuple(range(first, first + n))
        cfg.time_budget = bench_sec.float("time_budget", 60.0)
        if not cfg.time_budget > 0.0:
            raise ConfigError(f"{where}: time_budget must be positive")
        mi = bench_sec.get("max_iterations")
        cfg.max_iterations = int(mi) if mi else None
        cfg.trajectories = _bool(bench_sec.get("trajectories", "true"), where)
        cfg.jobs = int(bench_sec.get("jobs", "1"))
    for t in tasks:
        for p in planners:
            if p.space != "cspace" and not (p.frames or t.frames):
                raise ConfigError(f"planner {p.label} needs end-effector frames for task '{t.name}'")
            if p.space == "eespace" and len(p.frames or t.frames) != 1:
                raise ConfigError(f"planner {p.label}: eespace takes exactly one frame")
    return cfg


def load_config(path: str | Path) -> BenchConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cfg = parse_config(path.read_text(encoding="utf-8"), path.parent)
    cfg.source = path
    return cfg


# -------------------------------------------------------------- execution
def make_space(task: TaskSpec, kind: str, seed: int, solver: SolverSpec | None = None, frames=()):
    """Fresh space instance for one run of ``task``."""
    solver = solver or SolverSpec()
    model, scene, balance, start = task.load()
    kw = dict(seed=seed, base_translation=task.base_translation, base_rotation=task.base_rotation,
              retry_budget=solver.retry_budget, resolution=solver.resolution, options=solver.options)
    frames = tuple(frames) or task.frames
    if kind == "cspace":
        return ConfigurationSpace(model, scene, balance, start, **kw)
    if kind == "eespace":
        return EndEffectorSpace(model, scene, balance, start, frames[0], position_only=task.position_only, **kw)
    if kind == "meta":
        return MetaEndEffectorSpace(model, scene, balance, start, frames, position_only=task.position_only, **kw)
    raise ConfigError(f"unknown space '{kind}'")


def goal_from_pose(model: RobotModel, scene: Scene | None, targets, balance: BalanceSpec, start,
                   seed: int = 0, budget: int = 50, lower=None, upper=None,
                   options: ik.SolverOptions | None = None, position_only: bool = False,
                   tolerance: float | None = None) -> np.ndarray:
    """Balanced, collision-free configuration placing each frame at its target.

    ``targets`` is a sequence of ``(frame, Transform)``.  The first attempt
    is seeded with ``start``, later ones with uniform draws in the bounds.
    Raises :class:`InvalidGoal` when ``budget`` attempts fail.
    """
    start = model.check_configuration(start)
    lower = np.r_[start[:6] - 0.5, model.joint_lower] if lower is None else np.asarray(lower, float)
    upper = np.r_[start[:6] + 0.5, model.joint_upper] if upper is None else np.asarray(upper, float)
    rng = np.random.default_rng(seed)
    cons = [ik.JointBounds(lower, upper), ik.Balance(balance)]
    cons += [ik.PoseTarget(f, x, np.zeros(6), position_only) for f, x in targets]
    for attempt in range(budget):
        q_seed = np.clip(start, lower, upper) if attempt == 0 else rng.uniform(lower, upper)
        res = ik.solve(model, ik.IkProblem(q_seed, q_seed, cons), options)
        if not res.converged:
            continue
        if tolerance is not None:
            kin_ok = all(np.linalg.norm(fk(model, res.q_star, f).translation - x.translation) <= tolerance
                         for f, x in targets)
            if not kin_ok:
                continue
        if is_state_valid(model, scene, res.q_star, balance):
            return res.q_star
    raise InvalidGoal("no valid configuration reaches the goal pose")


def _goal_config(task: TaskSpec, seed: int, space, solver: SolverSpec) -> np.ndarray:
    if task.goal_config is not None:
        return task.goal_config.copy()
    model, scene, balance, start = task.load()
    return goal_from_pose(model, scene, task.goal_poses, balance, start, seed=seed, budget=solver.goal_budget,
                          lower=space.lower, upper=space.upper, options=solver.options,
                          position_only=task.position_only)


def run_cell(cfg: BenchConfig, task: TaskSpec, spec: PlannerSpec, seed: int) -> tuple[BenchRecord, PlanResult | None]:
    """Run one (task, planner, space, seed) cell; failures become statuses."""
    space = make_space(task, spec.space, seed, cfg.solver, spec.frames)
    rec = BenchRecord(task.name, spec.planner, spec.space, seed, "invalid_goal")
    try:
        q_goal = _goal_config(task, seed, space, cfg.solver)
    except InvalidGoal:
        return rec, None
    model, _, _, start = task.load()
    query = PlannerQuery(
        space,
        space.state_from_config(start),
        space.state_from_config(q_goal),
        goal_region=task.goal_region(),
        time_budget=cfg.time_budget,
        rng_seed=seed,
        params=dict(spec.params),
        max_iterations=cfg.max_iterations,
    )
    res = plan(spec.planner, query)
    m = res.metrics
    rec = BenchRecord(task.name, spec.planner, spec.space, seed, res.status, res.planning_time,
                      res.c_cost, res.w_cost, res.com_cost, m.n_evaluations, m.n_ik_calls, m.ik_time,
                      res.iterations, len(res.path))
    return rec, res


def trajectory_name(rec: BenchRecord) -> str:
    return f"traj_{rec.task}_{rec.planner}-{rec.space}_{rec.seed}.traj"


def _trajectory_meta(task: TaskSpec, spec: PlannerSpec, rec: BenchRecord) -> dict:
    frames = spec.frames or task.frames
    return {"task": task.name, "planner": spec.planner, "space": spec.space,
            "frames": " ".join(frames), "seed": rec.seed}


_WORKER_CFG: BenchConfig | None = None


def _worker_init(cfg):
    global _WORKER_CFG
    _WORKER_CFG = cfg


def _worker_run(job):
    ti, pi, seed = job
    cfg = _WORKER_CFG
    rec, res = run_cell(cfg, cfg.tasks[ti], cfg.planners[pi], seed)
    path = [s.config for s in res.path] if res is not None and res.solved else None
    return rec, path


def run_benchmark(config, out: str | Path | None = None, jobs: int | None = None, log=None) -> list[BenchRecord]:
    """Run every cell of the grid; write the report into ``out`` if given."""
    cfg = load_config(config) if isinstance(config, (str, Path)) else config
    jobs = cfg.jobs if jobs is None else jobs
    grid = [(ti, pi, s) for ti in range(len(cfg.tasks)) for pi in range(len(cfg.planners)) for s in cfg.seeds]
    t0 = time.time()
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init, initargs=(cfg,)) as pool:
            for job, item in zip(grid, pool.map(_worker_run, grid)):
                results.append((job, *item))
                if log:
                    log(item[0])
    else:
        _worker_init(cfg)
        for job in grid:
            item = _worker_run(job)
            results.append((job, *item))
            if log:
                log(item[0])
    results.sort(key=lambda r: r[1].key)
    records = [r[1] for r in results]
    if out is not None:
        trajs = {}
        if cfg.trajectories:
            for (ti, pi, _), rec, path in results:
                if path is not None:
                    trajs[trajectory_name(rec)] = (path, _trajectory_meta(cfg.tasks[ti], cfg.planners[pi], rec))
        meta = {"started": t0, "finished": time.time(), "host": platform.node(), "backend": kernels.BACKEND,
                "config": str(cfg.source) if cfg.source else None, "jobs": jobs}
        emit_report(records, out, trajs, meta)
    return records


# ------------------------------------------------------------------ report
RECORD_COLUMNS = ("task", "planner", "space", "seed", "status", "iterations", "waypoints",
                  "c_cost", "w_cost", "com_cost", "n_evaluations", "n_ik_calls")
TIMING_COLUMNS = ("task", "planner", "space", "seed", "planning_time", "ik_time", "ik_fraction")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def _stat(values) -> dict | None:
    vals = [float(v) for v in values if v is not None]
    if not vals:
        return None
    return {
        "mean": statistics.fmean(vals),
        "std": statistics.stdev(vals) if len(vals) > 1 else None,
        "median": statistics.median(vals),
        "n": len(vals),
    }


def summarize(records) -> dict:
    """Per-cell statistics; costs and times over solved runs only."""
    cells: dict = {}
    for r in records:
        cells.setdefault((r.task, r.planner, r.space), []).append(r)
    out = {}
    for (task, planner, space), recs in sorted(cells.items()):
        solved = [r for r in recs if r.status == "solved"]
        statuses: dict[str, int] = {}
        for r in recs:
            statuses[r.status] = statuses.get(r.status, 0) + 1
        out[f"{task}/{planner}/{space}"] = {
            "task": task,
            "planner": planner,
            "space": space,
            "runs": len(recs),
            "solved": len(solved),
            "solve_rate": len(solved) / len(recs),
            "statuses": dict(sorted(statuses.items())),
            "planning_time": _stat(r.planning_time for r in solved),
            "c_cost": _stat(r.c_cost for r in solved),
            "w_cost": _stat(r.w_cost for r in solved),
            "com_cost": _stat(r.com_cost for r in solved),
            "n_evaluations": _stat(r.n_evaluations for r in solved),
            "n_ik_calls": _stat(r.n_ik_calls for r in solved),
            "ik_time": _stat(r.ik_time for r in solved),
            "ik_fraction": _stat(r.ik_fraction for r in recs),
        }
    return out


def emit_report(records, out: str | Path, trajectories: dict | None = None, meta: dict | None = None) -> dict:
    """Write ``records.csv``, ``timings.csv``, ``summary.json`` and trajectory files."""
    records = sorted(records, key=lambda r: r.key)
    if not records:
        raise ValueError("no records to report")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for r in records:
        d = asdict(r)
        d["ik_fraction"] = r.ik_fraction
        rows.append(d)
    (out / "records.csv").write_text(_csv(rows, RECORD_COLUMNS), encoding="utf-8")
    (out / "timings.csv").write_text(_csv(rows, TIMING_COLUMNS), encoding="utf-8")
    summary = {"meta": meta or {}, "cells": summarize(records), "records": rows}
    (out / "summary.json").write_text(json.dumps(summary, indent=1, default=str) + "\n", encoding="utf-8")
    for name, (path, tmeta) in (trajectories or {}).items():
        save_trajectory(path, out / name, tmeta)
    return summary
