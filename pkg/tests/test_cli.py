"""Command line: plan, bench, validate and ik round trips and exit codes."""

from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import DATA
from wbplan import bench
from wbplan.cli import main
from wbplan.kinematics import fk
from wbplan.model import load_trajectory, save_trajectory

CONFIG = f"""
[include]
file = {DATA / 'tasks.cfg'}
tasks = reach, task1
[planner]
planner = rrt_connect
space = cspace
[planner]
planner = rrt
space = cspace
[bench]
seeds = 2
time_budget = 60
max_iterations = 2000
"""


@pytest.fixture(scope="module")
def config(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "grid.cfg"
    p.write_text(CONFIG)
    return p


def test_plan_writes_valid_trajectory(config, tmp_path, capsys):
    code = main(["plan", "--config", str(config), "--task", "reach", "--planner", "rrt_connect-cspace",
                 "--seed", "1", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0, out
    assert "solved" in out
    files = list(tmp_path.glob("traj_reach_rrt_connect-cspace_1.traj"))
    assert len(files) == 1
    traj, meta = load_trajectory(files[0], with_meta=True)
    assert meta["task"] == "reach" and all(len(q) == 23 for q in traj)
    assert main(["validate", "--config", str(config), str(files[0])]) == 0
    assert "0 violations" in capsys.readouterr().out


def test_plan_failure_exit_code(config, tmp_path, capsys):
    code = main(["plan", "--config", str(config), "--task", "task1", "--planner", "rrt",
                 "--time-budget", "0.01", "--out", str(tmp_path)])
    assert code == 1
    assert "timeout" in capsys.readouterr().out
    assert not list(tmp_path.glob("*.traj"))


def test_bench_then_validate(config, tmp_path, capsys):
    out = tmp_path / "b"
    code = main(["bench", "--config", str(config), "--task", "reach", "--planner", "rrt_connect",
                 "--seeds", "2", "--out", str(out), "--quiet"])
    text = capsys.readouterr().out
    assert code == 0
    assert "reach/rrt_connect/cspace: solved 2/2" in text
    assert (out / "records.csv").exists() and (out / "summary.json").exists()
    assert len(list(out.glob("traj_*.traj"))) == 2
    assert main(["validate", "--config", str(config), str(out)]) == 0
    assert "checked 2 trajectories: 0 violations" in capsys.readouterr().out


def test_validate_reports_violations(config, tmp_path, capsys, reach):
    _, model, _, balance, start = reach
    bad = start.copy()
    bad[model.group_indices("leg")] += 0.3
    path = tmp_path / "traj_bad.traj"
    save_trajectory([start, bad], path, {"task": "reach", "space": "cspace"})
    assert main(["validate", "--config", str(config), str(path)]) == 1
    out = capsys.readouterr().out
    assert "waypoint 1 INVALID" in out
    assert "waypoint 0 INVALID" not in out


def test_validate_without_files(config, tmp_path, capsys):
    assert main(["validate", "--config", str(config), str(tmp_path)]) == 2


def test_ik_round_trip(config, tmp_path, capsys, reach):
    _, model, _, _, start = reach
    x = fk(model, start, "right_hand")
    p = x.translation + np.array([0.05, 0.0, 0.05])
    code = main(["ik", "--config", str(config), "--task", "reach", "--pose", "right_hand",
                 *(f"{v:.6f}" for v in p), "0", "-1.2", "0", "--out", str(tmp_path)])
    text = capsys.readouterr().out
    assert code == 0
    result = json.loads(text[: text.rindex("}") + 1])
    q = np.array(result["configuration"])
    assert np.linalg.norm(fk(model, q, "right_hand").translation - p) <= 1e-3
    (traj,) = load_trajectory(tmp_path / "ik_reach_0.traj")
    np.testing.assert_array_equal(traj, q)


def test_ik_unreachable(config, capsys):
    code = main(["ik", "--config", str(config), "--task", "reach", "--pose", "right_hand",
                 "10", "0", "0", "0", "0", "0"])
    assert code == 1
    assert "invalid_goal" in capsys.readouterr().out


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[planner]\nplanner = rrt\n")
    assert main(["bench", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["plan", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_planner_selection(config, tmp_path, capsys):
    assert main(["plan", "--config", str(config), "--planner", "bkpiece", "--out", str(tmp_path)]) == 2
    assert main(["plan", "--config", str(config), "--time-budget", "0", "--out", str(tmp_path)]) == 2


def test_console_script(config):
    res = subprocess.run([sys.executable, "-m", "wbplan.cli", "validate", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "--resolution" in res.stdout
    res = subprocess.run([sys.executable, "-m", "wbplan.cli"], capture_output=True, text=True)
    assert res.returncode == 2


def test_cli_bench_matches_library(config, tmp_path):
    out = tmp_path / "cli"
    assert main(["bench", "--config", str(config), "--task", "reach", "--planner", "rrt_connect",
                 "--out", str(out), "--quiet"]) == 0
    cfg = bench.load_config(config)
    cfg.tasks = [cfg.task("reach")]
    cfg.planners = cfg.planners[:1]
    bench.run_benchmark(cfg, out=tmp_path / "lib")
    assert (out / "records.csv").read_bytes() == (tmp_path / "lib" / "records.csv").read_bytes()
