"""Shared fixtures: the shipped biped, its stance and the task catalog."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from wbplan import bench
from wbplan.model import load_robot

DATA = Path(bench.DATA_DIR)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def biped():
    return load_robot(DATA / "biped17.robot")


CATALOG = """
[include]
file = tasks.cfg
[planner]
planner = rrt_connect
space = cspace
"""


@pytest.fixture(scope="session")
def catalog():
    """Every shipped task with a config-space RRT-Connect planner."""
    return bench.parse_config(CATALOG, DATA)


@pytest.fixture(scope="session")
def reach(catalog):
    """``(task, model, scene, balance, start)`` of the empty-space reach."""
    task = catalog.task("reach")
    return (task, *task.load())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_configuration(model, rng, base_scale=1.0):
    """Configuration with a random base pose and joints uniform within limits."""
    q = np.zeros(model.dim)
    q[:3] = rng.uniform(-base_scale, base_scale, 3)
    w = rng.normal(size=3)
    q[3:6] = w / np.linalg.norm(w) * rng.uniform(0.0, 3.0)
    q[6:] = rng.uniform(model.joint_lower, model.joint_upper)
    return q
