"""Robot, scene and trajectory files."""

from __future__ import annotations

import re

import numpy as np
import pytest

from wbplan.model import (
    ModelError,
    ParseError,
    Primitive,
    Scene,
    VoxelGrid,
    dump_robot,
    dump_scene,
    load_robot,
    load_scene,
    load_trajectory,
    parse_robot,
    parse_scene,
    save_trajectory,
)

SINGLE_LINK = """
[link]
name = pelvis
mass = 1.0
com = 0 0 0.5
[link]
name = cap
mass = 0.0
[joint]
name = weld
parent = pelvis
child = cap
type = fixed
"""


def test_biped_dimension_matches_file(biped, data_dir):
    # oracle: count the non-fixed joint types straight from the file text
    text = (data_dir / "biped17.robot").read_text()
    types = re.findall(r"^type\s*=\s*(\w+)", text, flags=re.M)
    movable = sum(t != "fixed" for t in types)
    assert movable == 17
    assert biped.N == movable
    assert biped.dim == movable + 6


def test_single_fixed_joint_model():
    model = parse_robot(SINGLE_LINK)
    assert model.N == 0
    assert model.dim == 6


def test_inverted_bounds_rejected():
    text = SINGLE_LINK.replace("type = fixed", "type = revolute\nlower = 0.5\nupper = -0.5")
    with pytest.raises(ModelError, match="weld"):
        parse_robot(text)


@pytest.mark.parametrize(
    "mutation, message",
    [
        (lambda t: t.replace("child = cap", "child = ghost"), "ghost"),
        (lambda t: t.replace("name = cap", "name = pelvis"), "pelvis"),
        (lambda t: t + "[joint]\nname = loop\nparent = cap\nchild = pelvis\ntype = fixed\n", "cycle"),
        (lambda t: t.replace("mass = 1.0", "mass = 0.0"), "mass"),
        (lambda t: t.replace("type = fixed", "type = revolute\naxis = 0 0 2\nupper = 1"), "axis"),
    ],
)
def test_invalid_models_rejected(mutation, message):
    with pytest.raises(ModelError, match=message):
        parse_robot(mutation(SINGLE_LINK))


def test_malformed_robot_file():
    with pytest.raises(ParseError):
        parse_robot("[link]\nname = a\nmass = heavy\n")
    with pytest.raises(ParseError):
        parse_robot("[linkage]\nname = a\n")


def test_robot_load_is_deterministic(data_dir):
    a = load_robot(data_dir / "biped17.robot")
    b = load_robot(data_dir / "biped17.robot")
    assert dump_robot(a) == dump_robot(b)
    assert a.joint_names == b.joint_names
    assert np.array_equal(a.joint_lower, b.joint_lower)


def test_robot_round_trip(biped):
    text = dump_robot(biped)
    again = parse_robot(text, name=biped.name)
    assert dump_robot(again) == text
    for attr in ("joint_lower", "joint_upper", "mass", "com_local", "origin_t", "origin_R", "axis"):
        assert np.array_equal(getattr(again, attr), getattr(biped, attr)), attr


def test_biped_feet_have_four_corners(biped):
    assert set(biped.feet) == {"left_foot", "right_foot"}
    for foot in biped.feet.values():
        assert foot.corners.shape == (4, 2)


def test_empty_scene():
    scene = parse_scene("[roi]\nmin = 0 0 0\nmax = 1 1 1\n")
    assert scene.obstacles == ()
    assert scene.voxel_grid is None


def test_scene_box_round_trip_is_bit_exact():
    text = "[obstacle]\nkind = box\npose = 0.1 -0.2 0.30000000000000004 0.1 0.2 0.3\ndimensions = 0.05 0.06 0.07\n"
    scene = parse_scene(text)
    again = parse_scene(dump_scene(scene))
    a, b = scene.obstacles[0], again.obstacles[0]
    assert np.array_equal(a.a, b.a)
    assert np.array_equal(a.rotvec, b.rotvec)
    assert np.array_equal(a.half_extents, b.half_extents)


def test_scene_capsule_and_sphere_round_trip():
    text = ("[obstacle]\nkind = capsule\npose = 0.3 0 0.2 0 1.2 0\ndimensions = 0.4 0.05\n"
            "[obstacle]\nkind = sphere\npose = 1 2 3 0 0 0\ndimensions = 0.25\n")
    scene = parse_scene(text)
    again = parse_scene(dump_scene(scene))
    for p, q in zip(scene.obstacles, again.obstacles):
        assert p.kind == q.kind
        assert p.radius == q.radius
        assert np.allclose(p.a, q.a, atol=1e-15)
        assert np.allclose(p.b, q.b, atol=1e-15)


def test_voxels_are_deduplicated():
    cells = ["1 2 3", "0 0 0", "4 5 6"] * 2
    text = "[voxels]\norigin = 0 0 0\nresolution = 0.05\n" + "".join(f"cell = {c}\n" for c in cells)
    scene = parse_scene(text)
    assert len(scene.voxel_grid.cells) == 3


@pytest.mark.parametrize("resolution", ["0", "-0.1"])
def test_nonpositive_voxel_resolution(resolution):
    with pytest.raises(ModelError):
        parse_scene(f"[voxels]\nresolution = {resolution}\ncell = 0 0 0\n")


def test_scene_invariants():
    with pytest.raises(ModelError):
        Scene(roi_min=np.zeros(3), roi_max=np.array([1.0, 0.0, 1.0]))
    with pytest.raises(ModelError):
        Scene(obstacles=(Primitive.sphere([0, 0, 0], 0.0),))
    with pytest.raises(ModelError):
        Scene(voxel_grid=VoxelGrid(np.zeros(3), 0.0, np.zeros((1, 3), int)))


def test_shipped_scenes_load(data_dir):
    for name in ("empty", "task1", "task2", "task3"):
        scene = load_scene(data_dir / f"{name}.scene")
        assert np.all(scene.roi_max > scene.roi_min)


def test_trajectory_two_waypoints(tmp_path):
    traj = [np.array([0.1, 0.2, 1.0 / 3.0]), np.array([-1e-17, 2.5e8, np.pi])]
    path = tmp_path / "t.traj"
    save_trajectory(traj, path)
    rows = [ln for ln in path.read_text().splitlines() if "=" not in ln]
    assert len(rows) == 2
    back = load_trajectory(path)
    assert np.max(np.abs(np.array(back) - np.array(traj))) < 1e-12


def test_trajectory_round_trip_100x23(tmp_path, rng):
    traj = rng.normal(scale=3.0, size=(100, 23))
    path = tmp_path / "t.traj"
    save_trajectory(list(traj), path, {"task": "reach", "frames": "right_hand left_hand"})
    back, meta = load_trajectory(path, with_meta=True)
    assert np.max(np.abs(np.array(back) - traj)) < 1e-12
    assert np.array_equal(np.array(back), traj)  # repr keeps every bit
    assert meta == {"dim": "23", "task": "reach", "frames": "right_hand left_hand"}


def test_trajectory_errors(tmp_path):
    with pytest.raises(ModelError):
        save_trajectory([], tmp_path / "e.traj")
    with pytest.raises(ModelError):
        save_trajectory([np.zeros(3), np.zeros(4)], tmp_path / "m.traj")
    with pytest.raises(OSError):
        save_trajectory([np.zeros(3)], tmp_path / "missing" / "dir" / "x.traj")
    bad = tmp_path / "bad.traj"
    bad.write_text("dim = 3\n1 2 3\n1 2\n")
    with pytest.raises(ModelError):
        load_trajectory(bad)
