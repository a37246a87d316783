"""Balanced state spaces: sampling, near-sampling, interpolation and metrics."""

from __future__ import annotations

import numpy as np
import pytest

import oracles
from conftest import random_configuration
from wbplan import bench, ik
from wbplan.kinematics import Transform, fk, se3_distance, se3_interpolate
from wbplan.spaces import (
    ConfigurationSpace,
    EndEffectorSpace,
    MetaEndEffectorSpace,
    SamplingError,
    random_near_se3,
)


def _space(catalog, task="reach", kind="cspace", seed=0, **kw):
    return bench.make_space(catalog.task(task), kind, seed, catalog.solver, **kw)


def _associated(space, state):
    for frame, pose in zip(space.frames, state.ee_poses):
        T = oracles.frame_transform(space.model, state.config, frame)
        assert np.allclose(pose.translation, T[:3, 3], atol=1e-6)
        assert np.allclose(pose.matrix, T[:3, :3], atol=1e-6)


def _pose_residual(got: Transform, target: Transform) -> np.ndarray:
    return np.abs(ik.pose_error(got.matrix, got.translation, target))


# ----------------------------------------------------------- config space
def test_cspace_uniform_samples_are_balanced(catalog):
    space = _space(catalog, seed=1)
    for _ in range(100):
        s = space.sample_uniform()
        assert oracles.is_balanced(space.model, s.config, space.balance)
        assert np.all(s.config >= space.lower) and np.all(s.config <= space.upper)


def test_cspace_seeded_determinism(catalog):
    runs = []
    for _ in range(2):
        space = _space(catalog, seed=7)
        a = space.sample_uniform()
        b = space.sample_uniform_near(a, 0.3)
        c = space.interpolate(a, b, 0.5)
        runs.append(b"".join(s.config.tobytes() for s in (a, b, c)))
    assert runs[0] == runs[1]
    other = _space(catalog, seed=8).sample_uniform()
    assert other.config.tobytes() != runs[0][: other.config.nbytes]


def test_cspace_collapsed_bounds(catalog):
    space = _space(catalog)
    start = space.start_config
    space.set_bounds(start, start)
    s = space.sample_uniform()
    np.testing.assert_array_equal(s.config, start)
    assert space.metrics.n_ik_calls == 1


def test_set_bounds_validation(catalog):
    space = _space(catalog)
    with pytest.raises(ValueError):
        space.set_bounds(space.upper, space.lower)
    with pytest.raises(ValueError):
        space.set_bounds(space.lower[:-1], space.upper[:-1])


def test_cspace_near_within_distance(catalog):
    space = _space(catalog, seed=2)
    near = space.sample_uniform()
    for k in range(100):
        s = space.sample_uniform_near(near, 0.3)
        assert space.distance(s, near) <= 0.3
        assert oracles.is_balanced(space.model, s.config, space.balance)
        if k % 10 == 9:
            near = s


def test_cspace_near_vanishing_radius_returns_near(catalog):
    space = _space(catalog)
    near = space.state_from_config(space.start_config)
    s = space.sample_uniform_near(near, 1e-9)
    np.testing.assert_allclose(s.config, near.config, atol=1e-9)
    with pytest.raises(ValueError):
        space.sample_uniform_near(near, 0.0)


def test_cspace_interpolation_endpoints(catalog):
    space = _space(catalog, seed=3)
    a = space.sample_uniform()
    b = space.sample_uniform_near(a, 0.3)
    assert space.interpolate(a, b, 0.0).config.tobytes() == a.config.tobytes()
    assert space.interpolate(a, b, 1.0).config.tobytes() == b.config.tobytes()


def test_cspace_interpolation_deviates_only_when_needed(catalog):
    space = _space(catalog, seed=4)
    model, balance = space.model, space.balance
    kept = 0
    for _ in range(40):
        a = space.sample_uniform()
        b = space.sample_uniform_near(a, 0.3)
        d = float(space.rng.uniform(0.1, 0.9))
        q_bar = a.config + d * (b.config - a.config)
        s = space.interpolate(a, b, d)
        assert oracles.is_balanced(model, s.config, balance)
        if oracles.is_balanced(model, q_bar, balance):
            assert s.config.tobytes() == q_bar.tobytes()
            kept += 1
        else:
            assert np.max(np.abs(s.config - q_bar)) > 1e-9
    assert kept >= 1


def test_unbalanced_midpoint_is_projected(catalog):
    space = _space(catalog)
    model, balance = space.model, space.balance
    a = space.state_from_config(space.start_config)
    q_b = a.config.copy()
    q_b[model.group_indices("leg")] += 0.3  # feet leave their targets
    b = space.state_from_config(q_b)
    q_bar = 0.5 * (a.config + b.config)
    assert not oracles.is_balanced(model, q_bar, balance)
    s = space.interpolate(a, b, 0.5)
    assert oracles.is_balanced(model, s.config, balance)


def test_cspace_sampling_error_when_budget_exhausted(catalog):
    space = _space(catalog)
    q = space.start_config.copy()
    q[0] += 0.5  # base far ahead of the feet: no balanced point in the box
    space.set_bounds(q, q)
    with pytest.raises(SamplingError):
        space.sample_uniform()
    assert space.metrics.n_ik_calls == space.retry_budget


# ---------------------------------------------------- end-effector spaces
def test_ee_uniform_association_and_balance(catalog):
    space = _space(catalog, kind="eespace", seed=1)
    assert isinstance(space, EndEffectorSpace)
    for _ in range(50):
        s = space.sample_uniform()
        _associated(space, s)
        assert oracles.is_balanced(space.model, s.config, space.balance)
        assert np.all(s.ee_poses[0].translation >= space.roi_min - 1e-4)
        assert np.all(s.ee_poses[0].translation <= space.roi_max + 1e-4)


def test_ee_collapsed_roi(catalog):
    task = catalog.task("reach")
    model, scene, balance, start = task.load()
    p = fk(model, start, "right_hand").translation + np.array([0.05, 0.0, 0.05])
    space = EndEffectorSpace(model, scene, balance, start, "right_hand", seed=5, position_only=True)
    space.roi_min = space.roi_max = p
    for _ in range(5):
        s = space.sample_uniform()
        assert np.all(np.abs(s.ee_poses[0].translation - p) <= 1e-4)
        assert oracles.is_balanced(model, s.config, balance)


def test_ee_near_within_distance(catalog):
    space = _space(catalog, kind="eespace", seed=2)
    near = space.sample_uniform()
    for _ in range(50):
        s = space.sample_uniform_near(near, 0.15)
        assert se3_distance(s.ee_poses[0], near.ee_poses[0]) <= 0.15
        _associated(space, s)
        assert oracles.is_balanced(space.model, s.config, space.balance)


def test_random_near_se3_stays_in_ball(rng):
    pose = Transform(np.array([0.3, -0.2, 0.1]), np.array([0.9, 0.1, -0.3, 0.2]))
    for _ in range(1000):
        d = rng.uniform(1e-3, 1.0)
        assert se3_distance(random_near_se3(rng, pose, d), pose) <= d + 1e-12


def test_ee_interpolation_endpoints(catalog):
    space = _space(catalog, kind="eespace", seed=3)
    a = space.sample_uniform()
    b = space.sample_uniform_near(a, 0.15)
    for d, ref in ((0.0, a), (1.0, b)):
        s = space.interpolate(a, b, d)
        assert np.all(_pose_residual(s.ee_poses[0], ref.ee_poses[0]) <= 1e-6)
        assert s.config.tobytes() == ref.config.tobytes()


def test_ee_translation_only_midpoint(catalog):
    space = _space(catalog, kind="eespace")
    model = space.model
    a = space.state_from_config(space.start_config)
    goal = Transform(a.ee_poses[0].translation + np.array([0.2, 0.0, 0.0]), a.ee_poses[0].rotation)
    cons = [ik.JointBounds(space.lower, space.upper), ik.Balance(space.balance), ik.PoseTarget("right_hand", goal)]
    q_b = ik.solve(model, ik.IkProblem(a.config, a.config, cons)).q_star
    b = space.state_from_config(q_b)
    assert np.linalg.norm(b.ee_poses[0].translation - a.ee_poses[0].translation) == pytest.approx(0.2, abs=1e-3)
    mid = se3_interpolate(a.ee_poses[0], b.ee_poses[0], 0.5)
    s = space.interpolate(a, b, 0.5)
    largest = np.array([0.05, 0.05, 0.05, 0.25, 0.25, 0.25])  # final pose schedule tolerance
    assert np.all(_pose_residual(s.ee_poses[0], mid) <= largest + 1e-4)
    assert oracles.is_balanced(model, s.config, space.balance)


def test_ee_space_requires_scene_and_frame(catalog):
    model, scene, balance, start = catalog.task("reach").load()
    with pytest.raises(ValueError):
        EndEffectorSpace(model, None, balance, start, "right_hand")
    with pytest.raises(KeyError):
        EndEffectorSpace(model, scene, balance, start, "no_such_frame")


# ------------------------------------------------------------- meta space
def test_meta_k1_matches_eespace(catalog):
    task = catalog.task("reach")
    model, scene, balance, start = task.load()
    outs = []
    for cls, frames in ((EndEffectorSpace, "right_hand"), (MetaEndEffectorSpace, ("right_hand",))):
        space = cls(model, scene, balance, start, frames, seed=11)
        a = space.sample_uniform()
        b = space.sample_uniform_near(a, 0.15)
        c = space.interpolate(a, b, 0.4)
        outs.append(b"".join(s.config.tobytes() + s.ee_poses[0].translation.tobytes() for s in (a, b, c)))
    assert outs[0] == outs[1]


def test_meta_k2_bimanual(catalog):
    space = _space(catalog, task="bimanual", kind="meta", seed=1)
    assert space.K == 2
    a = space.sample_uniform()
    _associated(space, a)
    assert oracles.is_balanced(space.model, a.config, space.balance)
    b = space.sample_uniform_near(a, 0.1)
    _associated(space, b)
    assert space.distance(a, b) <= 0.1
    s = space.interpolate(a, b, 0.5)
    _associated(space, s)
    largest = np.array([0.05, 0.05, 0.05, 0.25, 0.25, 0.25])
    for k in range(2):
        mid = se3_interpolate(a.ee_poses[k], b.ee_poses[k], 0.5)
        assert np.all(_pose_residual(s.ee_poses[k], mid) <= largest + 1e-4)
    assert oracles.is_balanced(space.model, s.config, space.balance)


# ---------------------------------------------------------------- metrics
@pytest.mark.parametrize("kind,task", [("cspace", "reach"), ("eespace", "reach"), ("meta", "bimanual")])
def test_metric_axioms(catalog, rng, kind, task):
    space = _space(catalog, task=task, kind=kind)
    states = [space.state_from_config(random_configuration(space.model, rng, 0.3)) for _ in range(60)]
    for s in states[:10]:
        assert space.distance(s, s) == pytest.approx(0.0, abs=1e-7)
    for _ in range(1000):
        i, j, k = rng.integers(0, len(states), 3)
        a, b, c = states[i], states[j], states[k]
        ab, bc, ac = space.distance(a, b), space.distance(b, c), space.distance(a, c)
        assert ab >= 0.0
        assert ab == pytest.approx(space.distance(b, a), abs=1e-12)
        assert ac <= ab + bc + 1e-9


@pytest.mark.parametrize("kind,task", [("cspace", "reach"), ("eespace", "reach"), ("meta", "bimanual")])
def test_batched_distances_match(catalog, rng, kind, task):
    space = _space(catalog, task=task, kind=kind)
    states = [space.state_from_config(random_configuration(space.model, rng, 0.3)) for _ in range(30)]
    F = np.array([space.features(s) for s in states])
    got = space.distances(space.features(states[0]), F)
    ref = [space.distance(states[0], s) for s in states]
    np.testing.assert_allclose(got, ref, atol=1e-7)


def test_cspace_weighted_metric(catalog):
    task = catalog.task("reach")
    model, scene, balance, start = task.load()
    w = np.ones(model.dim)
    w[3:6] = 0.25
    space = ConfigurationSpace(model, scene, balance, start, weights=w)
    a = space.state_from_config(start)
    q = start.copy()
    q[3] += 0.4
    assert space.distance(a, space.state_from_config(q)) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        ConfigurationSpace(model, scene, balance, start, weights=-w)
