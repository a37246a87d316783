"""Whole-body IK: solver contract, balance, relaxation and determinism."""

from __future__ import annotations

import numpy as np
import pytest

import oracles
from wbplan import ik
from wbplan.balance import is_balanced
from wbplan.kinematics import Transform, fk
from wbplan.metrics import SpaceMetrics
from wbplan.rotations import quat_angle


def _balance_check(model, q, balance):
    """Feet errors and CoM containment recomputed with the oracles."""
    for pos, rot in oracles.feet_errors(model, q, balance):
        assert pos <= 1e-3 and rot <= 1e-2
    assert oracles.is_balanced(model, q, balance)


@pytest.fixture(scope="module")
def setup(reach):
    _, model, _, balance, start = reach
    bounds = ik.JointBounds(model.lower, model.upper)
    return model, balance, start, bounds, ik.Balance(balance)


def test_bounds_only_returns_nominal(setup, rng):
    model, _, start, bounds, _ = setup
    for _ in range(5):
        q = start.copy()
        q[6:] = rng.uniform(model.joint_lower, model.joint_upper) * 0.9
        res = ik.solve(model, ik.IkProblem(q, q, [bounds]))
        assert res.converged
        assert res.iterations <= 1
        np.testing.assert_array_equal(res.q_star, q)


def test_bounds_only_projects_nominal_outside_limits(setup):
    model, _, start, bounds, _ = setup
    nominal = start.copy()
    nominal[6:] = model.joint_upper + 0.5
    res = ik.solve(model, ik.IkProblem(start, nominal, [bounds]))
    assert res.converged
    np.testing.assert_allclose(res.q_star[6:], model.joint_upper, atol=1e-9)


def test_balance_from_zero_pose(setup):
    model, balance, _, bounds, bal = setup
    q0 = model.zero_configuration()
    res = ik.solve(model, ik.IkProblem(q0, q0, [bounds, bal]))
    assert res.converged
    _balance_check(model, res.q_star, balance)


def test_balance_from_random_seeds(setup, rng):
    model, balance, start, bounds, bal = setup
    solved = 0
    for _ in range(20):
        q = start.copy()
        q[:3] += rng.uniform(-0.2, 0.2, 3)
        q[3:6] += rng.uniform(-0.2, 0.2, 3)
        q[6:] = rng.uniform(model.joint_lower, model.joint_upper)
        res = ik.solve(model, ik.IkProblem(q, q, [bounds, bal]))
        if res.converged:
            solved += 1
            _balance_check(model, res.q_star, balance)
            assert is_balanced(model, res.q_star, balance)
            assert np.all(res.q_star >= model.lower) and np.all(res.q_star <= model.upper)
            assert res.max_violation <= 1e-4
    assert solved >= 15


def test_reachable_pose_target(setup, rng):
    model, balance, start, bounds, bal = setup
    q_goal = start.copy()
    q_goal[19:] += rng.uniform(-0.3, 0.3, 4)
    target = fk(model, q_goal, "right_hand")
    pose = ik.PoseTarget("right_hand", target)
    res = ik.solve(model, ik.IkProblem(start, start, [bounds, bal, pose]))
    assert res.converged
    got = fk(model, res.q_star, "right_hand")
    assert np.linalg.norm(got.translation - target.translation) <= 1e-4 * np.sqrt(3)
    assert quat_angle(got.rotation, target.rotation) <= 1e-4 * np.sqrt(3)


def test_pose_tolerance_box_is_respected(setup):
    model, balance, start, bounds, bal = setup
    here = fk(model, start, "right_hand")
    target = Transform(here.translation + np.array([0.08, 0.0, 0.05]), here.rotation)
    tol = np.array([0.02, 0.02, 0.02, 0.1, 0.1, 0.1])
    pose = ik.PoseTarget("right_hand", target, tol)
    res = ik.solve(model, ik.IkProblem(start, start, [bounds, bal, pose]))
    assert res.converged
    got = fk(model, res.q_star, "right_hand")
    err = ik.pose_error(got.matrix, got.translation, target)
    assert np.all(np.abs(err) <= tol + 1e-4)


def test_unreachable_target_is_reported(setup):
    model, _, start, bounds, bal = setup
    here = fk(model, start, "right_hand")
    far = Transform(here.translation + np.array([10.0, 0.0, 0.0]), here.rotation)
    res = ik.solve(model, ik.IkProblem(start, start, [bounds, bal, ik.PoseTarget("right_hand", far)]))
    assert not res.converged
    assert res.iterations <= 100
    assert res.max_violation > 1.0


def test_merit_is_non_increasing(setup, rng):
    model, _, start, bounds, bal = setup
    here = fk(model, start, "right_hand")
    for _ in range(10):
        target = Transform(here.translation + rng.uniform(-0.15, 0.15, 3), here.rotation)
        q = start.copy()
        q[6:] = rng.uniform(model.joint_lower, model.joint_upper)
        res = ik.solve(model, ik.IkProblem(q, start, [bounds, bal, ik.PoseTarget("right_hand", target)]))
        h = np.array(res.merit_history)
        assert np.all(np.diff(h) <= 0.0)


def test_deterministic(setup, rng):
    model, _, start, bounds, bal = setup
    here = fk(model, start, "right_hand")
    target = Transform(here.translation + np.array([0.1, -0.05, 0.1]), here.rotation)
    q = start.copy()
    q[6:] = rng.uniform(model.joint_lower, model.joint_upper)
    runs = [ik.solve(model, ik.IkProblem(q, start, [bounds, bal, ik.PoseTarget("right_hand", target)]))
            for _ in range(2)]
    a, b = runs
    assert a.q_star.tobytes() == b.q_star.tobytes()
    assert (a.converged, a.iterations, a.max_violation) == (b.converged, b.iterations, b.max_violation)
    assert a.merit_history == b.merit_history


def test_input_errors(setup):
    model, _, start, bounds, _ = setup
    bad = start.copy()
    bad[7] = np.nan
    with pytest.raises(ValueError):
        ik.solve(model, ik.IkProblem(bad, start, [bounds]))
    with pytest.raises(ValueError):
        ik.solve(model, ik.IkProblem(start, np.r_[start, 0.0], [bounds]))
    with pytest.raises(ValueError):
        ik.solve(model, ik.IkProblem(start, np.full(model.dim, np.inf), [bounds]))


def test_metrics_counters(setup):
    model, _, start, bounds, bal = setup
    m = SpaceMetrics()
    for _ in range(3):
        ik.solve(model, ik.IkProblem(start, start, [bounds, bal]), metrics=m)
    assert m.n_ik_calls == 3
    assert m.ik_time > 0.0


def test_relax_feasible_needs_no_rounds(setup):
    model, _, start, bounds, bal = setup
    prox = ik.ConfigProximity(start, np.zeros(model.dim))
    problem = ik.IkProblem(start, start, [bounds, bal, prox])
    direct = ik.solve(model, problem)
    relaxed = ik.relax_and_solve(model, problem, prox, ik.default_config_schedule(model))
    assert direct.converged and relaxed.converged
    assert relaxed.relax_rounds == 0
    assert relaxed.q_star.tobytes() == direct.q_star.tobytes()
    assert relaxed.iterations == direct.iterations


def test_relax_unbalanced_center(setup):
    model, balance, start, bounds, bal = setup
    # shift the base until the CoM projection leaves the support polygon
    center = start.copy()
    hull = oracles.gift_wrap(oracles.support_corners(model, balance))
    center[0] += max(x for x, _ in hull) - oracles.center_of_mass(model, start)[0] + 0.01
    assert not oracles.inside_convex(oracles.center_of_mass(model, center)[:2], hull, balance.com_margin)
    prox = ik.ConfigProximity(center, np.zeros(model.dim))
    problem = ik.IkProblem(center, center, [bounds, bal, prox])
    schedule = ik.default_config_schedule(model)
    assert not ik.solve(model, problem).converged
    res = ik.relax_and_solve(model, problem, prox, schedule)
    assert res.converged and res.relax_rounds >= 1
    relaxed = res.tolerance > 0.0
    legs = model.group_indices("leg")
    assert np.all(relaxed[legs])  # the lower body goes first
    dev = np.abs(res.q_star - center)
    assert np.all(dev[~relaxed] <= 1e-6)
    assert np.all(dev <= res.tolerance + 1e-4)
    _balance_check(model, res.q_star, balance)


def test_relax_leg_only_when_legs_suffice(setup):
    model, balance, start, bounds, bal = setup
    center = start.copy()
    legs = model.group_indices("leg")
    center[legs] += 0.05  # feet leave their pinned poses; the legs alone can fix it
    assert not is_balanced(model, center, balance)
    prox = ik.ConfigProximity(center, np.zeros(model.dim))
    res = ik.relax_and_solve(model, ik.IkProblem(center, center, [bounds, bal, prox]), prox,
                             ik.default_config_schedule(model))
    assert res.converged
    relaxed = np.flatnonzero(res.tolerance > 0.0)
    np.testing.assert_array_equal(relaxed, legs)
    moved = np.flatnonzero(np.abs(res.q_star - center) > 1e-6)
    assert set(moved) <= set(legs)


def test_relax_exhaustion(setup):
    model, _, start, bounds, bal = setup
    center = start.copy()
    center[0] += 0.3
    prox = ik.ConfigProximity(center, np.zeros(model.dim))
    problem = ik.IkProblem(center, center, [bounds, bal, prox])
    res = ik.relax_and_solve(model, problem, prox, ik.RelaxationSchedule(()))
    assert not res.converged
    assert res.relax_rounds == 0


def test_pose_schedule_order():
    sched = ik.default_pose_schedule()
    tols = list(sched.tolerances(np.zeros(6)))
    assert sched.rounds == len(tols) == 10
    np.testing.assert_allclose(tols[0], [0, 0, 0, 0.05, 0.05, 0.05])
    np.testing.assert_allclose(tols[4], [0, 0, 0, 0.25, 0.25, 0.25])
    np.testing.assert_allclose(tols[5], [0.01, 0.01, 0.01, 0.25, 0.25, 0.25])
    np.testing.assert_allclose(tols[9], [0.05, 0.05, 0.05, 0.25, 0.25, 0.25])


def test_config_schedule_order(biped):
    sched = ik.default_config_schedule(biped)
    tols = list(sched.tolerances(np.zeros(biped.dim)))
    assert len(tols) == sched.rounds == 16
    legs, base = biped.group_indices("leg"), biped.group_indices("base")
    np.testing.assert_allclose(tols[0][legs], 0.1)
    assert np.all(tols[0][base] == 0.0)
    np.testing.assert_allclose(tols[3][legs], 0.8)
    np.testing.assert_allclose(tols[4][base], 0.1)
    np.testing.assert_allclose(tols[-1], 0.8)


def test_relax_rejects_foreign_constraint(setup):
    model, _, start, bounds, bal = setup
    prox = ik.ConfigProximity(start, np.zeros(model.dim))
    problem = ik.IkProblem(start, start, [bounds, bal])
    with pytest.raises(ValueError):
        ik.relax_and_solve(model, problem, prox, ik.default_config_schedule(model))
    with pytest.raises(TypeError):
        ik.relax_and_solve(model, ik.IkProblem(start, start, [bounds, bal]), bal, ik.default_config_schedule(model))
