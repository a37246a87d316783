"""SO(3) helpers against scipy."""

from __future__ import annotations

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from wbplan.rotations import (
    exp_so3,
    left_jacobian,
    left_jacobian_inv,
    log_so3,
    matrix_to_rpy,
    quat_angle,
    quat_from_matrix,
    quat_to_matrix,
    random_quaternion,
    rpy_to_matrix,
    slerp,
    wrap_rotvec,
)

rotvecs = st.lists(st.floats(-6.0, 6.0, allow_nan=False), min_size=3, max_size=3).map(np.array)


@settings(max_examples=300, deadline=None)
@given(rotvecs)
def test_exp_matches_scipy(w):
    assert np.allclose(exp_so3(w), Rotation.from_rotvec(w).as_matrix(), atol=1e-12)


@settings(max_examples=300, deadline=None)
@given(rotvecs)
def test_log_inverts_exp(w):
    R = Rotation.from_rotvec(w).as_matrix()
    v = log_so3(R)
    assert np.linalg.norm(v) <= math.pi + 1e-12
    assert np.allclose(exp_so3(v), R, atol=1e-9)


def test_log_near_pi():
    for axis in np.eye(3):
        for angle in (math.pi, math.pi - 1e-9, math.pi - 1e-4):
            R = Rotation.from_rotvec(axis * angle).as_matrix()
            assert np.allclose(exp_so3(log_so3(R)), R, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(rotvecs)
def test_quaternion_round_trip(w):
    R = Rotation.from_rotvec(w).as_matrix()
    q = quat_from_matrix(R)
    assert abs(np.linalg.norm(q) - 1.0) < 1e-12
    assert np.allclose(quat_to_matrix(q), R, atol=1e-12)
    ref = Rotation.from_matrix(R).as_quat(scalar_first=True)
    assert np.allclose(q, ref, atol=1e-9) or np.allclose(q, -ref, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-3.1, 3.1), min_size=3, max_size=3), )
def test_rpy_matches_scipy(v):
    v = np.array(v)
    assert np.allclose(rpy_to_matrix(v), Rotation.from_euler("xyz", v).as_matrix(), atol=1e-12)


def test_rpy_round_trip(rng):
    for _ in range(200):
        v = rng.uniform([-3, -1.5, -3], [3, 1.5, 3])
        assert np.allclose(matrix_to_rpy(rpy_to_matrix(v)), v, atol=1e-9)


def test_slerp_and_angle(rng):
    for _ in range(100):
        a = Rotation.random(random_state=rng)
        b = Rotation.random(random_state=rng)
        qa, qb = a.as_quat(scalar_first=True), b.as_quat(scalar_first=True)
        total = (a.inv() * b).magnitude()
        assert abs(quat_angle(qa, qb) - total) < 1e-9
        t = rng.uniform()
        q = slerp(qa, qb, t)
        assert abs(quat_angle(qa, q) - t * total) < 1e-9
        assert np.array_equal(slerp(qa, qb, 0.0), qa)


@settings(max_examples=100, deadline=None)
@given(rotvecs)
def test_left_jacobian_inverse(w):
    assert np.allclose(left_jacobian(w) @ left_jacobian_inv(w), np.eye(3), atol=1e-8)


def test_left_jacobian_maps_rates(rng):
    h = 1e-6
    for _ in range(50):
        w, dw = rng.normal(size=3), rng.normal(size=3)
        R1 = Rotation.from_rotvec(w + h * dw).as_matrix()
        R0 = Rotation.from_rotvec(w - h * dw).as_matrix()
        omega = Rotation.from_matrix(R1 @ R0.T).as_rotvec() / (2 * h)
        assert np.allclose(left_jacobian(w) @ dw, omega, atol=1e-6)


def test_wrap_rotvec(rng):
    for _ in range(100):
        w = rng.normal(size=3) * 3
        v = wrap_rotvec(w)
        assert np.linalg.norm(v) <= math.pi + 1e-12
        assert np.allclose(exp_so3(v), exp_so3(w), atol=1e-10)


def test_random_quaternion_is_uniform(rng):
    q = np.array([random_quaternion(rng) for _ in range(20000)])
    assert np.allclose(np.linalg.norm(q, axis=1), 1.0)
    # the rotation angle of a uniform rotation has density (1 - cos t) / pi
    angle = 2 * np.arccos(np.minimum(np.abs(q[:, 0]), 1.0))
    expected_mean = math.pi / 2 + 2 / math.pi
    assert abs(angle.mean() - expected_mean) < 0.03
