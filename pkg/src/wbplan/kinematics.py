"""Forward kinematics, center of mass and Jacobians of the floating-base tree."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from wbplan import kernels
from wbplan.model import ModelError, RobotModel
from wbplan.rotations import (
    exp_so3,
    log_so3,
    quat_angle,
    quat_conj,
    quat_from_matrix,
    quat_mul,
    quat_to_matrix,
    quat_to_rotvec,
    slerp,
)

DEFAULT_ROTATION_WEIGHT = 0.2  # m per rad in the SE(3) metric


@dataclass(frozen=True, eq=False)
class Transform:
    """Rigid transform: translation and unit quaternion ``(w, x, y, z)``."""

    translation: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=float)
        n = float(np.linalg.norm(q))
        if abs(n - 1.0) > 1e-9:
            if n == 0.0:
                raise ValueError("rotation quaternion has zero norm")
            q = q / n
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))

    @classmethod
    def identity(cls) -> "Transform":
        return cls(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def from_matrix(cls, R, t) -> "Transform":
        return cls(np.array(t, dtype=float), quat_from_matrix(R))

    @classmethod
    def from_rotvec(cls, t, rotvec) -> "Transform":
        return cls.from_matrix(exp_so3(rotvec), t)

    @property
    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def rotvec(self) -> np.ndarray:
        return quat_to_rotvec(self.rotation)

    def as_vector(self) -> np.ndarray:
        """``[x, y, z, rx, ry, rz]`` with a rotation-vector orientation."""
        return np.r_[self.translation, self.rotvec()]

    def __matmul__(self, other: "Transform") -> "Transform":
        return Transform(
            self.translation + self.matrix @ other.translation,
            quat_mul(self.rotation, other.rotation),
        )

    def inverse(self) -> "Transform":
        qi = quat_conj(self.rotation)
        return Transform(-(quat_to_matrix(qi) @ self.translation), qi)

    def apply(self, p) -> np.ndarray:
        return self.translation + self.matrix @ np.asarray(p, dtype=float)


class KinematicsCache:
    """World pose of every link for one configuration.

    Built once per configuration; frame poses, the CoM and all Jacobians
    are then read off without recomputing the tree.
    """

    __slots__ = ("model", "q", "Rw", "pw", "aw", "_com")

    def __init__(self, model: RobotModel, q):
        q = np.ascontiguousarray(q, dtype=float)
        if q.shape != (model.dim,):
            raise ModelError(f"configuration has shape {q.shape}, expected ({model.dim},)")
        self.model = model
        self.q = q
        self.Rw, self.pw, self.aw = kernels.forward(
            q, model.parent, model.jtype, model.axis, model.origin_R, model.origin_t, model.qidx
        )
        self._com = None

    @property
    def total_mass(self) -> float:
        return self.model.total_mass

    def frame_pose(self, frame: str) -> tuple[np.ndarray, np.ndarray]:
        """World ``(R, p)`` of a link, end-effector or foot frame."""
        link, R_off, t_off = self.model.frame(frame)
        R = self.Rw[link]
        return R @ R_off, self.pw[link] + R @ t_off

    def frame_transform(self, frame: str) -> Transform:
        R, p = self.frame_pose(frame)
        return Transform.from_matrix(R, p)

    def com(self) -> np.ndarray:
        if self._com is None:
            if not self.model.total_mass > 0.0:
                raise ModelError("total mass is zero")
            m = self.model
            self._com = kernels.center_of_mass(self.Rw, self.pw, m.mass, m.com_local)
        return self._com

    def jacobian(self, frame: str, out: np.ndarray | None = None) -> np.ndarray:
        """6 x (N+6) geometric Jacobian ``[linear; angular]`` of a frame."""
        m = self.model
        link, _, _ = m.frame(frame)
        _, p = self.frame_pose(frame)
        if out is None:
            out = np.empty((6, m.dim))
        return kernels.point_jacobian(self.q, self.pw, self.aw, m.jtype, m.qidx, _chain(m, link), p, out)

    def com_jacobian(self, out: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        m = self.model
        if not m.total_mass > 0.0:
            raise ModelError("total mass is zero")
        if out is None:
            out = np.empty((3, m.dim))
        com = kernels.com_jacobian(self.q, self.Rw, self.pw, self.aw, m.parent, m.jtype, m.qidx, m.mass, m.com_local, out)
        self._com = com
        return com, out


def _chain(model: RobotModel, link: int) -> np.ndarray:
    cache = model.__dict__.setdefault("_chain_cache", {})
    chain = cache.get(link)
    if chain is None:
        chain = np.flatnonzero(model.ancestors[link]).astype(np.intp)
        cache[link] = chain
    return chain


def fk(model: RobotModel, q, frame: str) -> Transform:
    """World pose of ``frame`` at configuration ``q``."""
    model.frame(frame)
    return KinematicsCache(model, q).frame_transform(frame)


def com(model: RobotModel, q) -> np.ndarray:
    return KinematicsCache(model, q).com().copy()


def jacobian(model: RobotModel, q, frame: str) -> np.ndarray:
    model.frame(frame)
    return KinematicsCache(model, q).jacobian(frame)


def com_jacobian(model: RobotModel, q) -> np.ndarray:
    return KinematicsCache(model, q).com_jacobian()[1]


def pose_difference(a: Transform, b: Transform) -> np.ndarray:
    """6-vector ``a ⊖ b``: translation difference and world-frame rotation log."""
    dR = a.matrix @ b.matrix.T
    return np.r_[a.translation - b.translation, log_so3(dR)]


# ------------------------------------------------------------------ SE(3)
def se3_distance(a: Transform, b: Transform, rotation_weight: float = DEFAULT_ROTATION_WEIGHT) -> float:
    """``|t_a - t_b| + w * angle(R_a^T R_b)``; the angle is the quaternion geodesic."""
    dt = a.translation - b.translation
    return math.sqrt(float(dt @ dt)) + rotation_weight * quat_angle(a.rotation, b.rotation)


def se3_interpolate(a: Transform, b: Transform, d: float) -> Transform:
    """Linear in translation, slerp in rotation; exact at ``d`` in {0, 1}."""
    if d == 0.0:
        return Transform(a.translation.copy(), a.rotation.copy())
    if d == 1.0:
        return Transform(b.translation.copy(), b.rotation.copy())
    t = a.translation + d * (b.translation - a.translation)
    return Transform(t, slerp(a.rotation, b.rotation, d))
