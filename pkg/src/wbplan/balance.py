"""Quasi-static balance: support polygons and the balance predicate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from wbplan.kinematics import KinematicsCache, Transform
from wbplan.model import RobotModel
from wbplan.rotations import quat_angle


class DegeneratePolygonError(ValueError):
    """Support points are collinear or coincident."""


def convex_hull(points) -> np.ndarray:
    """Counter-clockwise hull vertices (monotone chain, collinear points dropped)."""
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0.0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0.0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def polygon_area(poly) -> float:
    x, y = np.asarray(poly).T
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def halfplanes(poly) -> tuple[np.ndarray, np.ndarray]:
    """Outward unit normals ``n`` and offsets ``b`` so that inside means ``n @ p <= b``."""
    poly = np.asarray(poly, dtype=float)
    edges = np.roll(poly, -1, axis=0) - poly
    normals = np.column_stack([edges[:, 1], -edges[:, 0]])
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    return normals, np.einsum("ij,ij->i", normals, poly)


def point_in_polygon(p, poly, margin: float = 0.0) -> bool:
    """Strict containment in the polygon eroded by ``margin``."""
    n, b = halfplanes(poly)
    return bool(np.all(n @ np.asarray(p, dtype=float) < b - margin))


@dataclass(frozen=True, eq=False)
class BalanceSpec:
    """Stance feet pinned at world poses plus CoM-in-support-polygon.

    ``targets[k]`` is the fixed world pose of ``stance_feet[k]``.
    """

    stance_feet: tuple[str, ...]
    targets: tuple[Transform, ...]
    com_margin: float = 0.0
    feet_pos_tol: float = 1e-3
    feet_rot_tol: float = 1e-2
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "stance_feet", tuple(self.stance_feet))
        object.__setattr__(self, "targets", tuple(self.targets))
        if not self.stance_feet:
            raise ValueError("balance needs at least one stance foot")
        if len(self.targets) != len(self.stance_feet):
            raise ValueError("one target pose per stance foot is required")
        if self.com_margin < 0.0:
            raise ValueError("com_margin must be >= 0")

    @classmethod
    def from_configuration(cls, model: RobotModel, q, feet=None, **kwargs) -> "BalanceSpec":
        """Pin the given feet (default: all feet) where they are at ``q``."""
        kin = KinematicsCache(model, q)
        feet = tuple(model.feet) if feet is None else tuple(feet)
        return cls(feet, tuple(kin.frame_transform(f) for f in feet), **kwargs)


def support_polygon(model: RobotModel, spec: BalanceSpec) -> np.ndarray:
    """Convex hull of all stance-foot corners at their target poses, CCW."""
    cached = spec._cache.get(("poly", id(model)))
    if cached is not None:
        return cached
    pts = []
    for name, target in zip(spec.stance_feet, spec.targets):
        foot = model.feet[name]
        R = target.matrix
        for cx, cy in foot.corners:
            pts.append((target.translation + R @ np.array([cx, cy, 0.0]))[:2])
    hull = convex_hull(pts)
    if len(hull) < 3 or abs(polygon_area(hull)) < 1e-12:
        raise DegeneratePolygonError("support polygon is degenerate (collinear support points)")
    spec._cache[("poly", id(model))] = hull
    return hull


def support_halfplanes(model: RobotModel, spec: BalanceSpec) -> tuple[np.ndarray, np.ndarray]:
    key = ("hp", id(model))
    hp = spec._cache.get(key)
    if hp is None:
        hp = halfplanes(support_polygon(model, spec))
        spec._cache[key] = hp
    return hp


def feet_errors(kin: KinematicsCache, spec: BalanceSpec) -> list[tuple[float, float]]:
    """Position and rotation error of each stance foot."""
    out = []
    for name, target in zip(spec.stance_feet, spec.targets):
        t = kin.frame_transform(name)
        out.append((float(np.linalg.norm(t.translation - target.translation)), quat_angle(t.rotation, target.rotation)))
    return out


def com_margin_violation(kin: KinematicsCache, model: RobotModel, spec: BalanceSpec) -> float:
    """``max_j n_j @ com_xy - (b_j - margin)``; negative means strictly inside."""
    n, b = support_halfplanes(model, spec)
    return float(np.max(n @ kin.com()[:2] - (b - spec.com_margin)))


def is_balanced(model: RobotModel, q, spec: BalanceSpec, kin: KinematicsCache | None = None) -> bool:
    if kin is None:
        kin = KinematicsCache(model, q)
    for pos_err, rot_err in feet_errors(kin, spec):
        if pos_err > spec.feet_pos_tol or rot_err > spec.feet_rot_tol:
            return False
    return com_margin_violation(kin, model, spec) < 0.0
