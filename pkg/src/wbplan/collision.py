"""Validity checking: self collision, obstacles, voxels and balance.

Spheres and capsules are both treated as swept spheres around a segment
(a sphere is a zero-length capsule), boxes as oriented solid boxes and
occupied voxels as axis-aligned cubes.  A pair collides when its
penetration depth is strictly positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from wbplan import kernels
from wbplan.balance import BalanceSpec, is_balanced
from wbplan.kinematics import KinematicsCache
from wbplan.metrics import SpaceMetrics
from wbplan.model import Primitive, RobotModel, Scene
from wbplan.rotations import exp_so3

_EYE = np.eye(3)


@dataclass(frozen=True)
class CollisionReport:
    """Outcome of :func:`check_collision`.

    ``first_contact`` is ``((name_a, name_b), depth)`` for the first
    colliding pair found, or ``None``.
    """

    in_collision: bool
    first_contact: tuple | None = None

    def __post_init__(self):
        if not self.in_collision and self.first_contact is not None:
            raise ValueError("a collision-free report carries no contact")


class _Shape:
    """A primitive posed in the world, with its bounding box."""

    __slots__ = ("box", "a", "b", "r", "c", "R", "h", "lo", "hi")

    def __init__(self, box, a=None, b=None, r=0.0, c=None, R=None, h=None):
        self.box = box
        self.a, self.b, self.r = a, b, r
        self.c, self.R, self.h = c, R, h
        if box:
            ext = np.abs(R) @ h
            self.lo, self.hi = c - ext, c + ext
        else:
            self.lo = np.minimum(a, b) - r
            self.hi = np.maximum(a, b) + r


def _pose_primitive(prim: Primitive, R, p, local_R=None) -> _Shape:
    if prim.kind == "box":
        Rb = R @ (local_R if local_R is not None else exp_so3(prim.rotvec))
        return _Shape(True, c=R @ prim.a + p, R=np.ascontiguousarray(Rb), h=prim.half_extents)
    a = R @ prim.a + p
    b = a if prim.kind == "sphere" else R @ prim.b + p
    return _Shape(False, a=a, b=b, r=prim.radius)


_SIGNS = np.array([[i, j] for i in (-1.0, 1.0) for j in (-1.0, 1.0)])


def _box_edges(s: _Shape):
    """The 12 edges of a posed box as segment end points."""
    for axis in range(3):
        u, v = [k for k in range(3) if k != axis]
        for su, sv in _SIGNS:
            local = np.zeros(3)
            local[u], local[v] = su * s.h[u], sv * s.h[v]
            offset = s.R[:, axis] * s.h[axis]
            mid = s.c + s.R @ local
            yield mid - offset, mid + offset


def _box_box_gap(s: _Shape, t: _Shape) -> float:
    # a closest pair of two disjoint boxes always has a point on an edge of one box
    d = min(kernels.segment_box_distance(a, b, t.c, t.R, t.h) for a, b in _box_edges(s))
    return min(d, min(kernels.segment_box_distance(a, b, s.c, s.R, s.h) for a, b in _box_edges(t)))


def penetration(s: _Shape, t: _Shape, exact_gap: bool = True) -> float:
    """Penetration depth of two posed shapes (negative: separation distance).

    With ``exact_gap=False`` separated box pairs report the separating-axis
    gap, a lower bound on the distance with the same sign; that is all the
    collision test needs.
    """
    if not s.box and not t.box:
        return s.r + t.r - kernels.segment_segment_distance(s.a, s.b, t.a, t.b)
    if s.box and t.box:
        depth = kernels.box_box_penetration(s.c, s.R, s.h, t.c, t.R, t.h)
        if depth > 0.0 or not exact_gap:
            return depth
        return -_box_box_gap(s, t)
    if s.box:
        s, t = t, s
    dist = kernels.segment_box_distance(s.a, s.b, t.c, t.R, t.h)
    if dist > 0.0:
        return s.r - dist
    return s.r - kernels.segment_box_penetration(s.a, s.b, t.c, t.R, t.h)


def primitive_penetration(p: Primitive, q: Primitive) -> float:
    """Penetration depth of two world-frame primitives."""
    return penetration(_pose_primitive(p, _EYE, np.zeros(3)), _pose_primitive(q, _EYE, np.zeros(3)))


def _overlap(s: _Shape, t: _Shape) -> bool:
    return bool(np.all(s.lo <= t.hi) and np.all(t.lo <= s.hi))


# ------------------------------------------------------------ cached layouts
def _robot_layout(model: RobotModel):
    cached = model.__dict__.get("_collision_layout")
    if cached is not None:
        return cached
    link_index = {name: i for i, name in enumerate(model.link_names)}
    prims = [(li, prim, exp_so3(prim.rotvec) if prim.kind == "box" else None)
             for li, prim in model.collision_primitives]
    by_link: dict[int, list[int]] = {}
    for k, (li, _, _) in enumerate(prims):
        by_link.setdefault(li, []).append(k)
    pairs = []
    for a, b in model.self_collision_pairs:
        ka = by_link.get(link_index[a], [])
        kb = by_link.get(link_index[b], [])
        pairs.append(((a, b), [(i, j) for i in ka for j in kb]))
    layout = (prims, pairs)
    model.__dict__["_collision_layout"] = layout
    return layout


def _scene_layout(scene: Scene):
    cached = scene.__dict__.get("_collision_layout")
    if cached is not None:
        return cached
    obstacles = [_pose_primitive(p, _EYE, np.zeros(3)) for p in scene.obstacles]
    grid = scene.voxel_grid
    if grid is not None and len(grid.cells):
        centers = grid.centers()
        half = 0.5 * grid.resolution
        voxels = (centers, half, np.full(3, half))
    else:
        voxels = None
    layout = (obstacles, voxels)
    scene.__dict__["_collision_layout"] = layout
    return layout


def posed_shapes(model: RobotModel, q, kin: KinematicsCache | None = None) -> list[_Shape]:
    kin = kin or KinematicsCache(model, q)
    prims, _ = _robot_layout(model)
    return [_pose_primitive(prim, kin.Rw[li], kin.pw[li], lR) for li, prim, lR in prims]


# ------------------------------------------------------------------- checks
def check_collision(model: RobotModel, scene: Scene | None, q, kin: KinematicsCache | None = None) -> CollisionReport:
    """First contact among self pairs, then obstacles, then occupied voxels."""
    q = model.check_configuration(q)
    prims, pairs = _robot_layout(model)
    shapes = posed_shapes(model, q, kin)

    for names, members in pairs:
        for i, j in members:
            s, t = shapes[i], shapes[j]
            if _overlap(s, t):
                depth = penetration(s, t, exact_gap=False)
                if depth > 0.0:
                    return CollisionReport(True, (names, depth))
    if scene is None:
        return CollisionReport(False)

    obstacles, voxels = _scene_layout(scene)
    link_names = model.link_names
    for k, s in enumerate(shapes):
        for o, t in enumerate(obstacles):
            if _overlap(s, t):
                depth = penetration(s, t, exact_gap=False)
                if depth > 0.0:
                    return CollisionReport(True, ((link_names[prims[k][0]], f"obstacle {o}"), depth))
    if voxels is not None:
        centers, half, hvec = voxels
        for k, s in enumerate(shapes):
            near = np.flatnonzero(np.all((centers >= s.lo - half) & (centers <= s.hi + half), axis=1))
            for v in near:
                t = _Shape(True, c=centers[v], R=_EYE, h=hvec)
                depth = penetration(s, t, exact_gap=False)
                if depth > 0.0:
                    cell = tuple(int(x) for x in scene.voxel_grid.cells[v])
                    return CollisionReport(True, ((link_names[prims[k][0]], f"voxel {cell}"), depth))
    return CollisionReport(False)


def within_joint_bounds(model: RobotModel, q) -> bool:
    j = np.asarray(q, dtype=float)[6:]
    return bool(np.all(j >= model.joint_lower) and np.all(j <= model.joint_upper))


def is_state_valid(model: RobotModel, scene: Scene | None, q, balance: BalanceSpec | None,
                   metrics: SpaceMetrics | None = None) -> bool:
    """Joint bounds, collision freedom and (if given) static balance."""
    if metrics is not None:
        metrics.n_evaluations += 1
    q = model.check_configuration(q)
    if not within_joint_bounds(model, q):
        return False
    kin = KinematicsCache(model, q)
    if balance is not None and not is_balanced(model, q, balance, kin):
        return False
    return not check_collision(model, scene, q, kin).in_collision


def check_motion(space, a, b, resolution: float = 0.05) -> bool:
    """Validate the motion ``a -> b`` at states spaced by at most ``resolution``.

    ``space`` supplies ``distance``, ``interpolate`` and ``is_valid``.  The
    number of segments is ``ceil(distance / resolution)``; both endpoints
    are evaluated.  A failed interpolation makes the motion invalid.
    """
    from wbplan.spaces import InterpolationError

    if not resolution > 0.0:
        raise ValueError("resolution must be positive")
    dist = space.distance(a, b)
    n = int(math.ceil(dist / resolution))
    if n == 0:
        return space.is_valid(a)
    if not space.is_valid(b):
        return False
    for k in range(1, n):
        try:
            state = space.interpolate(a, b, k / n)
        except InterpolationError:
            return False
        if not space.is_valid(state):
            return False
    return space.is_valid(a)
