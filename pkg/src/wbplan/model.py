"""Robot and scene data model with loaders/savers for the text formats.

A configuration is a flat float array of length ``N + 6``::

    [base_position (3), base_orientation as rotation vector (3), joints (N)]

Joint values follow the declaration order of the non-fixed joints.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from wbplan import _textfmt as tf
from wbplan._textfmt import ParseError
from wbplan.rotations import exp_so3, rpy_to_matrix

__all__ = [
    "ParseError",
    "ModelError",
    "Primitive",
    "JointSpec",
    "LinkSpec",
    "FrameSpec",
    "FootSpec",
    "RobotModel",
    "VoxelGrid",
    "Scene",
    "load_robot",
    "save_robot",
    "parse_robot",
    "load_scene",
    "save_scene",
    "save_trajectory",
    "load_trajectory",
    "make_configuration",
    "split_configuration",
]

FIXED, REVOLUTE, PRISMATIC = 0, 1, 2
_JOINT_TYPES = {"fixed": FIXED, "revolute": REVOLUTE, "prismatic": PRISMATIC}
SPHERE, CAPSULE, BOX = 0, 1, 2


class ModelError(ValueError):
    """A robot, scene or trajectory violates a structural invariant."""


@dataclass(frozen=True, eq=False)
class Primitive:
    """Collision primitive in its parent frame (link frame or world).

    ``sphere``: ``a`` is the center. ``capsule``: segment ``a``-``b``.
    ``box``: ``a`` is the center, ``half_extents`` the half sizes and
    ``rotvec`` the box orientation.
    """

    kind: str
    radius: float = 0.0
    a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b: np.ndarray = field(default_factory=lambda: np.zeros(3))
    half_extents: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotvec: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def sphere(cls, center, radius: float) -> "Primitive":
        return cls("sphere", float(radius), np.asarray(center, float))

    @classmethod
    def capsule(cls, p0, p1, radius: float) -> "Primitive":
        return cls("capsule", float(radius), np.asarray(p0, float), np.asarray(p1, float))

    @classmethod
    def box(cls, half_extents, center=(0.0, 0.0, 0.0), rotvec=(0.0, 0.0, 0.0)) -> "Primitive":
        return cls(
            "box",
            0.0,
            np.asarray(center, float),
            half_extents=np.asarray(half_extents, float),
            rotvec=np.asarray(rotvec, float),
        )

    def validate(self, owner: str) -> None:
        if self.kind in ("sphere", "capsule"):
            if not self.radius > 0.0:
                raise ModelError(f"{owner}: {self.kind} radius must be positive")
        elif self.kind == "box":
            if not np.all(self.half_extents > 0.0):
                raise ModelError(f"{owner}: box half extents must be positive")
        else:
            raise ModelError(f"{owner}: unknown primitive kind '{self.kind}'")
        values = np.concatenate([[self.radius], self.a, self.b, self.half_extents, self.rotvec])
        if not np.all(np.isfinite(values)):
            raise ModelError(f"{owner}: non-finite primitive parameters")

    # link-file encoding: sphere = c r ; capsule = p0 p1 r ; box = h c w
    def to_link_entry(self) -> tuple[str, str]:
        if self.kind == "sphere":
            return "sphere", tf.fmt(np.r_[self.a, self.radius])
        if self.kind == "capsule":
            return "capsule", tf.fmt(np.r_[self.a, self.b, self.radius])
        return "box", tf.fmt(np.r_[self.half_extents, self.a, self.rotvec])


@dataclass(frozen=True, eq=False)
class JointSpec:
    name: str
    parent_link: str
    child_link: str
    type: str = "revolute"
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    lower_bound: float = 0.0
    upper_bound: float = 0.0
    origin_xyz: np.ndarray = field(default_factory=lambda: np.zeros(3))
    origin_rpy: np.ndarray = field(default_factory=lambda: np.zeros(3))
    group: str = "other"


@dataclass(frozen=True, eq=False)
class LinkSpec:
    name: str
    mass: float = 0.0
    com_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    collision_primitives: tuple[Primitive, ...] = ()


@dataclass(frozen=True, eq=False)
class FrameSpec:
    """Named frame rigidly attached to a link."""

    name: str
    link: str
    xyz: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rpy: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True, eq=False)
class FootSpec(FrameSpec):
    corners: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))


class RobotModel:
    """Immutable floating-base kinematic tree.

    Links are re-indexed in breadth-first order from the root so that a
    parent always precedes its children; the flat arrays built here are
    what the compiled kernels consume.
    """

    def __init__(
        self,
        links: list[LinkSpec],
        joints: list[JointSpec],
        end_effectors: list[FrameSpec] = (),
        feet: list[FootSpec] = (),
        self_collision_pairs: list[tuple[str, str]] = (),
        name: str = "robot",
    ):
        self.name = name
        self.links = tuple(links)
        self.joints = tuple(joints)
        self.end_effectors = {f.name: f for f in end_effectors}
        self.feet = {f.name: f for f in feet}
        self.self_collision_pairs = tuple((a, b) for a, b in self_collision_pairs)
        self._validate_and_build()

    # ------------------------------------------------------------------ build
    def _validate_and_build(self) -> None:
        link_by_name: dict[str, LinkSpec] = {}
        for link in self.links:
            if link.name in link_by_name:
                raise ModelError(f"link '{link.name}': duplicate name")
            if not (np.isfinite(link.mass) and link.mass >= 0.0):
                raise ModelError(f"link '{link.name}': mass must be >= 0")
            for prim in link.collision_primitives:
                prim.validate(f"link '{link.name}'")
            link_by_name[link.name] = link
        if not link_by_name:
            raise ModelError("robot has no links")
        if not any(link.mass > 0.0 for link in self.links):
            raise ModelError("robot: at least one link must have positive mass")

        child_joint: dict[str, JointSpec] = {}
        seen_joints = set()
        for j in self.joints:
            if j.name in seen_joints:
                raise ModelError(f"joint '{j.name}': duplicate name")
            seen_joints.add(j.name)
            for ref in (j.parent_link, j.child_link):
                if ref not in link_by_name:
                    raise ModelError(f"joint '{j.name}': unknown link '{ref}'")
            if j.type not in _JOINT_TYPES:
                raise ModelError(f"joint '{j.name}': unknown type '{j.type}'")
            if j.child_link in child_joint:
                raise ModelError(
                    f"joint '{j.name}': link '{j.child_link}' already has parent joint "
                    f"'{child_joint[j.child_link].name}'"
                )
            if j.parent_link == j.child_link:
                raise ModelError(f"joint '{j.name}': parent and child are the same link (cycle)")
            if j.type != "fixed":
                if not j.lower_bound <= j.upper_bound:
                    raise ModelError(f"joint '{j.name}': lower_bound > upper_bound")
                if abs(float(np.linalg.norm(j.axis)) - 1.0) > 1e-9:
                    raise ModelError(f"joint '{j.name}': axis must have unit norm")
            child_joint[j.child_link] = j

        roots = [l.name for l in self.links if l.name not in child_joint]
        if len(roots) != 1:
            raise ModelError(f"joint graph must have a single root link, found {roots or 'none (cycle)'}")
        self.root_link = roots[0]

        children: dict[str, list[JointSpec]] = {l.name: [] for l in self.links}
        for j in self.joints:
            children[j.parent_link].append(j)
        order = [self.root_link]
        queue = deque([self.root_link])
        while queue:
            name = queue.popleft()
            for j in children[name]:
                order.append(j.child_link)
                queue.append(j.child_link)
        if len(order) != len(self.links):
            missing = sorted(set(link_by_name) - set(order))
            raise ModelError(f"joint graph contains a cycle or disconnected links: {missing}")

        movable = [j for j in self.joints if j.type != "fixed"]
        self.joint_names = tuple(j.name for j in movable)
        self.n_joints = len(movable)
        self.dim = self.n_joints + 6
        qindex = {j.name: 6 + k for k, j in enumerate(movable)}
        self.joint_groups = tuple(j.group for j in movable)
        self.joint_lower = np.array([j.lower_bound for j in movable], dtype=float)
        self.joint_upper = np.array([j.upper_bound for j in movable], dtype=float)

        L = len(order)
        self.link_names = tuple(order)
        self.link_index = {n: i for i, n in enumerate(order)}
        self.parent = np.full(L, -1, dtype=np.intp)
        self.jtype = np.zeros(L, dtype=np.intp)
        self.axis = np.zeros((L, 3))
        self.origin_R = np.tile(np.eye(3), (L, 1, 1))
        self.origin_t = np.zeros((L, 3))
        self.qidx = np.full(L, -1, dtype=np.intp)
        self.mass = np.zeros(L)
        self.com_local = np.zeros((L, 3))
        for i, name in enumerate(order):
            link = link_by_name[name]
            self.mass[i] = link.mass
            self.com_local[i] = link.com_offset
            if name == self.root_link:
                continue
            j = child_joint[name]
            self.parent[i] = self.link_index[j.parent_link]
            self.jtype[i] = _JOINT_TYPES[j.type]
            self.axis[i] = j.axis
            self.origin_R[i] = rpy_to_matrix(j.origin_rpy)
            self.origin_t[i] = j.origin_xyz
            self.qidx[i] = qindex.get(j.name, -1)
        self.total_mass = float(self.mass.sum())

        # ancestors[i, k] is True when link k lies on the path root..i
        self.ancestors = np.zeros((L, L), dtype=bool)
        for i in range(L):
            k = i
            while k >= 0:
                self.ancestors[i, k] = True
                k = self.parent[k]

        self.frames: dict[str, tuple[int, np.ndarray, np.ndarray]] = {}
        for i, name in enumerate(order):
            self.frames[name] = (i, np.eye(3), np.zeros(3))
        for kind, table in (("end-effector", self.end_effectors), ("foot", self.feet)):
            for fname, fr in table.items():
                if fr.link not in self.link_index:
                    raise ModelError(f"{kind} '{fname}': unknown link '{fr.link}'")
                if fname in self.frames:
                    raise ModelError(f"{kind} '{fname}': name clashes with another frame")
                self.frames[fname] = (self.link_index[fr.link], rpy_to_matrix(fr.rpy), np.asarray(fr.xyz, float))
        for fname, foot in self.feet.items():
            c = np.asarray(foot.corners, float)
            if c.ndim != 2 or c.shape[1] != 2 or c.shape[0] < 1:
                raise ModelError(f"foot '{fname}': corners must be a list of 2D points")
        for a, b in self.self_collision_pairs:
            for ref in (a, b):
                if ref not in self.link_index:
                    raise ModelError(f"self-collision pair ({a}, {b}): unknown link '{ref}'")

        # flattened collision primitives, in link declaration order
        prims = []
        for link in self.links:
            for p in link.collision_primitives:
                prims.append((self.link_index[link.name], p))
        self.collision_primitives = tuple(prims)

        lo = np.r_[np.full(6, -np.inf), self.joint_lower]
        hi = np.r_[np.full(6, np.inf), self.joint_upper]
        self.lower = lo
        self.upper = hi

    # -------------------------------------------------------------- accessors
    @property
    def N(self) -> int:
        return self.n_joints

    def frame(self, name: str) -> tuple[int, np.ndarray, np.ndarray]:
        try:
            return self.frames[name]
        except KeyError:
            raise KeyError(f"unknown frame '{name}'") from None

    def zero_configuration(self) -> np.ndarray:
        return np.zeros(self.dim)

    def group_indices(self, group: str) -> np.ndarray:
        """Configuration indices of a joint group; ``'base'`` is the floating base."""
        if group == "base":
            return np.arange(6)
        return np.array([6 + k for k, g in enumerate(self.joint_groups) if g == group], dtype=np.intp)

    def check_configuration(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dim,):
            raise ModelError(f"configuration has shape {q.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(q)):
            raise ModelError("configuration contains non-finite entries")
        return q


def make_configuration(model: RobotModel, base_position=(0, 0, 0), base_orientation=(0, 0, 0), joint_values=None):
    q = np.zeros(model.dim)
    q[0:3] = base_position
    q[3:6] = base_orientation
    if joint_values is not None:
        q[6:] = joint_values
    return q


def split_configuration(q):
    q = np.asarray(q, dtype=float)
    return q[0:3], q[3:6], q[6:]


# ---------------------------------------------------------------- robot file
def parse_robot(text: str, name: str = "robot") -> RobotModel:
    links, joints, ees, feet, pairs = [], [], [], [], []
    for sec in tf.parse(text):
        if sec.name == "link":
            prims = []
            for key, value in sec.entries:
                where = f"link line {sec.line} key '{key}'"
                if key == "sphere":
                    v = tf.parse_floats(value, 4, where)
                    prims.append(Primitive.sphere(v[:3], v[3]))
                elif key == "capsule":
                    v = tf.parse_floats(value, 7, where)
                    prims.append(Primitive.capsule(v[:3], v[3:6], v[6]))
                elif key == "box":
                    v = tf.parse_floats(value, 9, where)
                    prims.append(Primitive.box(v[:3], v[3:6], v[6:9]))
                elif key not in ("name", "mass", "com"):
                    raise ParseError(f"[link] line {sec.line}: unknown key '{key}'")
            links.append(
                LinkSpec(
                    sec.require("name"),
                    sec.float("mass", 0.0),
                    sec.floats("com", 3, default=np.zeros(3)),
                    tuple(prims),
                )
            )
        elif sec.name == "joint":
            jtype = sec.get("type", "revolute")
            joints.append(
                JointSpec(
                    name=sec.require("name"),
                    parent_link=sec.require("parent"),
                    child_link=sec.require("child"),
                    type=jtype,
                    axis=sec.floats("axis", 3, default=[0.0, 0.0, 1.0]),
                    lower_bound=sec.float("lower", 0.0),
                    upper_bound=sec.float("upper", 0.0),
                    origin_xyz=sec.floats("xyz", 3, default=np.zeros(3)),
                    origin_rpy=sec.floats("rpy", 3, default=np.zeros(3)),
                    group=sec.get("group", "other"),
                )
            )
        elif sec.name == "endeffector":
            ees.append(
                FrameSpec(
                    sec.require("name"),
                    sec.require("link"),
                    sec.floats("xyz", 3, default=np.zeros(3)),
                    sec.floats("rpy", 3, default=np.zeros(3)),
                )
            )
        elif sec.name == "foot":
            corners = [tf.parse_floats(v, 2, f"[foot] line {sec.line} corner") for v in sec.get_all("corner")]
            feet.append(
                FootSpec(
                    sec.require("name"),
                    sec.require("link"),
                    sec.floats("xyz", 3, default=np.zeros(3)),
                    sec.floats("rpy", 3, default=np.zeros(3)),
                    corners=np.array(corners, dtype=float).reshape(-1, 2),
                )
            )
        elif sec.name == "selfcollision":
            for value in sec.get_all("pair"):
                parts = value.split()
                if len(parts) != 2:
                    raise ParseError(f"[selfcollision] line {sec.line}: pair needs two link names")
                pairs.append((parts[0], parts[1]))
        elif sec.name == "robot":
            name = sec.get("name", name)
        else:
            raise ParseError(f"line {sec.line}: unknown section [{sec.name}]")
    return RobotModel(links, joints, ees, feet, pairs, name=name)


def load_robot(path: str | Path) -> RobotModel:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return parse_robot(fh.read(), name=path.stem)


def dump_robot(model: RobotModel) -> str:
    secs = [("robot", [("name", model.name)])]
    for link in model.links:
        entries = [("name", link.name), ("mass", repr(float(link.mass))), ("com", tf.fmt(link.com_offset))]
        entries += [p.to_link_entry() for p in link.collision_primitives]
        secs.append(("link", entries))
    for j in model.joints:
        secs.append(
            (
                "joint",
                [
                    ("name", j.name),
                    ("parent", j.parent_link),
                    ("child", j.child_link),
                    ("type", j.type),
                    ("axis", tf.fmt(j.axis)),
                    ("lower", repr(float(j.lower_bound))),
                    ("upper", repr(float(j.upper_bound))),
                    ("xyz", tf.fmt(j.origin_xyz)),
                    ("rpy", tf.fmt(j.origin_rpy)),
                    ("group", j.group),
                ],
            )
        )
    for fr in model.end_effectors.values():
        secs.append(("endeffector", [("name", fr.name), ("link", fr.link), ("xyz", tf.fmt(fr.xyz)), ("rpy", tf.fmt(fr.rpy))]))
    for ft in model.feet.values():
        entries = [("name", ft.name), ("link", ft.link), ("xyz", tf.fmt(ft.xyz)), ("rpy", tf.fmt(ft.rpy))]
        entries += [("corner", tf.fmt(c)) for c in ft.corners]
        secs.append(("foot", entries))
    if model.self_collision_pairs:
        secs.append(("selfcollision", [("pair", f"{a} {b}") for a, b in model.self_collision_pairs]))
    return tf.dump(secs)


def save_robot(model: RobotModel, path: str | Path) -> None:
    Path(path).write_text(dump_robot(model), encoding="utf-8")


# ---------------------------------------------------------------- scene file
@dataclass(frozen=True, eq=False)
class VoxelGrid:
    origin: np.ndarray
    resolution: float
    cells: np.ndarray  # (k, 3) int, unique, lexicographically sorted

    def centers(self) -> np.ndarray:
        return self.origin + (self.cells + 0.5) * self.resolution


@dataclass(frozen=True, eq=False)
class Scene:
    obstacles: tuple[Primitive, ...] = ()
    voxel_grid: VoxelGrid | None = None
    roi_min: np.ndarray = field(default_factory=lambda: np.array([-1.0, -1.0, -1.0]))
    roi_max: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0, 1.0]))

    def __post_init__(self):
        for k, prim in enumerate(self.obstacles):
            prim.validate(f"obstacle {k}")
        if self.voxel_grid is not None and not self.voxel_grid.resolution > 0.0:
            raise ModelError("voxel grid resolution must be positive")
        if not np.all(np.asarray(self.roi_max) > np.asarray(self.roi_min)):
            raise ModelError("region of interest must have positive volume")


def parse_scene(text: str) -> Scene:
    obstacles = []
    grid = None
    roi_min = np.array([-1.0, -1.0, -1.0])
    roi_max = np.array([1.0, 1.0, 1.0])
    for sec in tf.parse(text):
        if sec.name == "obstacle":
            kind = sec.require("kind")
            pose = sec.floats("pose", 6, default=np.zeros(6))
            dims = sec.floats("dimensions")
            where = f"[obstacle] at line {sec.line}"
            if kind == "sphere":
                if dims.size != 1:
                    raise ParseError(f"{where}: sphere needs 'dimensions = radius'")
                obstacles.append(Primitive.sphere(pose[:3], dims[0]))
            elif kind == "capsule":
                if dims.size != 2:
                    raise ParseError(f"{where}: capsule needs 'dimensions = half_length radius'")
                R = exp_so3(pose[3:])
                p0 = pose[:3] - dims[0] * R[:, 2]
                p1 = pose[:3] + dims[0] * R[:, 2]
                obstacles.append(Primitive.capsule(p0, p1, dims[1]))
            elif kind == "box":
                if dims.size != 3:
                    raise ParseError(f"{where}: box needs 'dimensions = hx hy hz'")
                obstacles.append(Primitive.box(dims, pose[:3], pose[3:]))
            else:
                raise ParseError(f"{where}: unknown obstacle kind '{kind}'")
        elif sec.name == "voxels":
            resolution = sec.float("resolution")
            if not resolution > 0.0:
                raise ModelError(f"[voxels] at line {sec.line}: resolution must be positive")
            cells = [tf.parse_floats(v, 3, f"[voxels] line {sec.line} cell") for v in sec.get_all("cell")]
            arr = np.array(cells, dtype=float).reshape(-1, 3)
            if not np.all(arr == np.round(arr)):
                raise ParseError(f"[voxels] at line {sec.line}: cell indices must be integers")
            arr = np.unique(arr.astype(np.int64), axis=0)
            grid = VoxelGrid(sec.floats("origin", 3, default=np.zeros(3)), resolution, arr)
        elif sec.name == "roi":
            roi_min = sec.floats("min", 3)
            roi_max = sec.floats("max", 3)
        else:
            raise ParseError(f"line {sec.line}: unknown section [{sec.name}]")
    return Scene(tuple(obstacles), grid, roi_min, roi_max)


def load_scene(path: str | Path) -> Scene:
    with open(path, encoding="utf-8") as fh:
        return parse_scene(fh.read())


def dump_scene(scene: Scene) -> str:
    secs = []
    for prim in scene.obstacles:
        if prim.kind == "sphere":
            secs.append(("obstacle", [("kind", "sphere"), ("pose", tf.fmt(np.r_[prim.a, 0.0, 0.0, 0.0])), ("dimensions", tf.fmt(prim.radius))]))
        elif prim.kind == "box":
            secs.append(("obstacle", [("kind", "box"), ("pose", tf.fmt(np.r_[prim.a, prim.rotvec])), ("dimensions", tf.fmt(prim.half_extents))]))
        else:
            center = 0.5 * (prim.a + prim.b)
            axis = prim.b - prim.a
            half = 0.5 * float(np.linalg.norm(axis))
            rv = _rotvec_z_to(axis)
            secs.append(("obstacle", [("kind", "capsule"), ("pose", tf.fmt(np.r_[center, rv])), ("dimensions", tf.fmt([half, prim.radius]))]))
    if scene.voxel_grid is not None:
        g = scene.voxel_grid
        entries = [("origin", tf.fmt(g.origin)), ("resolution", repr(float(g.resolution)))]
        entries += [("cell", " ".join(str(int(c)) for c in cell)) for cell in g.cells]
        secs.append(("voxels", entries))
    secs.append(("roi", [("min", tf.fmt(scene.roi_min)), ("max", tf.fmt(scene.roi_max))]))
    return tf.dump(secs)


def _rotvec_z_to(v) -> np.ndarray:
    v = np.asarray(v, float)
    n = np.linalg.norm(v)
    if n == 0.0:
        return np.zeros(3)
    v = v / n
    z = np.array([0.0, 0.0, 1.0])
    axis = np.cross(z, v)
    s = np.linalg.norm(axis)
    angle = np.arctan2(s, v[2])
    if s < 1e-12:
        return np.zeros(3) if v[2] > 0 else np.array([np.pi, 0.0, 0.0])
    return axis / s * angle


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(dump_scene(scene), encoding="utf-8")


# ----------------------------------------------------------- trajectory file
def save_trajectory(traj, path: str | Path, meta: dict | None = None) -> None:
    """Write waypoints one per line after a ``key = value`` header.

    The header always carries ``dim``; ``meta`` adds further keys (space
    kind, end-effector frames, task name) needed to revalidate the motion.
    """
    rows = [np.asarray(q, dtype=float) for q in traj]
    if not rows:
        raise ModelError("cannot save an empty trajectory")
    dim = rows[0].shape
    for k, q in enumerate(rows):
        if q.ndim != 1 or q.shape != dim:
            raise ModelError(f"waypoint {k} has shape {q.shape}, expected {dim}")
    lines = [f"dim = {dim[0]}"]
    for key, value in (meta or {}).items():
        if "=" in str(key) or "\n" in str(value):
            raise ModelError(f"bad trajectory header entry '{key}'")
        lines.append(f"{key} = {value}")
    lines += [tf.fmt(q) for q in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_trajectory(path: str | Path, with_meta: bool = False):
    """Waypoints of a trajectory file (and its header dict if ``with_meta``)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("dim"):
        raise ParseError(f"{path}: missing 'dim = <n>' header")
    meta = {}
    k = 0
    while k < len(lines) and "=" in lines[k]:
        key, _, value = lines[k].partition("=")
        meta[key.strip()] = value.strip()
        k += 1
    try:
        dim = int(meta["dim"])
    except ValueError as exc:
        raise ParseError(f"{path}: bad header '{lines[0]}'") from exc
    traj = []
    for lineno, line in enumerate(lines[k:], start=k + 1):
        q = tf.parse_floats(line, where=f"{path} line {lineno}")
        if q.size != dim:
            raise ModelError(f"{path} line {lineno}: waypoint has {q.size} values, expected {dim}")
        traj.append(q)
    if not traj:
        raise ModelError(f"{path}: trajectory has no waypoints")
    return (traj, meta) if with_meta else traj
