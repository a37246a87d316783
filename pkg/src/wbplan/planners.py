"""Standard sampling-based planners over the balanced state spaces.

The planners only call the space primitives (``sample_uniform``,
``sample_uniform_near``, ``interpolate``, ``distance``, ``is_valid`` and
``check_motion``); balance is entirely the space's business.  Each run is
limited by a wall-clock budget and, optionally, an iteration cap.  Runs
that end on the cap are deterministic given the seeds.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from wbplan.kinematics import KinematicsCache, Transform
from wbplan.metrics import SpaceMetrics
from wbplan.model import RobotModel
from wbplan.rotations import quat_angle
from wbplan.spaces import InterpolationError, SamplingError, SpaceState

__all__ = [
    "GoalRegion",
    "PlannerQuery",
    "PlanResult",
    "compute_costs",
    "densify",
    "rrt",
    "rrt_connect",
    "prm",
    "est",
    "sbl",
    "PLANNERS",
    "plan",
    "DEFAULT_PARAMS",
]

SOLVED = "solved"
TIMEOUT = "timeout"
INVALID_START = "invalid_start"
INVALID_GOAL = "invalid_goal"

DEFAULT_PARAMS = {
    "cspace": {"range": 0.5},
    "eespace": {"range": 0.15 + 0.2 * 0.3},
    "meta": {"range": 0.15 + 0.2 * 0.3},
}


@dataclass(frozen=True, eq=False)
class GoalRegion:
    """End-effector targets with a position / angle tolerance."""

    frames: tuple[str, ...]
    targets: tuple[Transform, ...]
    pos_tol: float = 0.02
    rot_tol: float = 0.1
    position_only: bool = False

    def satisfied(self, model: RobotModel, q) -> bool:
        kin = KinematicsCache(model, q)
        for f, target in zip(self.frames, self.targets):
            x = kin.frame_transform(f)
            if np.linalg.norm(x.translation - target.translation) > self.pos_tol:
                return False
            if not self.position_only and quat_angle(x.rotation, target.rotation) > self.rot_tol:
                return False
        return True


@dataclass(eq=False)
class PlannerQuery:
    """A single planning problem.

    ``goal`` is a concrete state (required by bidirectional planners and
    PRM); ``goal_region`` optionally replaces exact arrival as the
    termination test of single-tree planners.
    """

    space: object
    start: SpaceState
    goal: SpaceState | None = None
    goal_region: GoalRegion | None = None
    time_budget: float = 60.0
    rng_seed: int = 0
    params: dict = field(default_factory=dict)
    max_iterations: int | None = None

    def __post_init__(self):
        if not self.time_budget > 0.0:
            raise ValueError("time budget must be positive")
        if self.goal is None and self.goal_region is None:
            raise ValueError("a goal state or a goal region is required")


@dataclass(eq=False)
class PlanResult:
    status: str
    path: list = field(default_factory=list)
    metrics: SpaceMetrics = field(default_factory=SpaceMetrics)
    planning_time: float = 0.0
    iterations: int = 0
    c_cost: float | None = None
    w_cost: float | None = None
    com_cost: float | None = None
    trajectory: list = field(default_factory=list, repr=False)  # densified path the costs refer to

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


def compute_costs(path, model: RobotModel, frames=(), weights=None) -> tuple[float, float, float]:
    """Configuration length, end-effector travel and CoM travel of a path."""
    if not path:
        raise ValueError("empty path")
    Q = np.array([s.config if isinstance(s, SpaceState) else s for s in path], dtype=float)
    w = np.ones(Q.shape[1]) if weights is None else np.asarray(weights, dtype=float)
    dQ = np.diff(Q, axis=0)
    c_cost = float(np.sum(np.sqrt((dQ * dQ) @ w)))
    ee, com = [], []
    for q in Q:
        kin = KinematicsCache(model, q)
        ee.append([kin.frame_pose(f)[1] for f in frames])
        com.append(kin.com())
    w_cost = 0.0
    if frames:
        E = np.array(ee)
        w_cost = float(np.sum(np.linalg.norm(np.diff(E, axis=0), axis=2)))
    com_cost = float(np.sum(np.linalg.norm(np.diff(np.array(com), axis=0), axis=1)))
    return c_cost, w_cost, com_cost


# ------------------------------------------------------------------ support
class _Budget:
    def __init__(self, query: PlannerQuery):
        self.t0 = time.perf_counter()
        self.deadline = self.t0 + query.time_budget
        self.max_iterations = query.max_iterations
        self.iterations = 0

    def tick(self) -> bool:
        """Count one iteration; False once the budget is exhausted."""
        if self.max_iterations is not None and self.iterations >= self.max_iterations:
            return False
        if time.perf_counter() >= self.deadline:
            return False
        self.iterations += 1
        return True

    def expired(self) -> bool:
        return time.perf_counter() >= self.deadline

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0


class _Tree:
    """States with parent links and a feature matrix for nearest queries."""

    def __init__(self, space):
        self.space = space
        self.states: list[SpaceState] = []
        self.parent: list[int] = []
        self.alive: list[bool] = []
        self._F: np.ndarray | None = None

    def __len__(self):
        return len(self.states)

    def add(self, state: SpaceState, parent: int) -> int:
        f = self.space.features(state)
        n = len(self.states)
        if self._F is None:
            self._F = np.empty((64, f.size))
        elif n == len(self._F):
            self._F = np.vstack([self._F, np.empty_like(self._F)])
        self._F[n] = f
        self.states.append(state)
        self.parent.append(parent)
        self.alive.append(True)
        return n

    def distances(self, state: SpaceState) -> np.ndarray:
        d = self.space.distances(self.space.features(state), self._F[: len(self.states)])
        if not all(self.alive):
            d[~np.array(self.alive)] = np.inf
        return d

    def nearest(self, state: SpaceState) -> int:
        return int(np.argmin(self.distances(state)))

    def k_nearest(self, state: SpaceState, k: int) -> list[int]:
        d = self.distances(state)
        order = np.argsort(d, kind="stable")[:k]
        return [int(i) for i in order if np.isfinite(d[i])]

    def root_path(self, i: int) -> list[int]:
        out = []
        while i >= 0:
            out.append(i)
            i = self.parent[i]
        return out[::-1]

    def kill_subtree(self, i: int) -> None:
        dead = {i}
        for j in range(i + 1, len(self.parent)):
            if self.parent[j] in dead:
                dead.add(j)
        for j in dead:
            self.alive[j] = False


def densify(space, path) -> list:
    """The path with every intermediate state its motion checks evaluated.

    Consecutive waypoints are interpolated at ``k / n`` with
    ``n = ceil(distance / resolution)``, in travel direction, which
    reproduces the states validated by ``check_motion``.
    """
    if not path:
        return []
    out = [path[0]]
    for a, b in zip(path, path[1:]):
        n = int(math.ceil(space.distance(a, b) / space.resolution))
        for k in range(1, n):
            try:
                out.append(space.interpolate(a, b, k / n))
            except InterpolationError:
                pass
        out.append(b)
    return out


def _finish(query, status, path, budget, frames) -> PlanResult:
    """Close the run: freeze counters and time, then cost the executed trajectory."""
    space = query.space
    res = PlanResult(status, path, space.metrics.snapshot(), budget.elapsed(), budget.iterations)
    if status == SOLVED:
        res.trajectory = densify(space, path)
        res.c_cost, res.w_cost, res.com_cost = compute_costs(res.trajectory, space.model, frames)
    return res


def _frames(query) -> tuple[str, ...]:
    if query.goal_region is not None:
        return tuple(query.goal_region.frames)
    return tuple(getattr(query.space, "frames", ()))


def _reached(query, state: SpaceState, tol: float) -> bool:
    if query.goal_region is not None:
        return query.goal_region.satisfied(query.space.model, state.config)
    return query.space.distance(state, query.goal) <= tol


def _validate_endpoints(query, budget, need_goal_state: bool):
    space = query.space
    frames = _frames(query)
    if not space.is_valid(query.start):
        return _finish(query, INVALID_START, [], budget, frames)
    if need_goal_state and query.goal is None:
        raise ValueError("this planner needs a concrete goal state")
    if query.goal is not None and not space.is_valid(query.goal):
        return _finish(query, INVALID_GOAL, [], budget, frames)
    return None


def _steer(space, near: SpaceState, target: SpaceState, step: float):
    """State at most ``step`` from ``near`` toward ``target`` (``target`` itself if close)."""
    dist = space.distance(near, target)
    if dist <= step:
        return target, True
    return space.interpolate(near, target, step / dist), False


# ---------------------------------------------------------------- planners
def rrt(query: PlannerQuery) -> PlanResult:
    """Single-tree RRT with goal bias."""
    space = query.space
    budget = _Budget(query)
    frames = _frames(query)
    bad = _validate_endpoints(query, budget, need_goal_state=False)
    if bad is not None:
        return bad
    step = query.params.get("range", DEFAULT_PARAMS[space.kind]["range"])
    bias = query.params.get("goal_bias", 0.05)
    tol = query.params.get("goal_tolerance", 1e-6)
    rng = np.random.default_rng(query.rng_seed)
    tree = _Tree(space)
    tree.add(query.start, -1)
    if _reached(query, query.start, tol):
        return _finish(query, SOLVED, [query.start], budget, frames)
    while budget.tick():
        try:
            if query.goal is not None and rng.uniform() < bias:
                x_rand = query.goal
            else:
                x_rand = space.sample_uniform()
            i_near = tree.nearest(x_rand)
            near = tree.states[i_near]
            if space.distance(near, x_rand) == 0.0:
                continue
            x_new, _ = _steer(space, near, x_rand, step)
        except (SamplingError, InterpolationError):
            continue
        if not space.check_motion(near, x_new):
            continue
        i_new = tree.add(x_new, i_near)
        if _reached(query, x_new, tol):
            return _finish(query, SOLVED, [tree.states[i] for i in tree.root_path(i_new)], budget, frames)
    return _finish(query, TIMEOUT, [], budget, frames)


_TRAPPED, _ADVANCED, _REACHED = 0, 1, 2


def _extend(space, tree: _Tree, target: SpaceState, step: float, reverse: bool = False):
    """One RRT extension.  ``reverse`` validates the motion child -> parent,
    the direction in which goal-tree edges are traversed by the final path."""
    i_near = tree.nearest(target)
    near = tree.states[i_near]
    dist = space.distance(near, target)
    if dist == 0.0:
        return _REACHED, i_near
    try:
        x_new, hit = _steer(space, near, target, step)
    except InterpolationError:
        return _TRAPPED, i_near
    if not hit and space.distance(x_new, target) >= dist:
        return _TRAPPED, i_near
    ok = space.check_motion(x_new, near) if reverse else space.check_motion(near, x_new)
    if not ok:
        return _TRAPPED, i_near
    return (_REACHED if hit else _ADVANCED), tree.add(x_new, i_near)


def _connect(space, tree, target, step, budget, reverse=False):
    """Repeat extensions toward ``target``; returns the status and the last node reached (-1: none)."""
    status, last = _ADVANCED, -1
    while status == _ADVANCED and not budget.expired():
        status, idx = _extend(space, tree, target, step, reverse)
        if status != _TRAPPED:
            last = idx
    return status, last


def rrt_connect(query: PlannerQuery) -> PlanResult:
    """Bidirectional RRT.

    Each iteration one tree takes a single step of at most ``range`` toward
    a uniform sample; the other tree then extends greedily toward the new
    node until it reaches it or is trapped.  The trees swap roles every
    iteration.
    """
    space = query.space
    budget = _Budget(query)
    frames = _frames(query)
    bad = _validate_endpoints(query, budget, need_goal_state=True)
    if bad is not None:
        return bad
    step = query.params.get("range", DEFAULT_PARAMS[space.kind]["range"])
    start_tree, goal_tree = _Tree(space), _Tree(space)
    start_tree.add(query.start, -1)
    goal_tree.add(query.goal, -1)
    if space.distance(query.start, query.goal) == 0.0:
        return _finish(query, SOLVED, [query.start], budget, frames)
    ta, tb = start_tree, goal_tree
    while budget.tick():
        try:
            x_rand = space.sample_uniform()
        except SamplingError:
            continue
        status, ia = _extend(space, ta, x_rand, step, ta is goal_tree)
        if status != _TRAPPED:
            x_new = ta.states[ia]
            status, ib = _connect(space, tb, x_new, step, budget, tb is goal_tree)
            if status == _REACHED:
                pa = [ta.states[i] for i in ta.root_path(ia)]
                pb = [tb.states[i] for i in tb.root_path(ib)]
                if ta is goal_tree:
                    pa, pb = pb, pa
                path = pa + pb[::-1][1:]
                return _finish(query, SOLVED, path, budget, frames)
        ta, tb = tb, ta
    return _finish(query, TIMEOUT, [], budget, frames)


def prm(query: PlannerQuery) -> PlanResult:
    """Incremental roadmap; edges are re-validated in travel direction on extraction."""
    space = query.space
    budget = _Budget(query)
    frames = _frames(query)
    bad = _validate_endpoints(query, budget, need_goal_state=True)
    if bad is not None:
        return bad
    k = int(query.params.get("k", 10))
    if space.distance(query.start, query.goal) == 0.0:
        return _finish(query, SOLVED, [query.start], budget, frames)
    nodes = _Tree(space)
    nodes.add(query.start, -1)
    nodes.add(query.goal, -1)
    adj: dict[int, dict[int, float]] = {0: {}, 1: {}}
    comp = [0, 1]  # union-find parents

    def find(i):
        while comp[i] != i:
            comp[i] = comp[comp[i]]
            i = comp[i]
        return i

    def connect_node(i):
        for j in nodes.k_nearest(nodes.states[i], k + 1):
            if j == i or j in adj[i]:
                continue
            if space.check_motion(nodes.states[i], nodes.states[j]):
                w = space.distance(nodes.states[i], nodes.states[j])
                adj[i][j] = w
                adj[j][i] = w
                comp[find(i)] = find(j)

    def shortest():
        dist = {0: 0.0}
        prev = {}
        heap = [(0.0, 0)]
        while heap:
            d, u = heapq.heappop(heap)
            if u == 1:
                break
            if d > dist[u]:
                continue
            for v, w in sorted(adj[u].items()):
                nd = d + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    prev[v] = u
                    heapq.heappush(heap, (nd, v))
        if 1 not in dist:
            return None
        seq = [1]
        while seq[-1] != 0:
            seq.append(prev[seq[-1]])
        return seq[::-1]

    checked: set[tuple[int, int]] = set()
    connect_node(0)
    connect_node(1)
    while True:
        while find(0) == find(1):
            seq = shortest()
            broken = False
            for u, v in zip(seq, seq[1:]):
                if (u, v) in checked:
                    continue
                if space.check_motion(nodes.states[u], nodes.states[v]):
                    checked.add((u, v))
                    continue
                del adj[u][v]
                del adj[v][u]
                broken = True
                break
            if not broken:
                return _finish(query, SOLVED, [nodes.states[i] for i in seq], budget, frames)
            # components may have split; rebuild the union-find
            for i in range(len(comp)):
                comp[i] = i
            for u in adj:
                for v in adj[u]:
                    comp[find(u)] = find(v)
        if not budget.tick():
            break
        try:
            x = space.sample_uniform()
        except SamplingError:
            continue
        if not space.is_valid(x):
            continue
        i = nodes.add(x, -1)
        adj[i] = {}
        comp.append(i)
        connect_node(i)
    return _finish(query, TIMEOUT, [], budget, frames)


def density_weights(space, tree: _Tree, radius: float) -> np.ndarray:
    """Selection weights ``1 / (1 + neighbours within radius)`` of every live node."""
    n = len(tree)
    F = tree._F[:n]
    alive = np.array(tree.alive[:n], dtype=bool)
    counts = np.zeros(n)
    for i in np.flatnonzero(alive):
        counts[i] = np.count_nonzero((space.distances(F[i], F) <= radius) & alive) - 1
    w = 1.0 / (1.0 + counts)
    w[~alive] = 0.0
    return w


class _DensityTree(_Tree):
    """Tree that keeps neighbour counts up to date for density-based selection."""

    def __init__(self, space, radius):
        super().__init__(space)
        self.radius = radius
        self.counts: list[int] = []

    def add(self, state, parent):
        if len(self):
            d = self.distances(state)
            near = np.flatnonzero(d <= self.radius)
            for j in near:
                self.counts[j] += 1
            c = len(near)
        else:
            c = 0
        self.counts.append(c)
        return super().add(state, parent)

    def kill_subtree(self, i):
        super().kill_subtree(i)
        dead = [j for j, a in enumerate(self.alive) if not a]
        F = self._F[: len(self)]
        for j in range(len(self)):
            if self.alive[j]:
                d = self.space.distances(F[j], F)
                mask = d <= self.radius
                mask[j] = False
                mask[dead] = False
                self.counts[j] = int(np.count_nonzero(mask))

    def select(self, rng) -> int:
        w = 1.0 / (1.0 + np.array(self.counts, dtype=float))
        w[~np.array(self.alive)] = 0.0
        return int(rng.choice(len(w), p=w / w.sum()))


def est(query: PlannerQuery) -> PlanResult:
    """Expansive space trees: expand sparse nodes by near-sampling."""
    space = query.space
    budget = _Budget(query)
    frames = _frames(query)
    bad = _validate_endpoints(query, budget, need_goal_state=False)
    if bad is not None:
        return bad
    step = query.params.get("range", DEFAULT_PARAMS[space.kind]["range"])
    radius = query.params.get("radius", step)
    bias = query.params.get("goal_bias", 0.05)
    tol = query.params.get("goal_tolerance", 1e-6)
    rng = np.random.default_rng(query.rng_seed)
    tree = _DensityTree(space, radius)
    tree.add(query.start, -1)
    if _reached(query, query.start, tol):
        return _finish(query, SOLVED, [query.start], budget, frames)
    while budget.tick():
        i = tree.select(rng)
        node = tree.states[i]
        try:
            if query.goal is not None and rng.uniform() < bias:
                x_new, _ = _steer(space, node, query.goal, step)
            else:
                x_new = space.sample_uniform_near(node, step)
        except (SamplingError, InterpolationError):
            continue
        if not space.check_motion(node, x_new):
            continue
        j = tree.add(x_new, i)
        if _reached(query, x_new, tol):
            return _finish(query, SOLVED, [tree.states[m] for m in tree.root_path(j)], budget, frames)
    return _finish(query, TIMEOUT, [], budget, frames)


def sbl(query: PlannerQuery) -> PlanResult:
    """Bidirectional lazy trees; motions are checked only on candidate paths."""
    space = query.space
    budget = _Budget(query)
    frames = _frames(query)
    bad = _validate_endpoints(query, budget, need_goal_state=True)
    if bad is not None:
        return bad
    step = query.params.get("range", DEFAULT_PARAMS[space.kind]["range"])
    radius = query.params.get("radius", step)
    rng = np.random.default_rng(query.rng_seed)
    if space.distance(query.start, query.goal) == 0.0:
        return _finish(query, SOLVED, [query.start], budget, frames)
    trees = (_DensityTree(space, radius), _DensityTree(space, radius))
    trees[0].add(query.start, -1)
    trees[1].add(query.goal, -1)
    checked: set = set()  # (tree, child) edges already validated

    def edge_ok(t, child, forward):
        tree = trees[t]
        key = (t, child)
        if key in checked:
            return True
        a, b = tree.states[tree.parent[child]], tree.states[child]
        ok = space.check_motion(a, b) if forward else space.check_motion(b, a)
        if ok:
            checked.add(key)
        else:
            tree.kill_subtree(child)
        return ok

    side = 0
    while budget.tick():
        ta, tb = trees[side], trees[1 - side]
        i = ta.select(rng)
        try:
            x_new = space.sample_uniform_near(ta.states[i], step)
        except SamplingError:
            side = 1 - side
            continue
        if not space.is_valid(x_new):
            side = 1 - side
            continue
        ia = ta.add(x_new, i)
        ib = tb.nearest(x_new)
        if space.distance(x_new, tb.states[ib]) <= step:
            i0, i1 = (ia, ib) if side == 0 else (ib, ia)
            p0 = trees[0].root_path(i0)
            p1 = trees[1].root_path(i1)
            ok = all(edge_ok(0, c, True) for c in p0[1:])
            if ok:
                ok = space.check_motion(trees[0].states[i0], trees[1].states[i1])
            if ok:
                ok = all(edge_ok(1, c, False) for c in reversed(p1[1:]))
            if ok:
                path = [trees[0].states[m] for m in p0] + [trees[1].states[m] for m in reversed(p1)]
                return _finish(query, SOLVED, path, budget, frames)
        side = 1 - side
    return _finish(query, TIMEOUT, [], budget, frames)


PLANNERS = {"rrt": rrt, "rrt_connect": rrt_connect, "prm": prm, "est": est, "sbl": sbl}


def plan(planner: str, query: PlannerQuery) -> PlanResult:
    try:
        fn = PLANNERS[planner]
    except KeyError:
        raise ValueError(f"unknown planner '{planner}'") from None
    return fn(query)
