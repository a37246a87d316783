"""Planner-facing state spaces whose samplers and interpolators return balanced states.

Every sampling and interpolation primitive routes through the whole-body
IK solver with a balance constraint, so any state a planner receives lies
on the balance manifold.  Two families are provided:

* :class:`ConfigurationSpace`: states are full configurations.
* :class:`MetaEndEffectorSpace`: states are ``K`` end-effector poses, each
  state paired with the configuration that realizes it.
  :class:`EndEffectorSpace` is the ``K = 1`` case.

A space instance owns one RNG stream and one :class:`SpaceMetrics`
counter and serves a single planner run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from wbplan import collision, ik
from wbplan.balance import BalanceSpec, is_balanced
from wbplan.kinematics import DEFAULT_ROTATION_WEIGHT, KinematicsCache, Transform, se3_distance, se3_interpolate
from wbplan.metrics import SpaceMetrics
from wbplan.model import RobotModel, Scene
from wbplan.rotations import quat_from_rotvec, quat_mul, random_quaternion

__all__ = [
    "SpaceError",
    "SamplingError",
    "InterpolationError",
    "SpaceState",
    "ConfigurationSpace",
    "MetaEndEffectorSpace",
    "EndEffectorSpace",
    "random_near_se3",
]


class SpaceError(RuntimeError):
    """A space primitive could not produce a balanced state."""


class SamplingError(SpaceError):
    """Retry budget exhausted while sampling."""


class InterpolationError(SpaceError):
    """Relaxation schedule exhausted while interpolating."""


@dataclass(frozen=True, eq=False)
class SpaceState:
    config: np.ndarray
    ee_poses: tuple[Transform, ...] | None = None


class _Space:
    """Shared plumbing: bounds, solver access, validity and motion checks."""

    kind = ""

    def __init__(self, model: RobotModel, scene: Scene | None, balance: BalanceSpec, start_config,
                 seed: int = 0, base_translation: float = 0.5, base_rotation: float = 0.5,
                 retry_budget: int = 100, resolution: float = 0.05,
                 options: ik.SolverOptions | None = None, ik_weights=None):
        self.model = model
        self.scene = scene
        self.balance = balance
        self.start_config = model.check_configuration(start_config).copy()
        self.rng = np.random.default_rng(seed)
        self.retry_budget = int(retry_budget)
        self.resolution = float(resolution)
        self.options = options or ik.SolverOptions()
        self.ik_weights = None if ik_weights is None else np.asarray(ik_weights, dtype=float)
        self.metrics = SpaceMetrics()
        q0 = self.start_config
        span = np.r_[np.full(3, base_translation), np.full(3, base_rotation)]
        self.lower = np.r_[q0[:6] - span, model.joint_lower]
        self.upper = np.r_[q0[:6] + span, model.joint_upper]
        self._bounds = ik.JointBounds(self.lower, self.upper)
        self._balance = ik.Balance(balance)
        self.config_schedule = ik.default_config_schedule(model)
        self.pose_schedule = ik.default_pose_schedule()

    def set_bounds(self, lower, upper) -> None:
        """Replace the sampling box, which is also the IK box; ``lower == upper`` pins a coordinate."""
        lower = np.array(lower, dtype=float)
        upper = np.array(upper, dtype=float)
        shape = (self.model.dim,)
        if lower.shape != shape or upper.shape != shape:
            raise ValueError(f"bounds must have shape {shape}")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))) or np.any(lower > upper):
            raise ValueError("bounds must be finite with lower <= upper")
        self.lower, self.upper = lower, upper
        self._bounds = ik.JointBounds(lower, upper)

    # -- solver ------------------------------------------------------------
    def _solve(self, seed, nominal, extra) -> ik.IkResult:
        problem = ik.IkProblem(seed, nominal, [self._bounds, self._balance, *extra], self.ik_weights)
        return ik.solve(self.model, problem, self.options, self.metrics)

    def _relax(self, seed, nominal, relaxable, schedule) -> ik.IkResult:
        group = list(relaxable) if isinstance(relaxable, (list, tuple)) else [relaxable]
        problem = ik.IkProblem(seed, nominal, [self._bounds, self._balance, *group], self.ik_weights)
        return ik.relax_and_solve(self.model, problem, group, schedule, self.options, self.metrics)

    # -- validity ----------------------------------------------------------
    def is_valid(self, state: SpaceState) -> bool:
        return collision.is_state_valid(self.model, self.scene, state.config, self.balance, self.metrics)

    def check_motion(self, a: SpaceState, b: SpaceState) -> bool:
        return collision.check_motion(self, a, b, self.resolution)

    def state_from_config(self, q) -> SpaceState:
        raise NotImplementedError

    # -- nearest-neighbour support ------------------------------------------
    def features(self, state: SpaceState) -> np.ndarray:
        raise NotImplementedError

    def distances(self, f: np.ndarray, F: np.ndarray) -> np.ndarray:
        """Distances from feature vector ``f`` to every row of ``F``."""
        raise NotImplementedError


# ----------------------------------------------------------- config space
class ConfigurationSpace(_Space):
    """Configurations bounded by joint limits and a box around the start base pose."""

    kind = "cspace"

    def __init__(self, *args, weights=None, **kwargs):
        super().__init__(*args, **kwargs)
        w = np.ones(self.model.dim) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (self.model.dim,) or np.any(w < 0.0):
            raise ValueError("metric weights must be a non-negative vector of the configuration size")
        self.weights = w

    def state_from_config(self, q) -> SpaceState:
        return SpaceState(np.array(q, dtype=float))

    def distance(self, a: SpaceState, b: SpaceState) -> float:
        d = a.config - b.config
        return math.sqrt(float(np.sum(self.weights * d * d)))

    def features(self, state):
        return state.config

    def distances(self, f, F):
        D = F - f
        return np.sqrt((D * D) @ self.weights)

    def sample_uniform(self) -> SpaceState:
        for _ in range(self.retry_budget):
            q_bar = self.rng.uniform(self.lower, self.upper)
            res = self._solve(q_bar, q_bar, ())
            if res.converged:
                return SpaceState(res.q_star)
        raise SamplingError("no balanced configuration within the retry budget")

    def _ball_offset(self, d: float) -> np.ndarray:
        # uniform in the weighted ball of radius d; zero-weight axes get a box of half-width d
        n = self.model.dim
        z = self.rng.normal(size=n)
        z *= d * self.rng.uniform() ** (1.0 / n) / np.linalg.norm(z)
        free = self.weights == 0.0
        z[~free] /= np.sqrt(self.weights[~free])
        z[free] = self.rng.uniform(-d, d, int(free.sum()))
        return z

    def _pinned(self, q_bar) -> SpaceState | None:
        """``q_bar`` itself when it already satisfies bounds and balance.

        At zero proximity tolerance that is the only feasible answer; taking
        it directly avoids the solver's internal balance margins rejecting
        a center the exact predicate accepts.
        """
        if np.all(q_bar >= self.lower) and np.all(q_bar <= self.upper) and is_balanced(self.model, q_bar, self.balance):
            return SpaceState(q_bar)
        return None

    def sample_uniform_near(self, near: SpaceState, d: float) -> SpaceState:
        """Balanced state within distance ``d`` of ``near``.

        The unprojected draw is uniform in the metric ball of radius ``d``;
        results farther than ``d`` after projection are redrawn.
        """
        if not d > 0.0:
            raise ValueError("d must be positive")
        zero = np.zeros(self.model.dim)
        for _ in range(self.retry_budget):
            q_bar = np.clip(near.config + self._ball_offset(d), self.lower, self.upper)
            state = self._pinned(q_bar)
            if state is None:
                prox = ik.ConfigProximity(q_bar, zero, self.weights)
                res = self._relax(q_bar, near.config, prox, self.config_schedule)
                state = SpaceState(res.q_star) if res.converged else None
            if state is not None and self.distance(state, near) <= d:
                return state
        raise SamplingError("no balanced configuration near the state within the retry budget")

    def interpolate(self, a: SpaceState, b: SpaceState, d: float) -> SpaceState:
        """Balanced state near ``a + d (b - a)``; endpoints are returned as given."""
        if d <= 0.0:
            return a
        if d >= 1.0:
            return b
        q_bar = a.config + d * (b.config - a.config)
        state = self._pinned(q_bar)
        if state is not None:
            return state
        prox = ik.ConfigProximity(q_bar, np.zeros(self.model.dim), self.weights)
        res = self._relax(q_bar, a.config, prox, self.config_schedule)
        if not res.converged:
            raise InterpolationError("interpolation failed after relaxation")
        return SpaceState(res.q_star)


# ------------------------------------------------------ end-effector spaces
def random_near_se3(rng: np.random.Generator, pose: Transform, d: float,
                    rotation_weight: float = DEFAULT_ROTATION_WEIGHT) -> Transform:
    """Pose within ``se3_distance <= d`` of ``pose``.

    The budget ``d`` is split at random between a translation inside a
    ball and a rotation about a uniformly random axis.
    """
    share = rng.uniform()
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    radius = share * d * rng.uniform() ** (1.0 / 3.0)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = min(rng.uniform() * (1.0 - share) * d / rotation_weight, math.pi)
    rot = quat_mul(quat_from_rotvec(angle * axis), pose.rotation)
    return Transform(pose.translation + radius * direction, rot)


class MetaEndEffectorSpace(_Space):
    """Stacked SE(3) poses of ``K`` end-effector frames, each state paired with a configuration.

    Bounds are the scene's region of interest for every translation and the
    full rotation group.  ``position_only`` drops the orientation rows from
    the sampling targets.
    """

    kind = "meta"

    def __init__(self, model, scene, balance, start_config, frames, *args, position_only: bool = False,
                 rotation_weight: float = DEFAULT_ROTATION_WEIGHT, **kwargs):
        super().__init__(model, scene, balance, start_config, *args, **kwargs)
        self.frames = tuple([frames] if isinstance(frames, str) else frames)
        if not self.frames:
            raise ValueError("at least one end-effector frame is required")
        for f in self.frames:
            model.frame(f)
        if scene is None:
            raise ValueError("end-effector spaces need a scene with a region of interest")
        self.roi_min = np.asarray(scene.roi_min, dtype=float)
        self.roi_max = np.asarray(scene.roi_max, dtype=float)
        self.position_only = bool(position_only)
        self.rotation_weight = float(rotation_weight)
        self._last = self.start_config

    @property
    def K(self) -> int:
        return len(self.frames)

    def state_from_config(self, q) -> SpaceState:
        q = np.array(q, dtype=float)
        kin = KinematicsCache(self.model, q)
        return SpaceState(q, tuple(kin.frame_transform(f) for f in self.frames))

    def distance(self, a: SpaceState, b: SpaceState) -> float:
        return sum(se3_distance(x, y, self.rotation_weight) for x, y in zip(a.ee_poses, b.ee_poses))

    def features(self, state):
        return np.concatenate([np.r_[t.translation, t.rotation] for t in state.ee_poses])

    def distances(self, f, F):
        total = np.zeros(len(F))
        for k in range(self.K):
            o = 7 * k
            dt = F[:, o : o + 3] - f[o : o + 3]
            dot = np.minimum(np.abs(F[:, o + 3 : o + 7] @ f[o + 3 : o + 7]), 1.0)
            total += np.sqrt(np.sum(dt * dt, axis=1)) + self.rotation_weight * 2.0 * np.arccos(dot)
        return total

    def _targets(self, poses, tol=None):
        tol = np.zeros(6) if tol is None else tol
        return [ik.PoseTarget(f, x, tol, self.position_only) for f, x in zip(self.frames, poses)]

    def sample_uniform(self) -> SpaceState:
        """Uniform ROI position and uniform orientation per frame.

        The solver is seeded (and nominal-ized) with the start configuration
        on the first call and with the last successful sample afterwards.
        """
        for _ in range(self.retry_budget):
            poses = [Transform(self.rng.uniform(self.roi_min, self.roi_max), random_quaternion(self.rng))
                     for _ in self.frames]
            res = self._solve(self._last, self._last, self._targets(poses))
            if res.converged:
                self._last = res.q_star
                return self.state_from_config(res.q_star)
        raise SamplingError("no reachable balanced end-effector pose within the retry budget")

    def sample_uniform_near(self, near: SpaceState, d: float) -> SpaceState:
        if not d > 0.0:
            raise ValueError("d must be positive")
        share = d / self.K
        for _ in range(self.retry_budget):
            poses = [random_near_se3(self.rng, x, share, self.rotation_weight) for x in near.ee_poses]
            res = self._solve(near.config, near.config, self._targets(poses))
            if res.converged:
                state = self.state_from_config(res.q_star)
                if self.distance(state, near) <= d:
                    return state
        raise SamplingError("no balanced end-effector pose near the state within the retry budget")

    def interpolate(self, a: SpaceState, b: SpaceState, d: float) -> SpaceState:
        """Balanced state whose poses track ``se3_interpolate`` within the relaxed tolerance."""
        if d <= 0.0:
            return a
        if d >= 1.0:
            return b
        poses = [se3_interpolate(x, y, d) for x, y in zip(a.ee_poses, b.ee_poses)]
        res = self._relax(a.config, a.config, self._targets(poses), self.pose_schedule)
        if not res.converged:
            raise InterpolationError("interpolation failed after relaxation")
        return self.state_from_config(res.q_star)


class EndEffectorSpace(MetaEndEffectorSpace):
    """Single end-effector SE(3) space."""

    kind = "eespace"

    def __init__(self, model, scene, balance, start_config, frame: str, *args, **kwargs):
        super().__init__(model, scene, balance, start_config, (frame,), *args, **kwargs)
