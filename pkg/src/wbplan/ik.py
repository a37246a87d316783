"""Whole-body inverse kinematics.

``solve`` minimizes ``|q - q_nominal|^2_Q`` subject to box bounds and a set of
nonlinear constraints (stance feet, CoM in support polygon, end-effector
poses, configuration proximity).  Each iteration linearizes the constraint
rows with the analytic Jacobians, solves a small active-set QP inside a
trust region, and line-searches an exact l1 merit function.  Everything is
deterministic: identical problems give identical results.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from wbplan import kernels
from wbplan.balance import BalanceSpec, is_balanced, support_halfplanes
from wbplan.kinematics import KinematicsCache, Transform
from wbplan.metrics import SpaceMetrics
from wbplan.model import RobotModel
from wbplan.rotations import left_jacobian_inv, log_so3

__all__ = [
    "JointBounds",
    "Balance",
    "PoseTarget",
    "ConfigProximity",
    "IkProblem",
    "IkResult",
    "SolverOptions",
    "RelaxationSchedule",
    "solve",
    "relax_and_solve",
    "default_config_schedule",
    "default_pose_schedule",
    "pose_error",
]


# -------------------------------------------------------------- constraints
@dataclass(frozen=True, eq=False)
class JointBounds:
    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True, eq=False)
class Balance:
    spec: BalanceSpec


@dataclass(frozen=True, eq=False)
class PoseTarget:
    """Frame pose within ``tolerance`` = (x, y, z, roll, pitch, yaw) of ``target``.

    Translation error is measured in the world frame, rotation error as the
    rotation vector of ``R_target^T R`` (components about the target axes).
    """

    frame: str
    target: Transform
    tolerance: np.ndarray = field(default_factory=lambda: np.zeros(6))
    position_only: bool = False

    def with_tolerance(self, tol) -> "PoseTarget":
        return replace(self, tolerance=np.asarray(tol, dtype=float))


@dataclass(frozen=True, eq=False)
class ConfigProximity:
    """``|w_i (q_i - center_i)| <= tolerance_i`` for every coordinate."""

    center: np.ndarray
    tolerance: np.ndarray
    weights: np.ndarray | None = None

    def with_tolerance(self, tol) -> "ConfigProximity":
        return replace(self, tolerance=np.asarray(tol, dtype=float))


@dataclass(eq=False)
class IkProblem:
    q_seed: np.ndarray
    q_nominal: np.ndarray
    constraints: list = field(default_factory=list)
    weights: np.ndarray | None = None  # diagonal of Q_q; ones by default


@dataclass(eq=False)
class IkResult:
    q_star: np.ndarray
    converged: bool
    iterations: int
    max_violation: float
    solve_time: float
    relax_rounds: int = 0
    merit_history: list = field(default_factory=list, repr=False)
    tolerance: np.ndarray | None = None  # final tolerance of the relaxed constraint


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 100
    tol: float = 1e-4  # constraint residual tolerance (m / rad)
    step_tol: float = 1e-8
    stationarity_tol: float = 1e-7  # predicted objective decrease
    trust_radius: float = 0.4
    min_trust_radius: float = 1e-3
    max_trust_radius: float = 0.8
    penalty: float = 1e3
    com_backoff: float = 2e-3
    feet_band: float = 0.25  # internal feet band as a fraction of the tolerance
    regularization: float = 1e-3
    stall_window: int = 8


# ------------------------------------------------------------- row assembly
def pose_error(R, p, target: Transform) -> np.ndarray:
    Rt = target.matrix
    return np.r_[p - target.translation, log_so3(Rt.T @ R)]


class _Compiled:
    """Constraint set flattened to rows ``l <= f(q) <= u`` plus a box."""

    def __init__(self, model: RobotModel, problem: IkProblem, options: SolverOptions):
        self.model = model
        self.options = options
        n = model.dim
        lo = model.lower.copy()
        hi = model.upper.copy()
        self.balance: BalanceSpec | None = None
        self.poses: list[PoseTarget] = []
        for c in problem.constraints:
            if isinstance(c, JointBounds):
                lo = np.maximum(lo, c.lower)
                hi = np.minimum(hi, c.upper)
            elif isinstance(c, ConfigProximity):
                w = np.ones(n) if c.weights is None else np.asarray(c.weights, dtype=float)
                tol = np.asarray(c.tolerance, dtype=float)
                if np.any(tol < 0.0):
                    raise ValueError("proximity tolerance must be >= 0")
                with np.errstate(divide="ignore"):
                    half = np.where(w > 0.0, tol / np.where(w > 0.0, w, 1.0), np.inf)
                lo = np.maximum(lo, c.center - half)
                hi = np.minimum(hi, c.center + half)
            elif isinstance(c, Balance):
                if self.balance is not None:
                    raise ValueError("at most one balance constraint is supported")
                self.balance = c.spec
            elif isinstance(c, PoseTarget):
                model.frame(c.frame)
                if np.any(np.asarray(c.tolerance) < 0.0):
                    raise ValueError("pose tolerance must be >= 0")
                self.poses.append(c)
            else:
                raise TypeError(f"unknown constraint {type(c).__name__}")
        self.lo = lo
        self.hi = hi
        self.box_feasible = bool(np.all(lo <= hi + 1e-15))
        hi = np.maximum(hi, lo)
        self.hi = hi
        w = np.ones(n) if problem.weights is None else np.asarray(problem.weights, dtype=float)
        if w.shape != (n,) or np.any(w < 0.0):
            raise ValueError("weights must be a nonnegative vector of the configuration dimension")
        self.Q = w
        self.q_nom = np.asarray(problem.q_nominal, dtype=float)

        lows, ups = [], []
        if self.balance is not None:
            spec = self.balance
            bp = options.feet_band * spec.feet_pos_tol / math.sqrt(3.0)
            br = options.feet_band * spec.feet_rot_tol / math.sqrt(3.0)
            for _ in spec.stance_feet:
                lows += [-bp] * 3 + [-br] * 3
                ups += [bp] * 3 + [br] * 3
            self.hp_n, self.hp_b = support_halfplanes(model, spec)
            lim = self.hp_b - spec.com_margin - options.com_backoff
            lows += [-np.inf] * len(lim)
            ups += list(lim)
        for pt in self.poses:
            tol = np.asarray(pt.tolerance, dtype=float)
            k = 3 if pt.position_only else 6
            lows += list(-tol[:k])
            ups += list(tol[:k])
        self.row_lo = np.array(lows, dtype=float)
        self.row_hi = np.array(ups, dtype=float)
        self.m = len(lows)

    def rows(self, q, jac: bool):
        kin = KinematicsCache(self.model, q)
        n = self.model.dim
        f = np.empty(self.m)
        G = np.empty((self.m, n)) if jac else None
        r = 0
        if self.balance is not None:
            spec = self.balance
            for name, target in zip(spec.stance_feet, spec.targets):
                R, p = kin.frame_pose(name)
                e_rot = log_so3(R @ target.matrix.T)
                f[r : r + 3] = p - target.translation
                f[r + 3 : r + 6] = e_rot
                if jac:
                    J = kin.jacobian(name)
                    G[r : r + 3] = J[:3]
                    G[r + 3 : r + 6] = left_jacobian_inv(e_rot) @ J[3:]
                r += 6
            k = len(self.hp_b)
            if jac:
                com, Jc = kin.com_jacobian()
                G[r : r + k] = self.hp_n @ Jc[:2]
            else:
                com = kin.com()
            f[r : r + k] = self.hp_n @ com[:2]
            r += k
        for pt in self.poses:
            R, p = kin.frame_pose(pt.frame)
            e = pose_error(R, p, pt.target)
            k = 3 if pt.position_only else 6
            f[r : r + k] = e[:k]
            if jac:
                J = kin.jacobian(pt.frame)
                G[r : r + 3] = J[:3]
                if k == 6:
                    G[r + 3 : r + 6] = left_jacobian_inv(e[3:]) @ (pt.target.matrix.T @ J[3:])
            r += k
        return kin, f, G

    def violation(self, f) -> float:
        return float(np.sum(np.maximum(f - self.row_hi, 0.0) + np.maximum(self.row_lo - f, 0.0)))

    def objective(self, q) -> float:
        d = q - self.q_nom
        return 0.5 * float(np.sum(self.Q * d * d))

    def user_violation(self, f) -> tuple[float, bool]:
        """Largest residual against the caller's tolerances, and the balance flag.

        Read off the row values; the final verdict on balance is always
        re-checked with :func:`is_balanced`.
        """
        worst = 0.0
        balanced = True
        r = 0
        if self.balance is not None:
            spec = self.balance
            for _ in spec.stance_feet:
                pe = math.sqrt(f[r] * f[r] + f[r + 1] * f[r + 1] + f[r + 2] * f[r + 2])
                re = math.sqrt(f[r + 3] * f[r + 3] + f[r + 4] * f[r + 4] + f[r + 5] * f[r + 5])
                worst = max(worst, pe - spec.feet_pos_tol, re - spec.feet_rot_tol)
                if pe > spec.feet_pos_tol or re > spec.feet_rot_tol:
                    balanced = False
                r += 6
            k = len(self.hp_b)
            com_v = float(np.max(f[r : r + k] - (self.hp_b - spec.com_margin)))
            worst = max(worst, com_v)
            if com_v >= 0.0:
                balanced = False
            r += k
        for pt in self.poses:
            k = 3 if pt.position_only else 6
            e = np.abs(f[r : r + k]) - np.asarray(pt.tolerance, dtype=float)[:k]
            worst = max(worst, float(e.max()))
            r += k
        return max(worst, 0.0), balanced

    def balanced_exact(self, q, kin) -> bool:
        return self.balance is None or is_balanced(self.model, q, self.balance, kin)


# ------------------------------------------------------------------ solver
def solve(model: RobotModel, problem: IkProblem, options: SolverOptions | None = None,
          metrics: SpaceMetrics | None = None) -> IkResult:
    """Solve one IK problem; non-convergence is reported, never raised."""
    t0 = time.perf_counter()
    options = options or SolverOptions()
    for arr, name in ((problem.q_seed, "q_seed"), (problem.q_nominal, "q_nominal")):
        a = np.asarray(arr, dtype=float)
        if a.shape != (model.dim,):
            raise ValueError(f"{name} has shape {a.shape}, expected ({model.dim},)")
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{name} contains NaN or infinite values")
    try:
        result = _solve(model, problem, options)
    finally:
        elapsed = time.perf_counter() - t0
        if metrics is not None:
            metrics.n_ik_calls += 1
            metrics.ik_time += elapsed
    result.solve_time = elapsed
    return result


def _solve(model: RobotModel, problem: IkProblem, opt: SolverOptions) -> IkResult:
    c = _Compiled(model, problem, opt)
    q = np.clip(np.asarray(problem.q_seed, dtype=float), c.lo, c.hi)
    if not c.box_feasible:
        kin, f, _ = c.rows(q, jac=False)
        viol, _ = c.user_violation(f)
        return IkResult(q, False, 0, max(viol, float(np.max(c.lo - c.hi))), 0.0)
    H = c.Q + opt.regularization
    radius = opt.trust_radius
    history = []
    viol_hist = []
    converged = False
    it = 0
    kin, f, G = c.rows(q, jac=True)
    fixed = np.zeros(model.dim, dtype=np.int8)
    side = np.zeros(c.m, dtype=np.int8)
    side[c.row_lo == c.row_hi] = 2
    merit = c.objective(q) + opt.penalty * c.violation(f)
    history.append(merit)
    while True:
        user_viol, balanced = c.user_violation(f)
        feasible = balanced and user_viol <= opt.tol
        g = c.Q * (q - c.q_nom)
        blo = np.maximum(c.lo - q, -radius)
        bhi = np.minimum(c.hi - q, radius)
        fixed[blo >= bhi] = 1
        d = kernels.qp_active_set(H, g, G, c.row_lo - f, c.row_hi - f, blo, bhi, fixed, side)
        pred = -(float(g @ d) + 0.5 * float(np.sum(H * d * d)))
        if feasible and (float(np.max(np.abs(d), initial=0.0)) < opt.step_tol or pred < opt.stationarity_tol):
            if c.balanced_exact(q, kin):
                converged = True
                break
            feasible = False
        if it >= opt.max_iterations:
            break
        viol_hist.append(c.violation(f))
        w = opt.stall_window
        if not feasible and len(viol_hist) > w and viol_hist[-1] > 0.99 * viol_hist[-1 - w]:
            break
        # backtracking line search on the l1 merit
        alpha = 1.0
        accepted = False
        while alpha >= 1e-4:
            q_new = np.clip(q + alpha * d, c.lo, c.hi)
            kin_new, f_new, _ = c.rows(q_new, jac=False)
            merit_new = c.objective(q_new) + opt.penalty * c.violation(f_new)
            if merit_new < merit:
                accepted = True
                break
            alpha *= 0.5
        it += 1
        if not accepted:
            converged = feasible and c.balanced_exact(q, kin)
            break
        q = q_new
        merit = merit_new
        history.append(merit)
        radius = min(2.0 * radius, opt.max_trust_radius) if alpha == 1.0 else max(0.5 * radius, opt.min_trust_radius)
        kin, f, G = c.rows(q, jac=True)
    user_viol, _ = c.user_violation(f)
    if converged and user_viol > opt.tol:
        converged = False
    return IkResult(q, converged, it, user_viol, 0.0, merit_history=history)


# -------------------------------------------------------------- relaxation
@dataclass(frozen=True, eq=False)
class RelaxationSchedule:
    """Ordered tolerance groups; each group walks through its values in turn.

    ``groups[k] = (indices, values)``: on each round the entries ``indices``
    of the tolerance vector are raised to the next value; earlier groups
    keep their last value.  Total rounds = sum of ``len(values)``.
    """

    groups: tuple = ()

    @property
    def rounds(self) -> int:
        return sum(len(v) for _, v in self.groups)

    def tolerances(self, start):
        tol = np.array(start, dtype=float)
        for idx, values in self.groups:
            for v in values:
                tol = tol.copy()
                tol[np.asarray(idx, dtype=np.intp)] = v
                yield tol


def default_config_schedule(model: RobotModel, first: float = 0.1, rounds: int = 4) -> RelaxationSchedule:
    """Lower body, then floating base, torso, arms: 0.1 doubling, 4 rounds each."""
    values = tuple(first * 2.0**k for k in range(rounds))
    order = [model.group_indices("leg"), model.group_indices("base"), model.group_indices("torso"), model.group_indices("arm")]
    used = set(np.concatenate(order).tolist())
    rest = np.array([i for i in range(model.dim) if i not in used], dtype=np.intp)
    if rest.size:
        order.append(rest)
    return RelaxationSchedule(tuple((tuple(int(i) for i in idx), values) for idx in order if len(idx)))


def default_pose_schedule(rot_step: float = 0.05, pos_step: float = 0.01, rounds: int = 5) -> RelaxationSchedule:
    """Rotation (roll, pitch, yaw) first in 0.05 rad steps, then z, y, x in 1 cm steps."""
    rot = tuple(rot_step * (k + 1) for k in range(rounds))
    pos = tuple(pos_step * (k + 1) for k in range(rounds))
    return RelaxationSchedule((((3, 4, 5), rot), ((2, 1, 0), pos)))


def relax_and_solve(model: RobotModel, problem: IkProblem, relaxable, schedule: RelaxationSchedule,
                    options: SolverOptions | None = None, metrics: SpaceMetrics | None = None) -> IkResult:
    """Solve with the relaxable constraint at zero tolerance, widening it on failure.

    ``relaxable`` is a :class:`ConfigProximity` or :class:`PoseTarget` that
    appears in ``problem.constraints``, or a sequence of such constraints of
    one kind; every member receives the same tolerance vector.
    """
    group = list(relaxable) if isinstance(relaxable, (list, tuple)) else [relaxable]
    if not group:
        raise ValueError("nothing to relax")
    kind = type(group[0])
    if kind not in (ConfigProximity, PoseTarget) or any(type(c) is not kind for c in group):
        raise TypeError("only ConfigProximity and PoseTarget constraints can be relaxed")
    positions = []
    for r in group:
        try:
            positions.append(next(i for i, c in enumerate(problem.constraints) if c is r))
        except StopIteration:
            raise ValueError("relaxable constraint is not part of the problem") from None
    size = model.dim if kind is ConfigProximity else 6
    zero = np.zeros(size)

    def attempt(tol, rounds):
        cons = list(problem.constraints)
        for pos in positions:
            cons[pos] = cons[pos].with_tolerance(tol)
        res = solve(model, replace(problem, constraints=cons), options, metrics)
        res.relax_rounds = rounds
        res.tolerance = tol
        return res

    result = attempt(zero, 0)
    if result.converged:
        return result
    for k, tol in enumerate(schedule.tolerances(zero), start=1):
        result = attempt(tol, k)
        if result.converged:
            return result
    return result
