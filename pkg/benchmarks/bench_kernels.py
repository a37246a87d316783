"""Compare the compiled kernels against the pure-Python fallback.

Times forward kinematics, a frame Jacobian, the CoM Jacobian, the capsule
and box narrow-phase routines and the active-set QP on biped17 inputs, and
reports the speedup per kernel.  Run with ``python3 benchmarks/bench_kernels.py``.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from wbplan import kernels
from wbplan.kinematics import _chain
from wbplan.model import load_robot
from wbplan.bench import DATA_DIR
from wbplan.rotations import exp_so3


def cases(model, rng):
    q = model.zero_configuration()
    q[6:] = rng.uniform(model.joint_lower, model.joint_upper)
    q[:6] = rng.uniform(-0.3, 0.3, 6)
    args = (q, model.parent, model.jtype, model.axis, model.origin_R, model.origin_t, model.qidx)
    link, _, _ = model.frame("right_hand")
    chain = _chain(model, link)
    n = model.dim
    R = exp_so3(rng.normal(size=3))
    h = np.array([0.1, 0.2, 0.15])
    p0, p1 = rng.normal(size=3) * 0.3, rng.normal(size=3) * 0.3
    m = 30
    H = np.ones(n)
    g = rng.normal(size=n)
    G = np.ascontiguousarray(rng.normal(size=(m, n)))
    dlo, dhi = -np.abs(rng.normal(size=m)), np.abs(rng.normal(size=m))
    blo, bhi = -0.4 * np.ones(n), 0.4 * np.ones(n)

    def build(k):
        Rw, pw, aw = k.forward(*args)
        point = np.ascontiguousarray(pw[link])
        return {
            "forward": lambda: k.forward(*args),
            "point_jacobian": lambda: k.point_jacobian(q, pw, aw, model.jtype, model.qidx, chain, point,
                                                       np.zeros((6, n))),
            "com_jacobian": lambda: k.com_jacobian(q, Rw, pw, aw, model.parent, model.jtype, model.qidx,
                                                   model.mass, model.com_local, np.zeros((3, n))),
            "segment_segment": lambda: k.segment_segment_distance(p0, p1, -p0, p1 * 0.5),
            "segment_box": lambda: k.segment_box_distance(p0, p1, np.zeros(3), R, h),
            "segment_box_pen": lambda: k.segment_box_penetration(p0, p1, np.zeros(3), R, h),
            "box_box": lambda: k.box_box_penetration(np.zeros(3), R, h, p0, np.eye(3), h),
            "qp_active_set": lambda: k.qp_active_set(H, g, G, dlo, dhi, blo, bhi, np.zeros(n, np.int8),
                                                     np.zeros(m, np.int8)),
        }

    return build


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=200)
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        print("compiled extension not built; only the Python backend is available")
        return 1
    model = load_robot(DATA_DIR / "biped17.robot")
    build = cases(model, np.random.default_rng(0))
    fast, slow = build(kernels.compiled_backend), build(kernels.python_backend)
    print(f"{'kernel':<18}{'cython us':>12}{'python us':>12}{'speedup':>10}")
    for name in fast:
        tc = min(timeit.repeat(fast[name], number=args.number, repeat=args.repeat)) / args.number * 1e6
        tp = min(timeit.repeat(slow[name], number=args.number, repeat=args.repeat)) / args.number * 1e6
        print(f"{name:<18}{tc:>12.2f}{tp:>12.2f}{tp / tc:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
