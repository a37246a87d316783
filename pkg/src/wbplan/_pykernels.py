"""Pure-Python kernels; reference implementation of ``_ckernels``.

Every function here has an identically named twin in the compiled
module and both must agree to rounding error.
"""

from __future__ import annotations

import math

import numpy as np

from wbplan.rotations import exp_so3, left_jacobian, skew


def _axis_rotation(axis, angle):
    return exp_so3(np.asarray(axis) * angle)


def forward(q, parent, jtype, axis, origin_R, origin_t, qidx):
    """World rotation, origin and joint axis of every link."""
    L = parent.shape[0]
    Rw = np.empty((L, 3, 3))
    pw = np.empty((L, 3))
    aw = np.zeros((L, 3))
    Rw[0] = exp_so3(q[3:6])
    pw[0] = q[0:3]
    for i in range(1, L):
        k = parent[i]
        Rj = Rw[k] @ origin_R[i]
        pj = pw[k] + Rw[k] @ origin_t[i]
        a = Rj @ axis[i]
        aw[i] = a
        t = jtype[i]
        if t == 1:
            Rw[i] = Rj @ _axis_rotation(axis[i], q[qidx[i]])
            pw[i] = pj
        elif t == 2:
            Rw[i] = Rj
            pw[i] = pj + a * q[qidx[i]]
        else:
            Rw[i] = Rj
            pw[i] = pj
    return Rw, pw, aw


def point_jacobian(q, pw, aw, jtype, qidx, chain, point, J):
    """Fill ``J`` (6 x n) with the geometric Jacobian of a world point.

    ``chain`` holds the link indices from the body to the root; rows are
    linear velocity then world angular velocity.
    """
    J[:] = 0.0
    Jl = left_jacobian(q[3:6])
    J[0:3, 0:3] = np.eye(3)
    J[0:3, 3:6] = -skew(point - pw[0]) @ Jl
    J[3:6, 3:6] = Jl
    for k in chain:
        c = qidx[k]
        if c < 0:
            continue
        a = aw[k]
        if jtype[k] == 1:
            J[0:3, c] = np.cross(a, point - pw[k])
            J[3:6, c] = a
        elif jtype[k] == 2:
            J[0:3, c] = a
    return J


def com_jacobian(q, Rw, pw, aw, parent, jtype, qidx, mass, com_local, Jc):
    """Return the CoM and fill ``Jc`` (3 x n) with its Jacobian."""
    L = parent.shape[0]
    M = float(mass.sum())
    sm = mass.copy()
    smc = mass[:, None] * (pw + np.einsum("lij,lj->li", Rw, com_local))
    for i in range(L - 1, 0, -1):
        k = parent[i]
        sm[k] += sm[i]
        smc[k] += smc[i]
    com = smc[0] / M
    Jc[:] = 0.0
    Jc[:, 0:3] = np.eye(3)
    Jc[:, 3:6] = -skew(com - pw[0]) @ left_jacobian(q[3:6])
    for i in range(1, L):
        c = qidx[i]
        if c < 0:
            continue
        if jtype[i] == 1:
            Jc[:, c] = np.cross(aw[i], smc[i] - sm[i] * pw[i]) / M
        elif jtype[i] == 2:
            Jc[:, c] = aw[i] * (sm[i] / M)
    return com


def center_of_mass(Rw, pw, mass, com_local):
    c = pw + np.einsum("lij,lj->li", Rw, com_local)
    return (mass[:, None] * c).sum(axis=0) / mass.sum()


# ------------------------------------------------------------ narrow phase
def segment_segment_distance(p0, p1, q0, q1):
    """Closest distance between segments ``p0p1`` and ``q0q1``."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    eps = 1e-14
    if a <= eps and e <= eps:
        return float(np.linalg.norm(r))
    if a <= eps:
        s = 0.0
        t = min(max(f / e, 0.0), 1.0)
    else:
        c = float(d1 @ r)
        if e <= eps:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > eps else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
    return float(np.linalg.norm((p0 + d1 * s) - (q0 + d2 * t)))


def point_segment_distance(p, q0, q1):
    d = q1 - q0
    dd = float(d @ d)
    t = 0.0 if dd <= 1e-14 else min(max(float((p - q0) @ d) / dd, 0.0), 1.0)
    return float(np.linalg.norm(p - (q0 + t * d)))


def point_box_signed_distance(p, c, R, h):
    """Signed distance from ``p`` to a box (negative inside)."""
    local = R.T @ (p - c)
    d = np.abs(local) - h
    outside = np.maximum(d, 0.0)
    return float(np.linalg.norm(outside)) + min(float(d.max()), 0.0)


def segment_box_distance(p0, p1, c, R, h):
    """Unsigned distance between a segment and a solid box.

    In the box frame the squared distance along the segment is a convex
    piecewise quadratic in the segment parameter; each piece is minimized
    in closed form.
    """
    s = R.T @ (p0 - c)
    v = R.T @ (p1 - p0)
    ts = [0.0, 1.0]
    for i in range(3):
        if v[i] != 0.0:
            for b in (-h[i], h[i]):
                t = (b - s[i]) / v[i]
                if 0.0 < t < 1.0:
                    ts.append(t)
    ts.sort()
    best = math.inf
    for k in range(len(ts) - 1):
        ta, tb = ts[k], ts[k + 1]
        tm = 0.5 * (ta + tb)
        A = 0.0
        B = 0.0
        for i in range(3):
            x = s[i] + tm * v[i]
            if x > h[i]:
                bnd = h[i]
            elif x < -h[i]:
                bnd = -h[i]
            else:
                continue
            A += v[i] * v[i]
            B += 2.0 * v[i] * (s[i] - bnd)
        if A > 0.0:
            t = min(max(-B / (2.0 * A), ta), tb)
        else:
            t = ta
        for tt in (t, ta, tb):
            x = s + tt * v
            dist = float(np.linalg.norm(np.maximum(np.abs(x) - h, 0.0)))
            if dist < best:
                best = dist
    return best


def segment_box_penetration(p0, p1, c, R, h):
    """Deepest signed distance of the segment inside the box (<= 0)."""
    lo, hi = 0.0, 1.0
    d = p1 - p0
    for _ in range(80):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if point_box_signed_distance(p0 + m1 * d, c, R, h) < point_box_signed_distance(p0 + m2 * d, c, R, h):
            hi = m2
        else:
            lo = m1
    t = 0.5 * (lo + hi)
    return min(
        point_box_signed_distance(p0 + t * d, c, R, h),
        point_box_signed_distance(p0, c, R, h),
        point_box_signed_distance(p1, c, R, h),
    )


def box_box_penetration(c1, R1, h1, c2, R2, h2):
    """Separating-axis test.

    Returns the minimum overlap depth when the boxes intersect.  When they
    are separated it returns minus the gap along the first separating axis
    found, which has the right sign but is not the distance.
    """
    T = c2 - c1
    axes = [R1[:, i] for i in range(3)] + [R2[:, i] for i in range(3)]
    for i in range(3):
        for j in range(3):
            ax = np.cross(R1[:, i], R2[:, j])
            n = float(np.linalg.norm(ax))
            if n > 1e-9:
                axes.append(ax / n)
    best = math.inf
    for ax in axes:
        ra = float(np.sum(h1 * np.abs(R1.T @ ax)))
        rb = float(np.sum(h2 * np.abs(R2.T @ ax)))
        overlap = ra + rb - abs(float(T @ ax))
        if overlap < best:
            best = overlap
            if best < 0.0:
                return best
    return best


# ------------------------------------------------------------ dual active-set QP
def _qp_dots(kind, idx, pk, pi, Hinv, G, W, eps):
    """Products ``a_k' D^-1 a_p`` between active normals and normal ``p``."""
    out = np.empty(kind.size)
    box = kind == 0
    if pk == 0:
        out[box] = np.where(idx[box] == pi, Hinv[pi], 0.0)
        out[~box] = G[idx[~box], pi] * Hinv[pi]
    else:
        out[box] = G[pi, idx[box]] * Hinv[idx[box]]
        out[~box] = W[idx[~box], pi] + np.where(idx[~box] == pi, eps, 0.0)
    return out


def _qp_dual(H, g, G, dlo, dhi, blo, bhi, cap, eps):
    """One Goldfarb-Idnani pass; returns ``(d, ok, active)``.

    ``eps == 0`` solves the hard problem and reports ``ok = False`` when it
    is infeasible.  ``eps > 0`` solves the elastic problem, which adds a
    slack ``s`` to every row with penalty ``|s|^2 / (2 eps)`` and is always
    feasible.
    """
    n = H.shape[0]
    m = G.shape[0]
    Hinv = 1.0 / H
    W = (G * Hinv) @ G.T
    d = -g * Hinv
    s = np.zeros(m)
    box_eq = blo >= bhi
    row_eq = dlo >= dhi
    box_act = np.zeros(n, bool)
    row_act = np.zeros(m, bool)
    kind, idx, sgn, isq, u = [], [], [], [], []
    tol = 1e-11
    pending = False
    ok = False
    for _ in range(cap):
        if not pending:
            # equalities first, then the most violated inequality
            r = G @ d + s
            best = -tol
            for j in range(n):
                v = d[j] - bhi[j]
                if box_eq[j] and not box_act[j] and abs(v) > tol:
                    pending, pk, pi, ps, pb, peq = True, 0, j, (1.0 if v < 0 else -1.0), bhi[j], True
                    break
            if not pending:
                for i in range(m):
                    v = r[i] - dlo[i]
                    if row_eq[i] and not row_act[i] and abs(v) > tol:
                        pending, pk, pi, ps, pb, peq = True, 1, i, (1.0 if v < 0 else -1.0), dlo[i], True
                        break
            if not pending:
                for j in range(n):
                    if box_act[j] or box_eq[j]:
                        continue
                    v = d[j] - blo[j]
                    if v < best:
                        best, pending, pk, pi, ps, pb = v, True, 0, j, 1.0, blo[j]
                    v = bhi[j] - d[j]
                    if v < best:
                        best, pending, pk, pi, ps, pb = v, True, 0, j, -1.0, bhi[j]
                for i in range(m):
                    if row_act[i] or row_eq[i]:
                        continue
                    v = r[i] - dlo[i]
                    if v < best:
                        best, pending, pk, pi, ps, pb = v, True, 1, i, 1.0, dlo[i]
                    v = dhi[i] - r[i]
                    if v < best:
                        best, pending, pk, pi, ps, pb = v, True, 1, i, -1.0, dhi[i]
                peq = False
            if not pending:
                ok = True
                break
            up = 0.0
        q = len(kind)
        K, I, S = np.array(kind, int), np.array(idx, int), np.array(sgn)
        Np = S * ps * _qp_dots(K, I, pk, pi, Hinv, G, W, eps)
        if q:
            M = np.empty((q, q))
            for a in range(q):
                M[a] = S[a] * S * _qp_dots(K, I, K[a], I[a], Hinv, G, W, eps)
            try:
                L = np.linalg.cholesky(M)
            except np.linalg.LinAlgError:
                break  # dependent working set
            rr = np.linalg.solve(L.T, np.linalg.solve(L, Np))
        else:
            rr = np.zeros(0)
        npp = Hinv[pi] if pk == 0 else W[pi, pi] + eps
        zn = npp - float(Np @ rr)
        # primal step z = D^-1 (n_p - N r), split into d and slack parts
        c = rr * S
        zd = np.zeros(n)
        zs = np.zeros(m)
        np.subtract.at(zd, I[K == 0], c[K == 0])
        zd -= c[K == 1] @ G[I[K == 1]]
        zs[I[K == 1]] -= c[K == 1]
        if pk == 0:
            zd[pi] += ps
        else:
            zd += ps * G[pi]
            zs[pi] += ps
        zd *= Hinv
        zs *= eps
        # dual step limit from active inequalities
        t1, kdrop = math.inf, -1
        for a in range(q):
            if not isq[a] and rr[a] > 0.0 and u[a] / rr[a] < t1:
                t1, kdrop = u[a] / rr[a], a
        val = ps * ((d[pi] if pk == 0 else float(G[pi] @ d) + s[pi]) - pb)
        t2 = -val / zn if zn > 1e-14 * npp else math.inf
        if t1 == math.inf and t2 == math.inf:
            break  # infeasible
        t = min(t1, t2)
        if t2 < math.inf:
            d += t * zd
            s += t * zs
        for a in range(q):
            u[a] -= t * rr[a]
        up += t
        if t2 <= t1:
            kind.append(pk)
            idx.append(pi)
            sgn.append(ps)
            isq.append(peq)
            u.append(up)
            (box_act if pk == 0 else row_act)[pi] = True
            pending = False
        else:
            (box_act if kind[kdrop] == 0 else row_act)[idx[kdrop]] = False
            for lst in (kind, idx, sgn, isq, u):
                del lst[kdrop]
    return d, ok, list(zip(kind, idx, sgn))


def qp_active_set(H, g, G, dlo, dhi, blo, bhi, fixed, side, max_iter=0, eps=1e-8):
    """Dual active-set solve of ``min 1/2 d'diag(H)d + g'd``.

    Subject to ``dlo <= G d <= dhi`` and ``blo <= d <= bhi``; rows with
    ``dlo == dhi`` and variables with ``blo >= bhi`` are equalities.  The
    Goldfarb-Idnani method starts from the unconstrained minimum and adds
    violated constraints one at a time, so it returns the exact optimum.
    If the rows are inconsistent it re-solves the elastic problem, where
    each row gets a slack with penalty ``|s|^2 / (2 eps)``; the box always
    stays hard.  On return ``fixed`` (-1/0/+1 per variable) and ``side``
    (-1/0/+1 per row, 2 for equality rows) hold the final active set.
    ``max_iter = 0`` picks ``10 (n + m) + 50``.
    """
    n = H.shape[0]
    m = G.shape[0]
    cap = max_iter if max_iter > 0 else 10 * (n + m) + 50
    d, ok, active = _qp_dual(H, g, G, dlo, dhi, blo, bhi, cap, 0.0)
    if not ok:
        d, ok, active = _qp_dual(H, g, G, dlo, dhi, blo, bhi, cap, eps)
    np.clip(d, blo, bhi, out=d)
    fixed[:] = 0
    side[:] = 0
    for k, i, sg in active:
        if k == 0:
            fixed[i] = 1 if sg < 0 else -1
        else:
            side[i] = 2 if dlo[i] >= dhi[i] else (1 if sg < 0 else -1)
    return d
