# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kinematics and narrow-phase kernels.

Mirrors ``_pykernels`` function for function.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, fabs, INFINITY

cnp.import_array()


cdef inline void _rodrigues(double wx, double wy, double wz, double[:, ::1] R) noexcept nogil:
    cdef double th = sqrt(wx * wx + wy * wy + wz * wz)
    cdef double a, b
    if th < 1e-8:
        a = 1.0
        b = 0.5
    else:
        a = sin(th) / th
        b = (1.0 - cos(th)) / (th * th)
    # I + a K + b K^2
    R[0, 0] = 1.0 - b * (wy * wy + wz * wz)
    R[0, 1] = -a * wz + b * wx * wy
    R[0, 2] = a * wy + b * wx * wz
    R[1, 0] = a * wz + b * wx * wy
    R[1, 1] = 1.0 - b * (wx * wx + wz * wz)
    R[1, 2] = -a * wx + b * wy * wz
    R[2, 0] = -a * wy + b * wx * wz
    R[2, 1] = a * wx + b * wy * wz
    R[2, 2] = 1.0 - b * (wx * wx + wy * wy)


cdef inline void _left_jacobian(double wx, double wy, double wz, double[:, ::1] J) noexcept nogil:
    cdef double th = sqrt(wx * wx + wy * wy + wz * wz)
    cdef double a, b, t2
    if th < 1e-6:
        a = 0.5
        b = 1.0 / 6.0
    else:
        t2 = th * th
        a = (1.0 - cos(th)) / t2
        b = (th - sin(th)) / (t2 * th)
    J[0, 0] = 1.0 - b * (wy * wy + wz * wz)
    J[0, 1] = -a * wz + b * wx * wy
    J[0, 2] = a * wy + b * wx * wz
    J[1, 0] = a * wz + b * wx * wy
    J[1, 1] = 1.0 - b * (wx * wx + wz * wz)
    J[1, 2] = -a * wx + b * wy * wz
    J[2, 0] = -a * wy + b * wx * wz
    J[2, 1] = a * wx + b * wy * wz
    J[2, 2] = 1.0 - b * (wx * wx + wy * wy)


def forward(double[::1] q, cnp.intp_t[::1] parent, cnp.intp_t[::1] jtype, double[:, ::1] axis,
            double[:, :, ::1] origin_R, double[:, ::1] origin_t, cnp.intp_t[::1] qidx):
    cdef Py_ssize_t L = parent.shape[0]
    Rw_arr = np.empty((L, 3, 3))
    pw_arr = np.empty((L, 3))
    aw_arr = np.zeros((L, 3))
    cdef double[:, :, ::1] Rw = Rw_arr
    cdef double[:, ::1] pw = pw_arr
    cdef double[:, ::1] aw = aw_arr
    cdef double[:, ::1] Rj = np.empty((3, 3))
    cdef double[:, ::1] Rq = np.empty((3, 3))
    cdef double pj[3]
    cdef double a[3]
    cdef Py_ssize_t i, k, r, c, m
    cdef double s, val
    with nogil:
        _rodrigues(q[3], q[4], q[5], Rw[0])
        pw[0, 0] = q[0]
        pw[0, 1] = q[1]
        pw[0, 2] = q[2]
        for i in range(1, L):
            k = parent[i]
            for r in range(3):
                for c in range(3):
                    s = 0.0
                    for m in range(3):
                        s = s + Rw[k, r, m] * origin_R[i, m, c]
                    Rj[r, c] = s
                s = 0.0
                for m in range(3):
                    s = s + Rw[k, r, m] * origin_t[i, m]
                pj[r] = pw[k, r] + s
            for r in range(3):
                a[r] = Rj[r, 0] * axis[i, 0] + Rj[r, 1] * axis[i, 1] + Rj[r, 2] * axis[i, 2]
                aw[i, r] = a[r]
            if jtype[i] == 1:
                val = q[qidx[i]]
                _rodrigues(axis[i, 0] * val, axis[i, 1] * val, axis[i, 2] * val, Rq)
                for r in range(3):
                    for c in range(3):
                        Rw[i, r, c] = Rj[r, 0] * Rq[0, c] + Rj[r, 1] * Rq[1, c] + Rj[r, 2] * Rq[2, c]
                    pw[i, r] = pj[r]
            elif jtype[i] == 2:
                val = q[qidx[i]]
                for r in range(3):
                    for c in range(3):
                        Rw[i, r, c] = Rj[r, c]
                    pw[i, r] = pj[r] + a[r] * val
            else:
                for r in range(3):
                    for c in range(3):
                        Rw[i, r, c] = Rj[r, c]
                    pw[i, r] = pj[r]
    return Rw_arr, pw_arr, aw_arr


def point_jacobian(double[::1] q, double[:, ::1] pw, double[:, ::1] aw, cnp.intp_t[::1] jtype,
                   cnp.intp_t[::1] qidx, cnp.intp_t[::1] chain, double[::1] point, J_arr):
    cdef double[:, ::1] J = J_arr
    cdef double[:, ::1] Jl = np.empty((3, 3))
    cdef Py_ssize_t n = J.shape[1]
    cdef Py_ssize_t r, c, k, idx
    cdef double dx, dy, dz, ax, ay, az
    with nogil:
        for r in range(6):
            for c in range(n):
                J[r, c] = 0.0
        _left_jacobian(q[3], q[4], q[5], Jl)
        J[0, 0] = 1.0
        J[1, 1] = 1.0
        J[2, 2] = 1.0
        dx = point[0] - pw[0, 0]
        dy = point[1] - pw[0, 1]
        dz = point[2] - pw[0, 2]
        for c in range(3):
            # -skew(d) @ Jl
            J[0, 3 + c] = dz * Jl[1, c] - dy * Jl[2, c]
            J[1, 3 + c] = -dz * Jl[0, c] + dx * Jl[2, c]
            J[2, 3 + c] = dy * Jl[0, c] - dx * Jl[1, c]
            J[3, 3 + c] = Jl[0, c]
            J[4, 3 + c] = Jl[1, c]
            J[5, 3 + c] = Jl[2, c]
        for idx in range(chain.shape[0]):
            k = chain[idx]
            c = qidx[k]
            if c < 0:
                continue
            ax = aw[k, 0]
            ay = aw[k, 1]
            az = aw[k, 2]
            if jtype[k] == 1:
                dx = point[0] - pw[k, 0]
                dy = point[1] - pw[k, 1]
                dz = point[2] - pw[k, 2]
                J[0, c] = ay * dz - az * dy
                J[1, c] = az * dx - ax * dz
                J[2, c] = ax * dy - ay * dx
                J[3, c] = ax
                J[4, c] = ay
                J[5, c] = az
            elif jtype[k] == 2:
                J[0, c] = ax
                J[1, c] = ay
                J[2, c] = az
    return J_arr


def com_jacobian(double[::1] q, double[:, :, ::1] Rw, double[:, ::1] pw, double[:, ::1] aw,
                 cnp.intp_t[::1] parent, cnp.intp_t[::1] jtype, cnp.intp_t[::1] qidx,
                 double[::1] mass, double[:, ::1] com_local, Jc_arr):
    cdef double[:, ::1] Jc = Jc_arr
    cdef Py_ssize_t L = parent.shape[0]
    cdef Py_ssize_t n = Jc.shape[1]
    cdef double[::1] sm = np.empty(L)
    cdef double[:, ::1] smc = np.empty((L, 3))
    cdef double[:, ::1] Jl = np.empty((3, 3))
    cdef double com[3]
    cdef double M = 0.0
    cdef Py_ssize_t i, k, r, c
    cdef double dx, dy, dz, ax, ay, az, mi
    with nogil:
        for i in range(L):
            mi = mass[i]
            M = M + mi
            sm[i] = mi
            for r in range(3):
                smc[i, r] = mi * (pw[i, r] + Rw[i, r, 0] * com_local[i, 0]
                                  + Rw[i, r, 1] * com_local[i, 1] + Rw[i, r, 2] * com_local[i, 2])
        for i in range(L - 1, 0, -1):
            k = parent[i]
            sm[k] += sm[i]
            for r in range(3):
                smc[k, r] += smc[i, r]
        for r in range(3):
            com[r] = smc[0, r] / M
        for r in range(3):
            for c in range(n):
                Jc[r, c] = 0.0
        Jc[0, 0] = 1.0
        Jc[1, 1] = 1.0
        Jc[2, 2] = 1.0
        _left_jacobian(q[3], q[4], q[5], Jl)
        dx = com[0] - pw[0, 0]
        dy = com[1] - pw[0, 1]
        dz = com[2] - pw[0, 2]
        for c in range(3):
            Jc[0, 3 + c] = dz * Jl[1, c] - dy * Jl[2, c]
            Jc[1, 3 + c] = -dz * Jl[0, c] + dx * Jl[2, c]
            Jc[2, 3 + c] = dy * Jl[0, c] - dx * Jl[1, c]
        for i in range(1, L):
            c = qidx[i]
            if c < 0:
                continue
            ax = aw[i, 0]
            ay = aw[i, 1]
            az = aw[i, 2]
            if jtype[i] == 1:
                dx = (smc[i, 0] - sm[i] * pw[i, 0]) / M
                dy = (smc[i, 1] - sm[i] * pw[i, 1]) / M
                dz = (smc[i, 2] - sm[i] * pw[i, 2]) / M
                Jc[0, c] = ay * dz - az * dy
                Jc[1, c] = az * dx - ax * dz
                Jc[2, c] = ax * dy - ay * dx
            elif jtype[i] == 2:
                Jc[0, c] = ax * sm[i] / M
                Jc[1, c] = ay * sm[i] / M
                Jc[2, c] = az * sm[i] / M
    return np.array([com[0], com[1], com[2]])


def center_of_mass(double[:, :, ::1] Rw, double[:, ::1] pw, double[::1] mass, double[:, ::1] com_local):
    cdef Py_ssize_t L = pw.shape[0]
    cdef double acc[3]
    cdef double M = 0.0
    cdef Py_ssize_t i, r
    acc[0] = 0.0
    acc[1] = 0.0
    acc[2] = 0.0
    for i in range(L):
        M += mass[i]
        for r in range(3):
            acc[r] += mass[i] * (pw[i, r] + Rw[i, r, 0] * com_local[i, 0]
                                 + Rw[i, r, 1] * com_local[i, 1] + Rw[i, r, 2] * com_local[i, 2])
    return np.array([acc[0] / M, acc[1] / M, acc[2] / M])


# ------------------------------------------------------------ narrow phase
cdef inline double _clamp01(double x) noexcept nogil:
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


def segment_segment_distance(double[::1] p0, double[::1] p1, double[::1] q0, double[::1] q1):
    cdef double d1[3]
    cdef double d2[3]
    cdef double r[3]
    cdef double a = 0.0, e = 0.0, f = 0.0, c = 0.0, b = 0.0, denom, s, t, dx, acc = 0.0
    cdef double eps = 1e-14
    cdef int i
    for i in range(3):
        d1[i] = p1[i] - p0[i]
        d2[i] = q1[i] - q0[i]
        r[i] = p0[i] - q0[i]
        a += d1[i] * d1[i]
        e += d2[i] * d2[i]
        f += d2[i] * r[i]
    if a <= eps and e <= eps:
        return sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    if a <= eps:
        s = 0.0
        t = _clamp01(f / e)
    else:
        for i in range(3):
            c += d1[i] * r[i]
        if e <= eps:
            t = 0.0
            s = _clamp01(-c / a)
        else:
            for i in range(3):
                b += d1[i] * d2[i]
            denom = a * e - b * b
            if denom > eps:
                s = _clamp01((b * f - c * e) / denom)
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = _clamp01(-c / a)
            elif t > 1.0:
                t = 1.0
                s = _clamp01((b - c) / a)
    for i in range(3):
        dx = (p0[i] + d1[i] * s) - (q0[i] + d2[i] * t)
        acc += dx * dx
    return sqrt(acc)


def point_segment_distance(double[::1] p, double[::1] q0, double[::1] q1):
    cdef double d[3]
    cdef double dd = 0.0, pd = 0.0, t, acc = 0.0, x
    cdef int i
    for i in range(3):
        d[i] = q1[i] - q0[i]
        dd += d[i] * d[i]
        pd += (p[i] - q0[i]) * d[i]
    t = 0.0 if dd <= 1e-14 else _clamp01(pd / dd)
    for i in range(3):
        x = p[i] - (q0[i] + t * d[i])
        acc += x * x
    return sqrt(acc)


cdef inline double _pbsd(double px, double py, double pz, double[::1] c, double[:, ::1] R, double[::1] h) noexcept nogil:
    cdef double d[3]
    cdef double lx = px - c[0], ly = py - c[1], lz = pz - c[2]
    cdef double out = 0.0, mx = -INFINITY, v
    cdef int i
    for i in range(3):
        v = fabs(R[0, i] * lx + R[1, i] * ly + R[2, i] * lz) - h[i]
        d[i] = v
        if v > mx:
            mx = v
        if v > 0.0:
            out += v * v
    return sqrt(out) + (mx if mx < 0.0 else 0.0)


def point_box_signed_distance(double[::1] p, double[::1] c, double[:, ::1] R, double[::1] h):
    return _pbsd(p[0], p[1], p[2], c, R, h)


def segment_box_distance(double[::1] p0, double[::1] p1, double[::1] c, double[:, ::1] R, double[::1] h):
    cdef double s[3]
    cdef double v[3]
    cdef double ts[8]
    cdef int nt = 2, i, k, m, j
    cdef double t, tmp, ta, tb, tm, A, B, x, bnd, best = INFINITY, dist, tt, cand[3]
    for i in range(3):
        s[i] = R[0, i] * (p0[0] - c[0]) + R[1, i] * (p0[1] - c[1]) + R[2, i] * (p0[2] - c[2])
        v[i] = R[0, i] * (p1[0] - p0[0]) + R[1, i] * (p1[1] - p0[1]) + R[2, i] * (p1[2] - p0[2])
    ts[0] = 0.0
    ts[1] = 1.0
    for i in range(3):
        if v[i] != 0.0:
            for k in range(2):
                bnd = h[i] if k == 1 else -h[i]
                t = (bnd - s[i]) / v[i]
                if 0.0 < t < 1.0:
                    ts[nt] = t
                    nt += 1
    # insertion sort
    for i in range(1, nt):
        tmp = ts[i]
        j = i - 1
        while j >= 0 and ts[j] > tmp:
            ts[j + 1] = ts[j]
            j -= 1
        ts[j + 1] = tmp
    for k in range(nt - 1):
        ta = ts[k]
        tb = ts[k + 1]
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
            t = -B / (2.0 * A)
            if t < ta:
                t = ta
            elif t > tb:
                t = tb
        else:
            t = ta
        cand[0] = t
        cand[1] = ta
        cand[2] = tb
        for m in range(3):
            tt = cand[m]
            dist = 0.0
            for i in range(3):
                x = fabs(s[i] + tt * v[i]) - h[i]
                if x > 0.0:
                    dist += x * x
            dist = sqrt(dist)
            if dist < best:
                best = dist
    return best


def segment_box_penetration(double[::1] p0, double[::1] p1, double[::1] c, double[:, ::1] R, double[::1] h):
    cdef double lo = 0.0, hi = 1.0, m1, m2, t, f1, f2, r0, r1
    cdef double d[3]
    cdef int i, it
    for i in range(3):
        d[i] = p1[i] - p0[i]
    for it in range(80):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = _pbsd(p0[0] + m1 * d[0], p0[1] + m1 * d[1], p0[2] + m1 * d[2], c, R, h)
        f2 = _pbsd(p0[0] + m2 * d[0], p0[1] + m2 * d[1], p0[2] + m2 * d[2], c, R, h)
        if f1 < f2:
            hi = m2
        else:
            lo = m1
    t = 0.5 * (lo + hi)
    f1 = _pbsd(p0[0] + t * d[0], p0[1] + t * d[1], p0[2] + t * d[2], c, R, h)
    r0 = _pbsd(p0[0], p0[1], p0[2], c, R, h)
    r1 = _pbsd(p1[0], p1[1], p1[2], c, R, h)
    return min(f1, r0, r1)


def box_box_penetration(double[::1] c1, double[:, ::1] R1, double[::1] h1,
                        double[::1] c2, double[:, ::1] R2, double[::1] h2):
    cdef double T[3]
    cdef double ax[3]
    cdef double best = INFINITY, n, ra, rb, proj, overlap
    cdef int i, j, k, m
    for i in range(3):
        T[i] = c2[i] - c1[i]
    for k in range(15):
        if k < 3:
            for m in range(3):
                ax[m] = R1[m, k]
        elif k < 6:
            for m in range(3):
                ax[m] = R2[m, k - 3]
        else:
            i = (k - 6) // 3
            j = (k - 6) % 3
            ax[0] = R1[1, i] * R2[2, j] - R1[2, i] * R2[1, j]
            ax[1] = R1[2, i] * R2[0, j] - R1[0, i] * R2[2, j]
            ax[2] = R1[0, i] * R2[1, j] - R1[1, i] * R2[0, j]
            n = sqrt(ax[0] * ax[0] + ax[1] * ax[1] + ax[2] * ax[2])
            if n <= 1e-9:
                continue
            for m in range(3):
                ax[m] = ax[m] / n
        ra = 0.0
        rb = 0.0
        for m in range(3):
            ra += h1[m] * fabs(R1[0, m] * ax[0] + R1[1, m] * ax[1] + R1[2, m] * ax[2])
            rb += h2[m] * fabs(R2[0, m] * ax[0] + R2[1, m] * ax[1] + R2[2, m] * ax[2])
        proj = fabs(T[0] * ax[0] + T[1] * ax[1] + T[2] * ax[2])
        overlap = ra + rb - proj
        if overlap < best:
            best = overlap
            if best < 0.0:
                return best
    return best


# ---------------------------------------------------------- active-set QP
cdef int _cholesky_solve(double[:, ::1] M, double[::1] b, Py_ssize_t m) noexcept nogil:
    """In-place Cholesky of the leading m x m block, then solve M x = b into b."""
    cdef Py_ssize_t i, j, k
    cdef double s
    for j in range(m):
        s = M[j, j]
        for k in range(j):
            s -= M[j, k] * M[j, k]
        if s <= 0.0:
            return -1
        M[j, j] = sqrt(s)
        for i in range(j + 1, m):
            s = M[i, j]
            for k in range(j):
                s -= M[i, k] * M[j, k]
            M[i, j] = s / M[j, j]
    for i in range(m):
        s = b[i]
        for k in range(i):
            s -= M[i, k] * b[k]
        b[i] = s / M[i, i]
    for i in range(m - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, m):
            s -= M[k, i] * b[k]
        b[i] = s / M[i, i]
    return 0


cdef inline double _qp_dot(int k1, Py_ssize_t i1, int k2, Py_ssize_t i2, double[::1] Hinv,
                           double[:, ::1] G, double[:, ::1] W, double eps) noexcept nogil:
    if k1 == 0:
        if k2 == 0:
            return Hinv[i1] if i1 == i2 else 0.0
        return G[i2, i1] * Hinv[i1]
    if k2 == 0:
        return G[i1, i2] * Hinv[i2]
    return W[i1, i2] + (eps if i1 == i2 else 0.0)


def qp_active_set(double[::1] H, double[::1] g, double[:, ::1] G, double[::1] dlo, double[::1] dhi,
                  double[::1] blo, double[::1] bhi, signed char[::1] fixed, signed char[::1] side,
                  int max_iter=0, double eps=1e-8):
    cdef Py_ssize_t n = H.shape[0]
    cdef Py_ssize_t m = G.shape[0]
    cdef Py_ssize_t qmax = n + m + 1
    cdef int cap = max_iter if max_iter > 0 else <int>(10 * (n + m) + 50)
    d_arr = np.zeros(n)
    cdef double[::1] d = d_arr
    cdef double[::1] Hinv = np.zeros(n)
    cdef double[:, ::1] W = np.zeros((max(m, 1), max(m, 1)))
    cdef double[::1] s = np.zeros(max(m, 1))
    cdef double[::1] zd = np.zeros(n)
    cdef double[::1] zs = np.zeros(max(m, 1))
    cdef double[::1] Np = np.zeros(qmax)
    cdef double[::1] rr = np.zeros(qmax)
    cdef double[::1] u = np.zeros(qmax)
    cdef double[::1] asgn = np.zeros(qmax)
    cdef double[:, ::1] M = np.zeros((qmax, qmax))
    cdef int[::1] akind = np.zeros(qmax, dtype=np.intc)
    cdef int[::1] aeq = np.zeros(qmax, dtype=np.intc)
    cdef cnp.intp_t[::1] aidx = np.zeros(qmax, dtype=np.intp)
    cdef signed char[::1] bact = np.zeros(n, dtype=np.int8)
    cdef signed char[::1] ract = np.zeros(max(m, 1), dtype=np.int8)
    cdef Py_ssize_t i, j, a, b, q, pi = 0, kdrop
    cdef int phase, it, ok, pending, pk = 0, peq = 0
    cdef double e, tol = 1e-11, v, best, ps = 0.0, pb = 0.0, up = 0.0
    cdef double npp, zn, t1, t2, t, c, val, r
    with nogil:
        for i in range(n):
            Hinv[i] = 1.0 / H[i]
        for i in range(m):
            for j in range(i + 1):
                v = 0.0
                for a in range(n):
                    v += G[i, a] * G[j, a] * Hinv[a]
                W[i, j] = v
                W[j, i] = v
        for phase in range(2):
            # hard rows first; the elastic pass only if they are inconsistent
            e = 0.0 if phase == 0 else eps
            for i in range(n):
                d[i] = -g[i] * Hinv[i]
                bact[i] = 0
            for i in range(m):
                s[i] = 0.0
                ract[i] = 0
            q = 0
            pending = 0
            ok = 0
            for it in range(cap):
                if not pending:
                    best = -tol
                    for j in range(n):
                        if blo[j] >= bhi[j] and not bact[j]:
                            v = d[j] - bhi[j]
                            if fabs(v) > tol:
                                pending, pk, pi, pb, peq = 1, 0, j, bhi[j], 1
                                ps = 1.0 if v < 0 else -1.0
                                break
                    if not pending:
                        for i in range(m):
                            if dlo[i] >= dhi[i] and not ract[i]:
                                v = s[i] - dlo[i]
                                for a in range(n):
                                    v += G[i, a] * d[a]
                                if fabs(v) > tol:
                                    pending, pk, pi, pb, peq = 1, 1, i, dlo[i], 1
                                    ps = 1.0 if v < 0 else -1.0
                                    break
                    if not pending:
                        peq = 0
                        for j in range(n):
                            if bact[j] or blo[j] >= bhi[j]:
                                continue
                            v = d[j] - blo[j]
                            if v < best:
                                best, pending, pk, pi, ps, pb = v, 1, 0, j, 1.0, blo[j]
                            v = bhi[j] - d[j]
                            if v < best:
                                best, pending, pk, pi, ps, pb = v, 1, 0, j, -1.0, bhi[j]
                        for i in range(m):
                            if ract[i] or dlo[i] >= dhi[i]:
                                continue
                            r = s[i]
                            for a in range(n):
                                r += G[i, a] * d[a]
                            v = r - dlo[i]
                            if v < best:
                                best, pending, pk, pi, ps, pb = v, 1, 1, i, 1.0, dlo[i]
                            v = dhi[i] - r
                            if v < best:
                                best, pending, pk, pi, ps, pb = v, 1, 1, i, -1.0, dhi[i]
                    if not pending:
                        ok = 1
                        break
                    up = 0.0
                for a in range(q):
                    Np[a] = asgn[a] * ps * _qp_dot(akind[a], aidx[a], pk, pi, Hinv, G, W, e)
                    rr[a] = Np[a]
                    for b in range(a + 1):
                        M[a, b] = asgn[a] * asgn[b] * _qp_dot(akind[a], aidx[a], akind[b], aidx[b], Hinv, G, W, e)
                        M[b, a] = M[a, b]
                if q > 0 and _cholesky_solve(M, rr, q) != 0:
                    break  # dependent working set
                npp = _qp_dot(pk, pi, pk, pi, Hinv, G, W, e)
                zn = npp
                for a in range(q):
                    zn -= Np[a] * rr[a]
                # primal step z = D^-1 (n_p - N r), split into d and slack parts
                for j in range(n):
                    zd[j] = 0.0
                for i in range(m):
                    zs[i] = 0.0
                for a in range(q):
                    c = rr[a] * asgn[a]
                    if akind[a] == 0:
                        zd[aidx[a]] -= c
                    else:
                        for j in range(n):
                            zd[j] -= c * G[aidx[a], j]
                        zs[aidx[a]] -= c
                if pk == 0:
                    zd[pi] += ps
                else:
                    for j in range(n):
                        zd[j] += ps * G[pi, j]
                    zs[pi] += ps
                for j in range(n):
                    zd[j] *= Hinv[j]
                for i in range(m):
                    zs[i] *= e
                # dual step limit from active inequalities
                t1 = INFINITY
                kdrop = -1
                for a in range(q):
                    if not aeq[a] and rr[a] > 0.0 and u[a] / rr[a] < t1:
                        t1 = u[a] / rr[a]
                        kdrop = a
                if pk == 0:
                    val = d[pi]
                else:
                    val = s[pi]
                    for j in range(n):
                        val += G[pi, j] * d[j]
                val = ps * (val - pb)
                t2 = -val / zn if zn > 1e-14 * npp else INFINITY
                if t1 == INFINITY and t2 == INFINITY:
                    break  # infeasible
                t = t1 if t1 < t2 else t2
                if t2 < INFINITY:
                    for j in range(n):
                        d[j] += t * zd[j]
                    for i in range(m):
                        s[i] += t * zs[i]
                for a in range(q):
                    u[a] -= t * rr[a]
                up += t
                if t2 <= t1:
                    akind[q] = pk
                    aidx[q] = pi
                    asgn[q] = ps
                    aeq[q] = peq
                    u[q] = up
                    q += 1
                    if pk == 0:
                        bact[pi] = 1
                    else:
                        ract[pi] = 1
                    pending = 0
                else:
                    if akind[kdrop] == 0:
                        bact[aidx[kdrop]] = 0
                    else:
                        ract[aidx[kdrop]] = 0
                    for a in range(kdrop, q - 1):
                        akind[a] = akind[a + 1]
                        aidx[a] = aidx[a + 1]
                        asgn[a] = asgn[a + 1]
                        aeq[a] = aeq[a + 1]
                        u[a] = u[a + 1]
                    q -= 1
            if ok:
                break
        for j in range(n):
            if d[j] < blo[j]:
                d[j] = blo[j]
            elif d[j] > bhi[j]:
                d[j] = bhi[j]
            fixed[j] = 0
        for i in range(m):
            side[i] = 0
        for a in range(q):
            if akind[a] == 0:
                fixed[aidx[a]] = 1 if asgn[a] < 0 else -1
            elif dlo[aidx[a]] >= dhi[aidx[a]]:
                side[aidx[a]] = 2
            else:
                side[aidx[a]] = 1 if asgn[a] < 0 else -1
    return d_arr
