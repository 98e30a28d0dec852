# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled cell scheduling kernel; same contract as ``_kernel_py.schedule_cell``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, NAN, INFINITY

cnp.import_array()


cdef inline double _tr(double d, double vp, double a) nogil:
    if d >= vp * vp / a:
        return d / vp + vp / a
    return 2.0 * sqrt(d / a)


cdef inline double _fmax(double a, double b) nogil:
    return a if a >= b else b


def schedule_cell(double[:, ::1] fx, double[:, ::1] fz, double[:, ::1] tp,
                  unsigned char[:, ::1] valid, double[::1] x0, double[::1] z0,
                  double v, double v_max, double a_max, double front0, double rear0,
                  double clearance):
    cdef Py_ssize_t R = fx.shape[0], K = fx.shape[1]
    cdef Py_ssize_t r, k, j, i, n, m
    cdef int d
    cdef double margin = v * v / (2.0 * a_max)
    cdef double t_min, lo, hi, zt, z, t, tv, th, tn, dep, dx, peak, t_move, t_ride, d_front, t_arr
    cdef double kz, kt

    arrival_np = np.full((R, K), np.nan)
    cdef double[:, ::1] arrival = arrival_np
    t_cur_np = np.zeros(R)
    x_cur_np = np.array(x0, dtype=np.float64)
    z_cur_np = np.array(z0, dtype=np.float64)
    cdef double[::1] t_cur = t_cur_np
    cdef double[::1] x_cur = x_cur_np
    cdef double[::1] z_cur = z_cur_np
    # pending dwells per arm, appended in departure order
    pz_np = np.empty((R, K + 1))
    pd_np = np.empty((R, K + 1))
    cdef double[:, ::1] pz = pz_np
    cdef double[:, ::1] pd = pd_np
    plo_np = np.zeros(R, dtype=np.intp)
    phi_np = np.zeros(R, dtype=np.intp)
    cdef Py_ssize_t[::1] plo = plo_np
    cdef Py_ssize_t[::1] phi = phi_np
    # yield records for every row of the current zone
    cap = R * (K + 2) + 1
    rz_np = np.empty((R, cap))
    rt_np = np.empty((R, cap))
    rn_np = np.zeros(R, dtype=np.intp)
    cdef double[:, ::1] rz = rz_np
    cdef double[:, ::1] rt = rt_np
    cdef Py_ssize_t[::1] rn = rn_np

    for k in range(K):
        t_min = t_cur[0]
        for r in range(1, R):
            if t_cur[r] < t_min:
                t_min = t_cur[r]
        for r in range(R):
            while plo[r] < phi[r] and pd[r, plo[r]] <= t_min:
                plo[r] += 1

        for r in range(R):
            rn[r] = 0
            if not valid[r, k]:
                continue
            zt = fz[r, k]
            if zt == z_cur[r]:
                continue
            d = 1 if zt > z_cur[r] else -1
            if d > 0:
                lo = z_cur[r]
                hi = zt
            else:
                lo = zt
                hi = z_cur[r]
            n = 0
            j = r + d
            while 0 <= j < R:
                if lo < z_cur[j] < hi:
                    rz[r, n] = z_cur[j]
                    rt[r, n] = t_cur[j]
                    n += 1
                for i in range(plo[j], phi[j]):
                    if pd[j, i] > t_cur[r] and lo < pz[j, i] < hi:
                        rz[r, n] = pz[j, i]
                        rt[r, n] = pd[j, i]
                        n += 1
                j += d
            # insertion sort by (d*z, t)
            for i in range(1, n):
                kz = rz[r, i]
                kt = rt[r, i]
                m = i - 1
                while m >= 0 and (d * rz[r, m] > d * kz or (d * rz[r, m] == d * kz and rt[r, m] > kt)):
                    rz[r, m + 1] = rz[r, m]
                    rt[r, m + 1] = rt[r, m]
                    m -= 1
                rz[r, m + 1] = kz
                rt[r, m + 1] = kt
            rn[r] = n

        for r in range(R):
            if not valid[r, k]:
                continue
            # vertical
            t = t_cur[r]
            z = z_cur[r]
            for i in range(rn[r]):
                t = _fmax(rt[r, i], t + _tr(fabs(rz[r, i] - z), v_max, a_max))
                z = rz[r, i]
            tv = t + _tr(fabs(fz[r, k] - z), v_max, a_max)
            # horizontal
            dx = fx[r, k] - x_cur[r]
            peak = v_max + v if dx >= 0 else v_max - v
            if peak <= 0:
                th = INFINITY
            else:
                t_move = t_cur[r] + _tr(fabs(dx), peak, a_max)
                t_ride = (fx[r, k] - front0) / v + v / (2.0 * a_max)
                d_front = front0 + v * t_cur[r] - x_cur[r]
                if d_front >= clearance:
                    t_arr = t_move
                else:
                    t_arr = _fmax(t_ride, t_move)
                th = _fmax(t_arr, t_ride)
            tn = _fmax(tv, th)
            arrival[r, k] = tn
            dep = tn + tp[r, k]
            if fx[r, k] < rear0 + v * dep + margin:
                return False, r, k, arrival_np
            pz[r, phi[r]] = z_cur[r]
            pd[r, phi[r]] = t_cur[r]
            phi[r] += 1
            t_cur[r] = dep
            x_cur[r] = fx[r, k]
            z_cur[r] = fz[r, k]
    return True, -1, -1, arrival_np
