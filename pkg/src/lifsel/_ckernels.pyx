# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: Crit-hat scan and periodized filter-bank DWT."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()


def crit_select(const double[:, ::1] est, const double[:, ::1] dev_bound,
                const double[::1] pen, double slack):
    cdef Py_ssize_t R = est.shape[0], M = est.shape[1]
    cdef Py_ssize_t r, m, j
    cdef double sup, v, best, thr
    crit_arr = np.empty((R, M), dtype=np.float64)
    mhat_arr = np.empty(R, dtype=np.intp)
    cdef double[:, ::1] crit = crit_arr
    cdef Py_ssize_t[::1] mhat = mhat_arr
    with nogil:
        for r in range(R):
            best = INFINITY
            for m in range(M):
                sup = -INFINITY
                for j in range(m, M):
                    v = fabs(est[r, m] - est[r, j]) - dev_bound[j, m]
                    if v > sup:
                        sup = v
                crit[r, m] = sup + pen[m]
                if crit[r, m] < best:
                    best = crit[r, m]
            thr = best + slack
            mhat[r] = 0
            for m in range(M):
                if crit[r, m] <= thr:
                    mhat[r] = m
                    break
    return mhat_arr, crit_arr


def dwt_periodized(const double[:, ::1] x, const double[::1] h, int coarse_level):
    cdef Py_ssize_t R = x.shape[0], n = x.shape[1], L = h.shape[0]
    cdef Py_ssize_t r, k, l, nn, half, stop = 1 << coarse_level
    cdef double sa, sd
    g_arr = np.asarray(h)[::-1] * (-1.0) ** np.arange(L)
    cdef double[::1] g = np.ascontiguousarray(g_arr)
    out_arr = np.empty((R, n), dtype=np.float64)
    work_arr = np.array(x, dtype=np.float64, copy=True)
    tmp_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] work = work_arr
    cdef double[::1] tmp = tmp_arr
    with nogil:
        for r in range(R):
            nn = n
            while nn > stop:
                half = nn // 2
                for k in range(half):
                    sa = 0.0
                    sd = 0.0
                    for l in range(L):
                        sa = sa + h[l] * work[r, (2 * k + l) % nn]
                        sd = sd + g[l] * work[r, (2 * k + l) % nn]
                    tmp[k] = sa
                    out[r, half + k] = sd
                for k in range(half):
                    work[r, k] = tmp[k]
                nn = half
            for k in range(nn):
                out[r, k] = work[r, k]
    return out_arr


def idwt_periodized(const double[:, ::1] c, const double[::1] h, int coarse_level):
    cdef Py_ssize_t R = c.shape[0], n = c.shape[1], L = h.shape[0]
    cdef Py_ssize_t r, k, l, nn, idx
    cdef double a, d
    g_arr = np.asarray(h)[::-1] * (-1.0) ** np.arange(L)
    cdef double[::1] g = np.ascontiguousarray(g_arr)
    out_arr = np.empty((R, n), dtype=np.float64)
    cur_arr = np.empty(n, dtype=np.float64)
    nxt_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] cur = cur_arr
    cdef double[::1] nxt = nxt_arr
    with nogil:
        for r in range(R):
            nn = 1 << coarse_level
            for k in range(nn):
                cur[k] = c[r, k]
            while nn < n:
                for k in range(2 * nn):
                    nxt[k] = 0.0
                for k in range(nn):
                    a = cur[k]
                    d = c[r, nn + k]
                    for l in range(L):
                        idx = (2 * k + l) % (2 * nn)
                        nxt[idx] = nxt[idx] + h[l] * a + g[l] * d
                nn = 2 * nn
                for k in range(nn):
                    cur[k] = nxt[k]
            for k in range(n):
                out[r, k] = cur[k]
    return out_arr
