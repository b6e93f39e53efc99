# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_fallback`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, isfinite, INFINITY

cnp.import_array()

cdef double HALF_LOG_2PI = 0.91893853320467274178


def colmax_abs(values):
    cdef const double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t S = v.shape[0], n = v.shape[1], s, i
    f_arr = np.zeros(n)
    bad_arr = np.zeros(n, dtype=np.bool_)
    cdef double[::1] f = f_arr
    cdef cnp.npy_bool[::1] bad = bad_arr
    cdef double a
    for s in range(S):
        for i in range(n):
            a = v[s, i]
            if not isfinite(a):
                bad[i] = 1
                continue
            a = fabs(a)
            if a > f[i]:
                f[i] = a
    for i in range(n):
        if bad[i]:
            f[i] = INFINITY
    return f_arr, bad_arr


def sample_labels(logp, u):
    cdef const double[:, ::1] lp = np.ascontiguousarray(logp, dtype=np.float64)
    cdef const double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = lp.shape[0], K = lp.shape[1], i, k, zi
    z_arr = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] z = z_arr
    cdef double[::1] cum = np.empty(K)
    cdef double mx, target
    for i in range(n):
        mx = lp[i, 0]
        for k in range(1, K):
            if lp[i, k] > mx:
                mx = lp[i, k]
        cum[0] = exp(lp[i, 0] - mx)
        for k in range(1, K):
            cum[k] = cum[k - 1] + exp(lp[i, k] - mx)
        target = uu[i] * cum[K - 1]
        zi = 0
        for k in range(K):
            if cum[k] <= target:
                zi += 1
        if zi > K - 1:
            zi = K - 1
        z[i] = zi
    return z_arr


def cluster_stats(X, y, w, z, Py_ssize_t K):
    cdef const double[:, ::1] xx = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef const Py_ssize_t[::1] zz = np.ascontiguousarray(z, dtype=np.intp)
    cdef Py_ssize_t n = xx.shape[0], R = xx.shape[1], i, a, b, k
    xtwx_arr = np.zeros((K, R, R))
    xtwy_arr = np.zeros((K, R))
    sw_arr = np.zeros(K)
    cdef double[:, :, ::1] xtwx = xtwx_arr
    cdef double[:, ::1] xtwy = xtwy_arr
    cdef double[::1] sw = sw_arr
    cdef double wi, wxa
    for i in range(n):
        wi = ww[i]
        if wi == 0.0:
            continue
        k = zz[i]
        sw[k] += wi
        for a in range(R):
            wxa = wi * xx[i, a]
            if wxa == 0.0:
                continue
            xtwy[k, a] += wxa * yy[i]
            for b in range(a + 1):
                xtwx[k, a, b] += wxa * xx[i, b]
    for k in range(K):
        for a in range(R):
            for b in range(a):
                xtwx[k, b, a] = xtwx[k, a, b]
    return xtwx_arr, xtwy_arr, sw_arr


def cluster_wrss(X, y, w, z, beta):
    cdef const double[:, ::1] xx = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef const Py_ssize_t[::1] zz = np.ascontiguousarray(z, dtype=np.intp)
    cdef const double[:, ::1] bb = np.ascontiguousarray(beta, dtype=np.float64)
    cdef Py_ssize_t n = xx.shape[0], R = xx.shape[1], K = bb.shape[0], i, a, k
    out_arr = np.zeros(K)
    cdef double[::1] out = out_arr
    cdef double r
    for i in range(n):
        k = zz[i]
        r = yy[i]
        for a in range(R):
            r -= xx[i, a] * bb[k, a]
        out[k] += ww[i] * r * r
    return out_arr


def mixture_logdens(y, means, log_pi, sigma):
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[:, ::1] mu = np.ascontiguousarray(means, dtype=np.float64)
    cdef const double[::1] lpi = np.ascontiguousarray(log_pi, dtype=np.float64)
    cdef const double[::1] sg = np.ascontiguousarray(sigma, dtype=np.float64)
    cdef Py_ssize_t n = mu.shape[0], K = mu.shape[1], i, k
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double[::1] c = np.empty(K)
    cdef double[::1] inv = np.empty(K)
    cdef double[::1] a = np.empty(K)
    cdef double mx, acc, t
    for k in range(K):
        c[k] = lpi[k] - log(sg[k]) - HALF_LOG_2PI
        inv[k] = 1.0 / sg[k]
    for i in range(n):
        mx = -INFINITY
        for k in range(K):
            t = (yy[i] - mu[i, k]) * inv[k]
            a[k] = c[k] - 0.5 * t * t
            if a[k] > mx:
                mx = a[k]
        if not isfinite(mx):
            out[i] = mx
            continue
        acc = 0.0
        for k in range(K):
            acc += exp(a[k] - mx)
        out[i] = mx + log(acc)
    return out_arr
