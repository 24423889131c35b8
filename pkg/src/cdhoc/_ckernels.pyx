# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Semantics mirror ``cdhoc._pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libc.stdlib cimport malloc, free

cnp.import_array()


def dtw(const double[::1] a, const double[::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    cdef Py_ssize_t i, j
    cdef double cost, best, up, left, diag
    cdef long bl
    cdef double *prev = <double *> malloc(m * sizeof(double))
    cdef double *cur = <double *> malloc(m * sizeof(double))
    cdef long *lprev = <long *> malloc(m * sizeof(long))
    cdef long *lcur = <long *> malloc(m * sizeof(long))
    cdef double *tmp
    cdef long *ltmp
    if prev == NULL or cur == NULL or lprev == NULL or lcur == NULL:
        free(prev); free(cur); free(lprev); free(lcur)
        raise MemoryError()
    try:
        for i in range(n):
            for j in range(m):
                cost = fabs(a[i] - b[j])
                if i == 0 and j == 0:
                    cur[j] = cost
                    lcur[j] = 1
                    continue
                if i == 0:
                    cur[j] = cost + cur[j - 1]
                    lcur[j] = lcur[j - 1] + 1
                    continue
                if j == 0:
                    cur[j] = cost + prev[j]
                    lcur[j] = lprev[j] + 1
                    continue
                diag = prev[j - 1]
                up = prev[j]
                left = cur[j - 1]
                best = diag
                bl = lprev[j - 1]
                if up < best:
                    best = up
                    bl = lprev[j]
                if left < best:
                    best = left
                    bl = lcur[j - 1]
                cur[j] = cost + best
                lcur[j] = bl + 1
            tmp = prev; prev = cur; cur = tmp
            ltmp = lprev; lprev = lcur; lcur = ltmp
        return prev[m - 1], int(lprev[m - 1])
    finally:
        free(prev); free(cur); free(lprev); free(lcur)


cdef inline Py_ssize_t _window_start(const double[::1] xs, double x, Py_ssize_t q):
    cdef Py_ssize_t lo = 0, hi = xs.shape[0] - q, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if x - xs[mid] > xs[mid + q] - x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def loess(const double[::1] xs, const double[::1] ys, const double[::1] x_eval,
          Py_ssize_t span, int degree, const double[::1] rw):
    cdef Py_ssize_t n = xs.shape[0], ne = x_eval.shape[0]
    cdef Py_ssize_t q = span if span < n else n
    cdef Py_ssize_t k, i, l, npos
    cdef double x, h, d, r, w, u, wu, s0, s1, s2, s3, s4, t0, t1, t2, det
    cdef double a00, a01, a02, a11, a12, a22, c0, c1, c2
    out_arr = np.full(ne, np.nan, dtype=np.float64)
    ok_arr = np.zeros(ne, dtype=np.uint8)
    cdef double[::1] out = out_arr
    cdef unsigned char[::1] ok = ok_arr
    for k in range(ne):
        x = x_eval[k]
        l = _window_start(xs, x, q)
        h = x - xs[l]
        if xs[l + q - 1] - x > h:
            h = xs[l + q - 1] - x
        if span > n:
            h += (span - n) / 2.0
        s0 = s1 = s2 = s3 = s4 = t0 = t1 = t2 = 0.0
        npos = 0
        if h <= 0.0:
            continue
        for i in range(l, l + q):
            d = fabs(xs[i] - x)
            r = d / h
            if r >= 1.0:
                continue
            r = 1.0 - r * r * r
            w = r * r * r * rw[i]
            if w <= 0.0:
                continue
            npos += 1
            u = (xs[i] - x) / h
            wu = w * u
            s0 += w
            s1 += wu
            s2 += wu * u
            t0 += w * ys[i]
            t1 += wu * ys[i]
            if degree == 2:
                s3 += wu * u * u
                s4 += wu * u * u * u
                t2 += wu * u * ys[i]
        if npos < degree + 1:
            continue
        if degree == 1:
            det = s0 * s2 - s1 * s1
            if det <= 1e-12 * s0 * s0:
                continue
            out[k] = (s2 * t0 - s1 * t1) / det
        else:
            # Cramer's rule on the symmetric 3x3 normal equations.
            a00 = s0; a01 = s1; a02 = s2; a11 = s2; a12 = s3; a22 = s4
            c0 = a11 * a22 - a12 * a12
            c1 = a01 * a22 - a12 * a02
            c2 = a01 * a12 - a11 * a02
            det = a00 * c0 - a01 * c1 + a02 * c2
            if det <= 1e-12 * s0 * s0 * s0:
                continue
            out[k] = (t0 * c0 - t1 * c1 + t2 * c2) / det
        ok[k] = 1
    return out_arr, ok_arr.view(np.bool_)


def linear_recursion(double a, double c0, const double[::1] b):
    """y[k] = a * y[k-1] + b[k] with y[-1] = c0."""
    cdef Py_ssize_t n = b.shape[0], k
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double y = c0
    for k in range(n):
        y = a * y + b[k]
        out[k] = y
    return out_arr


def svr_epoch(const double[:, ::1] X, const double[::1] y, double[::1] w, double b,
              const long[::1] order, double eta, double eps, double c, double reg,
              double[::1] wsum):
    cdef Py_ssize_t n = order.shape[0], d = X.shape[1], t, j, idx
    cdef double pred, resid, g
    for t in range(n):
        idx = order[t]
        pred = b
        for j in range(d):
            pred = pred + w[j] * X[idx, j]
        resid = y[idx] - pred
        if resid > eps:
            g = -1.0
        elif resid < -eps:
            g = 1.0
        else:
            g = 0.0
        for j in range(d):
            w[j] = w[j] - eta * (reg * w[j] + c * g * X[idx, j])
        b = b - eta * c * g
        for j in range(d):
            wsum[j] += w[j]
        wsum[d] += b
    return b
