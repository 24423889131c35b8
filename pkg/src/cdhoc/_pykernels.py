"""Pure-Python/numpy versions of the hot loops.

Each function has the same signature and return convention as its
counterpart in ``_ckernels.pyx``; ``cdhoc.kernels`` picks one at import.
"""

import numpy as np
from scipy.signal import lfilter


def dtw(a, b):
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    m = len(b)
    prev = [0.0] * m
    lprev = [0] * m
    for i, ai in enumerate(a):
        cur = [0.0] * m
        lcur = [0] * m
        for j, bj in enumerate(b):
            cost = abs(ai - bj)
            if i == 0 and j == 0:
                cur[j], lcur[j] = cost, 1
            elif i == 0:
                cur[j], lcur[j] = cost + cur[j - 1], lcur[j - 1] + 1
            elif j == 0:
                cur[j], lcur[j] = cost + prev[j], lprev[j] + 1
            else:
                best, bl = prev[j - 1], lprev[j - 1]
                if prev[j] < best:
                    best, bl = prev[j], lprev[j]
                if cur[j - 1] < best:
                    best, bl = cur[j - 1], lcur[j - 1]
                cur[j], lcur[j] = cost + best, bl + 1
        prev, lprev = cur, lcur
    return prev[m - 1], lprev[m - 1]


def _window_starts(xs, x_eval, q):
    lo = np.zeros(len(x_eval), dtype=np.int64)
    hi = np.full(len(x_eval), len(xs) - q, dtype=np.int64)
    while np.any(lo < hi):
        active = lo < hi
        mid = (lo + hi) // 2
        go_right = (x_eval - xs[mid]) > (xs[np.minimum(mid + q, len(xs) - 1)] - x_eval)
        lo = np.where(active & go_right, mid + 1, lo)
        hi = np.where(active & ~go_right, mid, hi)
    return lo


def loess(xs, ys, x_eval, span, degree, rw, chunk=2048):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    rw = np.asarray(rw, dtype=np.float64)
    x_eval = np.asarray(x_eval, dtype=np.float64)
    n = len(xs)
    q = min(span, n)
    out = np.full(len(x_eval), np.nan)
    good = np.zeros(len(x_eval), dtype=bool)
    offsets = np.arange(q)
    for start in range(0, len(x_eval), chunk):
        xe = x_eval[start:start + chunk]
        left = _window_starts(xs, xe, q)
        idx = left[:, None] + offsets
        xw = xs[idx]
        h = np.maximum(xe - xs[left], xs[left + q - 1] - xe)
        if span > n:
            h = h + (span - n) / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.abs(xw - xe[:, None]) / h[:, None]
            w = np.where(r < 1.0, (1.0 - r**3) ** 3, 0.0) * rw[idx]
            u = (xw - xe[:, None]) / h[:, None]
        npos = np.count_nonzero(w > 0.0, axis=1)
        yw = ys[idx]
        s0 = w.sum(axis=1)
        s1 = (w * u).sum(axis=1)
        s2 = (w * u * u).sum(axis=1)
        t0 = (w * yw).sum(axis=1)
        t1 = (w * u * yw).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            if degree == 1:
                det = s0 * s2 - s1 * s1
                ok = (h > 0.0) & (npos >= 2) & (det > 1e-12 * s0 * s0)
                fit = (s2 * t0 - s1 * t1) / det
            else:
                s3 = (w * u**3).sum(axis=1)
                s4 = (w * u**4).sum(axis=1)
                t2 = (w * u * u * yw).sum(axis=1)
                c0 = s2 * s4 - s3 * s3
                c1 = s1 * s4 - s3 * s2
                c2 = s1 * s3 - s2 * s2
                det = s0 * c0 - s1 * c1 + s2 * c2
                ok = (h > 0.0) & (npos >= 3) & (det > 1e-12 * s0**3)
                fit = (t0 * c0 - t1 * c1 + t2 * c2) / det
        out[start:start + len(xe)] = np.where(ok, fit, np.nan)
        good[start:start + len(xe)] = ok
    return out, good


def linear_recursion(a, c0, b):
    b = np.asarray(b, dtype=np.float64)
    if b.size == 0:
        return b.copy()
    out, _ = lfilter([1.0], [1.0, -a], b, zi=[a * c0])
    return out


def svr_epoch(X, y, w, b, order, eta, eps, c, reg, wsum):
    rows = X.tolist()
    ys = y.tolist()
    wl = w.tolist()
    d = len(wl)
    acc = [0.0] * (d + 1)
    for idx in order.tolist():
        x = rows[idx]
        pred = b
        for j in range(d):
            pred = pred + wl[j] * x[j]
        resid = ys[idx] - pred
        g = -1.0 if resid > eps else (1.0 if resid < -eps else 0.0)
        for j in range(d):
            wl[j] = wl[j] - eta * (reg * wl[j] + c * g * x[j])
        b = b - eta * c * g
        for j in range(d):
            acc[j] += wl[j]
        acc[d] += b
    w[:] = wl
    wsum += acc
    return b
