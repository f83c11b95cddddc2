# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled sequential kernels (see _kernels_py for the reference versions)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, atan2, sin, cos, fabs, INFINITY, M_PI

cnp.import_array()


def regulator_values(x, double initial=0.0):
    cdef const double[:] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[:] ov = out
    cdef double m = initial
    for i in range(n):
        if xv[i] < m:
            m = xv[i]
        ov[i] = -m if m < 0.0 else 0.0
    return out


def abs_walk(steps, cnp.int64_t start=0):
    cdef const cnp.int64_t[:] sv = np.ascontiguousarray(steps, dtype=np.int64)
    cdef Py_ssize_t n = sv.shape[0], i
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[:] ov = out
    cdef cnp.int64_t q = start
    for i in range(n):
        q = q + sv[i]
        if q < 0:
            q = -q
        ov[i] = q
    return out


def lindley_departures(arrivals, services):
    cdef const double[:] a = np.ascontiguousarray(arrivals, dtype=np.float64)
    cdef const double[:] s = np.ascontiguousarray(services, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[:] ov = out
    cdef double cs = 0.0, prev = 0.0, run = 0.0, v
    for i in range(n):
        cs = cs + s[i]
        v = a[i] - prev
        if i == 0 or v > run:
            run = v
        ov[i] = cs + run
        prev = cs
    return out


def spectral_sum(x, double w0, double h, Py_ssize_t nw,
                 double alpha, double beta, double gamma):
    cdef const double[:] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i, j
    cdef double c = alpha * gamma - beta + 1.0
    cdef double theta0 = -M_PI * (alpha * gamma - beta)
    cdef double ca = cos(M_PI * alpha), sa = sin(M_PI * alpha)
    base_arr = np.empty(nw)
    ew_arr = np.empty(nw)
    cdef double[:] base = base_arr, ew = ew_arr
    cdef double w
    # |mag| <= exp(base[j] + gamma * lift); trailing terms with that bound below exp's
    # underflow point are exactly zero and are skipped
    cdef double lift = -log(fabs(sa)) if fabs(sa) > 1e-300 else INFINITY
    cdef Py_ssize_t jmax = nw
    if lift < 0.0:
        lift = 0.0
    for j in range(nw):
        w = w0 + h * j
        base[j] = -exp(w) + c * w
        ew[j] = exp(alpha * w)
    for j in range(nw - 1, -1, -1):
        if not (base[j] + gamma * lift < -800.0):
            break
        jmax = j
    S_arr = np.empty(n)
    A_arr = np.empty(n)
    cdef double[:] S = S_arr, A = A_arr
    cdef double rho, re, im, mag, acc, acc_abs, inv
    for i in range(n):
        acc = 0.0
        acc_abs = 0.0
        inv = 1.0 / xv[i]
        for j in range(jmax):
            rho = ew[j] * inv
            re = 0.5 * log1p(2.0 * rho * ca + rho * rho)
            im = atan2(-rho * sa, 1.0 + rho * ca)
            mag = exp(base[j] - gamma * re)
            acc = acc + mag * sin(theta0 - gamma * im)
            acc_abs = acc_abs + mag
        S[i] = h * acc
        A[i] = h * acc_abs
    return S_arr, A_arr
