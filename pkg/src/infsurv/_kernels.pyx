# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_fallback.py`` (same semantics)."""

import numpy as np
from libc.math cimport sqrt, fabs, INFINITY, isfinite

OPTIMAL, UNBOUNDED, ITERATION_LIMIT, NUMERICAL = 0, 1, 2, 3


def logrank_scan(time_rank, event, Py_ssize_t n_times, cuts):
    cdef const long long[::1] tr = np.ascontiguousarray(time_rank, dtype=np.int64)
    cdef const long long[::1] ev = np.ascontiguousarray(event, dtype=np.int64)
    cdef const long long[::1] cu = np.ascontiguousarray(cuts, dtype=np.int64)
    cdef Py_ssize_t n = tr.shape[0], n_cuts = cu.shape[0]
    cdef double[::1] deaths = np.zeros(n_times)
    cdef double[::1] at_risk = np.zeros(n_times)
    cdef double[::1] lcount = np.zeros(n_times)
    cdef double[::1] ldeaths = np.zeros(n_times)
    cdef double[::1] yl = np.zeros(n_times)
    out_arr = np.zeros(n_cuts)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, k, pos = 0
    cdef double acc, num, var, frac, Y, D
    for i in range(n):
        at_risk[tr[i]] += 1.0
        deaths[tr[i]] += ev[i]
    acc = 0.0
    for j in range(n_times - 1, -1, -1):
        acc += at_risk[j]
        at_risk[j] = acc
    for k in range(n_cuts):
        while pos < cu[k]:
            lcount[tr[pos]] += 1.0
            ldeaths[tr[pos]] += ev[pos]
            pos += 1
        acc = 0.0
        for j in range(n_times - 1, -1, -1):
            acc += lcount[j]
            yl[j] = acc
        num = 0.0
        var = 0.0
        for j in range(n_times):
            D = deaths[j]
            if D > 0:
                Y = at_risk[j]
                num += ldeaths[j] - yl[j] * D / Y
                if Y > 1:
                    frac = yl[j] / Y
                    var += frac * (1.0 - frac) * (Y - D) / (Y - 1.0) * D
        out[k] = fabs(num) / sqrt(var) if var > 0 else 0.0
    return out_arr


def route_tree(feature, threshold, left, right, X):
    cdef const long long[::1] f = np.ascontiguousarray(feature, dtype=np.int64)
    cdef const double[::1] thr = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef const long long[::1] lt = np.ascontiguousarray(left, dtype=np.int64)
    cdef const long long[::1] rt = np.ascontiguousarray(right, dtype=np.int64)
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    out_arr = np.zeros(x.shape[0], dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t i
    cdef long long node
    for i in range(x.shape[0]):
        node = 0
        while f[node] >= 0:
            if x[i, f[node]] <= thr[node]:
                node = lt[node]
            else:
                node = rt[node]
        out[i] = node
    return out_arr


def simplex_core(double[:, ::1] T, double[::1] rhs, double[::1] cost,
                 long long[::1] basis, double[::1] upper, signed char[::1] at_upper,
                 signed char[::1] blocked, double opt_tol, double pivot_tol,
                 long long max_iter):
    cdef Py_ssize_t m = T.shape[0], n = T.shape[1]
    cdef Py_ssize_t i, j, k, q, leave, p, nnz
    cdef long long it = 0
    cdef double s, r, theta, best, piv, f, entering_value, cq
    cdef bint to_upper, hits_upper
    is_basic_arr = np.zeros(n, dtype=np.int8)
    cdef signed char[::1] is_basic = is_basic_arr
    rate_arr = np.zeros(m)
    cdef double[::1] rate = rate_arr
    nz_arr = np.zeros(n, dtype=np.intp)
    cdef Py_ssize_t[::1] nz = nz_arr
    for i in range(m):
        is_basic[basis[i]] = 1
    while True:
        q = -1
        for j in range(n):
            if is_basic[j] or blocked[j]:
                continue
            if (at_upper[j] == 0 and cost[j] < -opt_tol) or (at_upper[j] != 0 and cost[j] > opt_tol):
                q = j
                break
        if q < 0:
            return OPTIMAL, it
        if it >= max_iter:
            return ITERATION_LIMIT, it
        it += 1
        s = 1.0 if at_upper[q] == 0 else -1.0
        for i in range(m):
            rate[i] = -s * T[i, q]
        best = upper[q]
        leave = -1
        to_upper = False
        for i in range(m):
            r = rate[i]
            if r < -pivot_tol:
                theta = (rhs[i] if rhs[i] > 0.0 else 0.0) / -r
                hits_upper = False
            elif r > pivot_tol and isfinite(upper[basis[i]]):
                theta = upper[basis[i]] - rhs[i]
                theta = (theta if theta > 0.0 else 0.0) / r
                hits_upper = True
            else:
                continue
            if leave < 0:
                if theta < best:
                    best = theta
                    leave = i
                    to_upper = hits_upper
            elif theta < best or (theta == best and basis[i] < basis[leave]):
                best = theta
                leave = i
                to_upper = hits_upper
        if leave < 0 and not isfinite(best):
            return UNBOUNDED, it
        for i in range(m):
            rhs[i] += best * rate[i]
        if leave < 0:
            at_upper[q] = 0 if at_upper[q] else 1
            continue
        piv = T[leave, q]
        if fabs(piv) <= pivot_tol:
            return NUMERICAL, it
        p = basis[leave]
        entering_value = best if s > 0 else upper[q] - best
        nnz = 0
        for j in range(n):
            T[leave, j] /= piv
            if T[leave, j] != 0.0:
                nz[nnz] = j
                nnz += 1
        for i in range(m):
            if i == leave:
                continue
            f = T[i, q]
            if f != 0.0:
                for k in range(nnz):
                    j = nz[k]
                    T[i, j] -= f * T[leave, j]
        cq = cost[q]
        if cq != 0.0:
            for k in range(nnz):
                j = nz[k]
                cost[j] -= cq * T[leave, j]
        rhs[leave] = entering_value
        basis[leave] = q
        at_upper[q] = 0
        at_upper[p] = 1 if to_upper else 0
        is_basic[q] = 1
        is_basic[p] = 0
