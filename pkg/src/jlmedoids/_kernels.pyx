# cython: language_level=3
"""Compiled inner loops. Semantics mirror ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from libc.stdlib cimport malloc, free

cnp.import_array()


def _comb(Py_ssize_t s, Py_ssize_t k):
    from math import comb
    return comb(s, k)


def subset_costs(const double[:, ::1] MT, const double[::1] w, Py_ssize_t k):
    """Sum_p w[p] * min_{j in S} MT[j, p] for every k-subset S, lexicographic order.

    ``MT`` is the transposed ``(s, n)`` cost matrix (one contiguous row per
    candidate).
    """
    cdef Py_ssize_t s = MT.shape[0], n = MT.shape[1]
    if k < 1 or k > s:
        raise ValueError("need 1 <= k <= number of candidates")
    total = _comb(s, k)
    out_arr = np.empty(total, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t[::1] idx = np.arange(k, dtype=np.intp)
    prefix_arr = np.empty((max(k - 1, 1), n), dtype=np.float64)
    cdef double[:, ::1] prefix = prefix_arr
    cdef Py_ssize_t start = 0, j, jj, p, cnt = 0, col
    cdef double acc, v, m
    while True:
        for j in range(start, k - 1):
            col = idx[j]
            if j == 0:
                for p in range(n):
                    prefix[0, p] = MT[col, p]
            else:
                for p in range(n):
                    v = MT[col, p]
                    m = prefix[j - 1, p]
                    prefix[j, p] = v if v < m else m
        col = idx[k - 1]
        acc = 0.0
        if k == 1:
            for p in range(n):
                acc += w[p] * MT[col, p]
        else:
            for p in range(n):
                v = MT[col, p]
                m = prefix[k - 2, p]
                acc += w[p] * (v if v < m else m)
        out[cnt] = acc
        cnt += 1
        j = k - 1
        while j >= 0 and idx[j] == s - k + j:
            j -= 1
        if j < 0:
            break
        idx[j] += 1
        for jj in range(j + 1, k):
            idx[jj] = idx[jj - 1] + 1
        start = j
    return out_arr


cdef inline double _dist(const double[:, ::1] X, Py_ssize_t a, Py_ssize_t b, Py_ssize_t d) nogil:
    cdef double acc = 0.0, t
    cdef Py_ssize_t i
    for i in range(d):
        t = X[a, i] - X[b, i]
        acc += t * t
    return sqrt(acc)


def greedy_net(const double[:, ::1] X, double rho):
    """Ascending-order greedy: admit row i iff it is farther than rho from all admitted rows."""
    cdef Py_ssize_t m = X.shape[0], d = X.shape[1], i, j, size = 0
    members_arr = np.empty(m, dtype=np.intp)
    cdef Py_ssize_t[::1] members = members_arr
    cdef bint ok
    for i in range(m):
        ok = True
        for j in range(size):
            if _dist(X, i, members[j], d) <= rho:
                ok = False
                break
        if ok:
            members[size] = i
            size += 1
    return members_arr[:size].copy()


def cover_sizes(const double[:, ::1] D, const Py_ssize_t[::1] centers, const double[::1] radii):
    """Greedy set-cover size of B(p, r) by radius-r/2 balls centred at any row.

    One query per ``(centers[q], radii[q])``; ties go to the lowest index.
    """
    cdef Py_ssize_t n = D.shape[0], nq = centers.shape[0]
    out_arr = np.zeros(nq, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t *members = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t *cands = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef long *counts = <long *> malloc(n * sizeof(long))
    cdef char *covered = <char *> malloc(n * sizeof(char))
    cdef Py_ssize_t qi, p, q, c, a, b, m, nc, best, u, uncovered, size
    cdef double r, h, reach
    cdef long cnt, best_cnt
    try:
        for qi in range(nq):
            p = centers[qi]
            r = radii[qi]
            h = 0.5 * r
            reach = (r + h) * (1.0 + 1e-12)
            m = 0
            for q in range(n):
                if D[p, q] <= r:
                    members[m] = q
                    covered[q] = 0
                    m += 1
            nc = 0
            for c in range(n):
                if D[p, c] <= reach:
                    cnt = 0
                    for a in range(m):
                        if D[c, members[a]] <= h:
                            cnt += 1
                    if cnt > 0:
                        cands[nc] = c
                        counts[nc] = cnt
                        nc += 1
            uncovered = m
            size = 0
            while uncovered > 0:
                best = 0
                best_cnt = counts[0]
                for b in range(1, nc):
                    if counts[b] > best_cnt:
                        best_cnt = counts[b]
                        best = b
                size += 1
                c = cands[best]
                for a in range(m):
                    u = members[a]
                    if not covered[u] and D[c, u] <= h:
                        covered[u] = 1
                        uncovered -= 1
                        for b in range(nc):
                            if D[cands[b], u] <= h:
                                counts[b] -= 1
            out[qi] = size
    finally:
        free(members)
        free(cands)
        free(counts)
        free(covered)
    return out_arr
