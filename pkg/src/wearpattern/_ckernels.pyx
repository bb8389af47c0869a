# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; same signatures and semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, INFINITY, isfinite, NAN

cnp.import_array()


def sbd_matrix(A, B):
    cdef double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(B, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], L = a.shape[1]
    dist_arr = np.empty((n, m), dtype=np.float64)
    shift_arr = np.zeros((n, m), dtype=np.intp)
    cdef double[:, ::1] dist = dist_arr
    cdef Py_ssize_t[:, ::1] shift = shift_arr
    cdef double[::1] na = np.empty(n), nb = np.empty(m)
    # each row of B written twice so a circular shift becomes a plain offset
    cdef double[:, ::1] bb = np.concatenate([b, b], axis=1)
    cdef double[::1] cc = np.empty(L)
    cdef Py_ssize_t i, j, s, t, best_s
    cdef double acc, best, denom, at
    with nogil:
        for i in range(n):
            acc = 0.0
            for t in range(L):
                acc = acc + a[i, t] * a[i, t]
            na[i] = sqrt(acc)
        for j in range(m):
            acc = 0.0
            for t in range(L):
                acc = acc + b[j, t] * b[j, t]
            nb[j] = sqrt(acc)
        for i in range(n):
            for j in range(m):
                denom = na[i] * nb[j]
                if denom == 0.0:
                    shift[i, j] = 0
                    if na[i] == 0.0 and nb[j] == 0.0:
                        dist[i, j] = NAN
                    else:
                        dist[i, j] = 1.0
                    continue
                for s in range(L):
                    cc[s] = 0.0
                # cc[s] = sum_t a[i, t] * b[j, (t + s) % L], accumulated one t at a time
                for t in range(L):
                    at = a[i, t]
                    for s in range(L):
                        cc[s] = cc[s] + at * bb[j, t + s]
                best = -INFINITY
                best_s = 0
                for s in range(L):
                    if cc[s] > best:
                        best = cc[s]
                        best_s = s
                dist[i, j] = 1.0 - best / denom
                shift[i, j] = best_s
    return dist_arr, shift_arr


def som_train(codebook, data, order, grid_sq, double lr0, double sigma0, double tau):
    cdef double[:, ::1] w = codebook
    cdef double[:, ::1] x = np.ascontiguousarray(data, dtype=np.float64)
    cdef Py_ssize_t[::1] idx = np.ascontiguousarray(order, dtype=np.intp)
    cdef double[:, ::1] g = np.ascontiguousarray(grid_sq, dtype=np.float64)
    cdef Py_ssize_t T = idx.shape[0], U = w.shape[0], L = w.shape[1]
    cdef Py_ssize_t t, u, d, bmu, row
    cdef double best, acc, diff, decay, lr, sigma, h
    with nogil:
        for t in range(T):
            row = idx[t]
            best = INFINITY
            bmu = 0
            for u in range(U):
                acc = 0.0
                for d in range(L):
                    diff = x[row, d] - w[u, d]
                    acc = acc + diff * diff
                if acc < best:
                    best = acc
                    bmu = u
            decay = exp(-t / tau)
            lr = lr0 * decay
            sigma = sigma0 * decay
            for u in range(U):
                h = lr * exp(-g[bmu, u] / (2.0 * sigma * sigma))
                for d in range(L):
                    w[u, d] = w[u, d] + h * (x[row, d] - w[u, d])
    return codebook


def optics_order(D, core, double max_eps):
    cdef double[:, ::1] dm = np.ascontiguousarray(D, dtype=np.float64)
    cdef double[::1] cd = np.ascontiguousarray(core, dtype=np.float64)
    cdef Py_ssize_t n = dm.shape[0]
    reach_arr = np.full(n, np.inf)
    pred_arr = np.full(n, -1, dtype=np.intp)
    ordering_arr = np.empty(n, dtype=np.intp)
    cdef double[::1] reach = reach_arr
    cdef Py_ssize_t[::1] pred = pred_arr
    cdef Py_ssize_t[::1] ordering = ordering_arr
    cdef unsigned char[::1] done = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t step, p, q
    cdef double best, new
    with nogil:
        for step in range(n):
            best = INFINITY
            p = -1
            for q in range(n):
                if not done[q] and reach[q] < best:
                    best = reach[q]
                    p = q
            if p < 0:
                for q in range(n):
                    if not done[q]:
                        p = q
                        break
            done[p] = 1
            ordering[step] = p
            if cd[p] <= max_eps:
                for q in range(n):
                    if done[q] or dm[p, q] > max_eps:
                        continue
                    new = cd[p] if cd[p] > dm[p, q] else dm[p, q]
                    if new < reach[q]:
                        reach[q] = new
                        pred[q] = p
    return ordering_arr, reach_arr, pred_arr
