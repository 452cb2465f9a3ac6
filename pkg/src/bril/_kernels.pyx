# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: DBSCAN labelling and cyclic Jacobi eigendecomposition.

Semantics are identical to :mod:`bril._kernels_py`; see that module for the
documented conventions.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def dbscan_labels(double[:, ::1] pts, double eps, Py_ssize_t min_pts):
    cdef Py_ssize_t n = pts.shape[0], dim = pts.shape[1]
    cdef Py_ssize_t i, j, k, p, head, tail, cid = 0
    cdef double eps2 = eps * eps, d, acc
    labels_arr = np.full(n, -1, dtype=np.int64)
    core_arr = np.zeros(n, dtype=np.uint8)
    queue_arr = np.empty(max(n, 1), dtype=np.intp)
    cdef cnp.int64_t[::1] labels = labels_arr
    cdef cnp.uint8_t[::1] core = core_arr
    cdef Py_ssize_t[::1] queue = queue_arr
    cdef Py_ssize_t count

    for i in range(n):
        count = 0
        for j in range(n):
            acc = 0.0
            for k in range(dim):
                d = pts[i, k] - pts[j, k]
                acc += d * d
            if acc <= eps2:
                count += 1
        if count >= min_pts:
            core[i] = 1

    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cid
        head = 0
        tail = 0
        queue[tail] = i
        tail += 1
        while head < tail:
            p = queue[head]
            head += 1
            for j in range(n):
                if labels[j] != -1:
                    continue
                acc = 0.0
                for k in range(dim):
                    d = pts[p, k] - pts[j, k]
                    acc += d * d
                if acc <= eps2:
                    labels[j] = cid
                    if core[j]:
                        queue[tail] = j
                        tail += 1
        cid += 1
    return labels_arr, core_arr.astype(bool)


cdef double _offdiag_norm(double[:, ::1] a, Py_ssize_t n):
    cdef double s = 0.0
    cdef Py_ssize_t p, q
    for p in range(n):
        for q in range(n):
            if p != q:
                s += a[p, q] * a[p, q]
    return sqrt(s)


def jacobi_eigh(a_in, double tol=1e-12, int max_sweeps=100):
    a_np = np.array(a_in, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = a_np.shape[0]
    v_np = np.eye(n)
    cdef double[:, ::1] a = a_np
    cdef double[:, ::1] v = v_np
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double apq, theta, t, c, s, akp, akq, app, aqq
    for sweep in range(max_sweeps):
        if _offdiag_norm(a, n) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                if fabs(apq) < fabs(aqq - app) * 1e-150:
                    t = apq / (aqq - app)  # 1 / (2 theta) without overflowing theta
                else:
                    theta = (aqq - app) / (2.0 * apq)
                    if theta >= 0:
                        t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                    else:
                        t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    akp = a[p, k]
                    akq = a[q, k]
                    a[p, k] = c * akp - s * akq
                    a[q, k] = s * akp + c * akq
                for k in range(n):
                    akp = v[k, p]
                    akq = v[k, q]
                    v[k, p] = c * akp - s * akq
                    v[k, q] = s * akp + c * akq
    else:
        if _offdiag_norm(a, n) >= tol:
            raise ArithmeticError(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.diag(a_np).copy(), v_np
