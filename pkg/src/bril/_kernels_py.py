"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

DBSCAN conventions (shared with the compiled kernel):

* neighbourhoods use squared Euclidean distance ``<= eps**2`` and include the point itself;
* a point is core when its neighbourhood holds at least ``min_pts`` points;
* points are scanned in index order; each unlabelled core point opens the next
  cluster id and the cluster is grown breadth-first;
* a border point keeps the first cluster that reaches it.
"""
import numpy as np

_CHUNK = 2048


def _neighbours(pts, eps2):
    n = len(pts)
    out = []
    for start in range(0, n, _CHUNK):
        block = pts[start:start + _CHUNK]
        d2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        out.extend(np.flatnonzero(row <= eps2) for row in d2)
    return out


def dbscan_labels(pts, eps, min_pts):
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    n = len(pts)
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels, np.zeros(0, dtype=bool)
    nbrs = _neighbours(pts, eps * eps)
    core = np.array([len(nb) >= min_pts for nb in nbrs], dtype=bool)
    cid = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cid
        queue = [i]
        head = 0
        while head < len(queue):
            p = queue[head]
            head += 1
            for j in nbrs[p]:
                if labels[j] == -1:
                    labels[j] = cid
                    if core[j]:
                        queue.append(j)
        cid += 1
    return labels, core


def _offdiag_norm(a):
    off = a - np.diag(np.diag(a))
    return np.sqrt(np.sum(off * off))


def jacobi_eigh(a_in, tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi for a symmetric matrix.  Returns unsorted ``(eigenvalues, V)``
    with eigenvectors in the columns of ``V``."""
    a = np.array(a_in, dtype=np.float64, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        if _offdiag_norm(a) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < abs(diff) * 1e-150:
                    t = apq / diff  # 1 / (2 theta) without overflowing theta
                else:
                    theta = diff / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                col_p, col_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * col_p - s * col_q
                v[:, q] = s * col_p + c * col_q
    else:
        if _offdiag_norm(a) >= tol:
            raise ArithmeticError(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.diag(a).copy(), v
