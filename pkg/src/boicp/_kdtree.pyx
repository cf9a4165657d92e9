# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled nearest-neighbour kernels over the implicit kd-tree built in cloud.py.

Tree layout: points permuted so that for every internal range [lo, hi) the
median slot ``mid = (lo + hi) // 2`` splits on ``split_dim[mid]``; ranges of
at most ``leaf_size`` points are scanned linearly.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef struct Best:
    double d2
    long long id


cdef inline void _visit(const double[:, ::1] pts, const long long[::1] ids,
                        Py_ssize_t k, double q0, double q1, double q2,
                        Best* best) noexcept nogil:
    cdef double dx = q0 - pts[k, 0]
    cdef double dy = q1 - pts[k, 1]
    cdef double dz = q2 - pts[k, 2]
    cdef double d2 = dx * dx + dy * dy + dz * dz
    if d2 < best.d2 or (d2 == best.d2 and ids[k] < best.id):
        best.d2 = d2
        best.id = ids[k]


cdef void _search(const double[:, ::1] pts, const long long[::1] ids,
                  const signed char[::1] split_dim, Py_ssize_t leaf_size,
                  Py_ssize_t lo, Py_ssize_t hi, double q0, double q1, double q2,
                  Best* best) noexcept nogil:
    cdef Py_ssize_t k, mid
    cdef int dim
    cdef double diff
    while hi - lo > leaf_size:
        mid = (lo + hi) // 2
        dim = split_dim[mid]
        if dim == 0:
            diff = q0 - pts[mid, 0]
        elif dim == 1:
            diff = q1 - pts[mid, 1]
        else:
            diff = q2 - pts[mid, 2]
        _visit(pts, ids, mid, q0, q1, q2, best)
        if diff < 0:
            _search(pts, ids, split_dim, leaf_size, lo, mid, q0, q1, q2, best)
            if diff * diff <= best.d2:
                lo = mid + 1
            else:
                return
        else:
            _search(pts, ids, split_dim, leaf_size, mid + 1, hi, q0, q1, q2, best)
            if diff * diff <= best.d2:
                hi = mid
            else:
                return
    for k in range(lo, hi):
        _visit(pts, ids, k, q0, q1, q2, best)


cdef inline void _query_one(const double[:, ::1] pts, const long long[::1] ids,
                            const signed char[::1] split_dim, Py_ssize_t leaf_size,
                            double q0, double q1, double q2,
                            long long* out_id, double* out_d2) noexcept nogil:
    cdef Best best
    best.d2 = 1.0 / 0.0
    best.id = -1
    _search(pts, ids, split_dim, leaf_size, 0, pts.shape[0], q0, q1, q2, &best)
    out_id[0] = best.id
    out_d2[0] = best.d2


def query(index, queries):
    """Exact 1-NN for each row of ``queries``; returns ``(ids, squared_dists)``."""
    cdef const double[:, ::1] pts = index.tree_points
    cdef const long long[::1] ids = index.tree_ids
    cdef const signed char[::1] split_dim = index.split_dim
    cdef Py_ssize_t leaf_size = index.leaf_size
    cdef const double[:, ::1] q = np.ascontiguousarray(queries, dtype=np.float64)
    cdef Py_ssize_t m = q.shape[0], i
    out_ids = np.empty(m, dtype=np.int64)
    out_d2 = np.empty(m, dtype=np.float64)
    cdef long long[::1] oi = out_ids
    cdef double[::1] od = out_d2
    with nogil:
        for i in range(m):
            _query_one(pts, ids, split_dim, leaf_size, q[i, 0], q[i, 1], q[i, 2], &oi[i], &od[i])
    return out_ids, out_d2


def query_transformed(index, source, rotation, translation):
    """Like :func:`query` on ``rotation @ s + translation`` for each source row."""
    cdef const double[:, ::1] pts = index.tree_points
    cdef const long long[::1] ids = index.tree_ids
    cdef const signed char[::1] split_dim = index.split_dim
    cdef Py_ssize_t leaf_size = index.leaf_size
    cdef const double[:, ::1] s = np.ascontiguousarray(source, dtype=np.float64)
    cdef const double[:, ::1] R = np.ascontiguousarray(rotation, dtype=np.float64)
    cdef const double[::1] t = np.ascontiguousarray(translation, dtype=np.float64)
    cdef Py_ssize_t m = s.shape[0], i
    cdef double q0, q1, q2
    out_ids = np.empty(m, dtype=np.int64)
    out_d2 = np.empty(m, dtype=np.float64)
    cdef long long[::1] oi = out_ids
    cdef double[::1] od = out_d2
    with nogil:
        for i in range(m):
            q0 = R[0, 0] * s[i, 0] + R[0, 1] * s[i, 1] + R[0, 2] * s[i, 2] + t[0]
            q1 = R[1, 0] * s[i, 0] + R[1, 1] * s[i, 1] + R[1, 2] * s[i, 2] + t[1]
            q2 = R[2, 0] * s[i, 0] + R[2, 1] * s[i, 1] + R[2, 2] * s[i, 2] + t[2]
            _query_one(pts, ids, split_dim, leaf_size, q0, q1, q2, &oi[i], &od[i])
    return out_ids, out_d2
