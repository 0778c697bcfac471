# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled query kernels over the flat kd-tree built in :mod:`degenfuse.spatial`.

Node arrays: ``lo``/``hi`` index ranges into the permuted point array,
``left``/``right`` child node ids (-1 for leaves), ``bmin``/``bmax`` bounding boxes.
"""
import numpy as np
from libc.math cimport sqrt, INFINITY
from libcpp.vector cimport vector

cdef enum:
    STACK_SIZE = 512


cdef inline double _box_dist2(const double[:, ::1] bmin, const double[:, ::1] bmax,
                              Py_ssize_t node, const double[:, ::1] q,
                              Py_ssize_t qi, Py_ssize_t dim) nogil:
    cdef double acc = 0.0, d, v
    cdef Py_ssize_t k
    for k in range(dim):
        v = q[qi, k]
        if v < bmin[node, k]:
            d = bmin[node, k] - v
            acc += d * d
        elif v > bmax[node, k]:
            d = v - bmax[node, k]
            acc += d * d
    return acc


cdef inline double _point_dist2(const double[:, ::1] pts, Py_ssize_t i,
                                const double[:, ::1] q, Py_ssize_t qi,
                                Py_ssize_t dim) nogil:
    cdef double acc = 0.0, d
    cdef Py_ssize_t k
    for k in range(dim):
        d = q[qi, k] - pts[i, k]
        acc += d * d
    return acc


def nearest_batch(const double[:, ::1] pts, const long long[::1] ids,
                  const long long[::1] lo, const long long[::1] hi,
                  const long long[::1] left, const long long[::1] right,
                  const double[:, ::1] bmin, const double[:, ::1] bmax,
                  const double[:, ::1] queries):
    """Nearest point id and distance per query; ties resolve to the smallest id."""
    cdef Py_ssize_t m = queries.shape[0]
    cdef Py_ssize_t dim = queries.shape[1]
    out_ids_arr = np.full(m, -1, dtype=np.int64)
    out_d_arr = np.full(m, np.inf, dtype=np.float64)
    cdef long long[::1] out_ids = out_ids_arr
    cdef double[::1] out_d = out_d_arr
    cdef Py_ssize_t stack[STACK_SIZE]
    cdef Py_ssize_t top, node, i, qi, a, b
    cdef double best, d2, da, db
    cdef long long best_id, pid
    if pts.shape[0] == 0:
        return out_ids_arr, out_d_arr
    with nogil:
        for qi in range(m):
            best = INFINITY
            best_id = -1
            top = 0
            stack[top] = 0
            top += 1
            while top > 0:
                top -= 1
                node = stack[top]
                # strict: boxes at exactly the best distance may still hold a smaller id
                if _box_dist2(bmin, bmax, node, queries, qi, dim) > best:
                    continue
                if left[node] < 0:
                    for i in range(lo[node], hi[node]):
                        d2 = _point_dist2(pts, i, queries, qi, dim)
                        pid = ids[i]
                        if d2 < best or (d2 == best and pid < best_id):
                            best = d2
                            best_id = pid
                else:
                    a = left[node]
                    b = right[node]
                    da = _box_dist2(bmin, bmax, a, queries, qi, dim)
                    db = _box_dist2(bmin, bmax, b, queries, qi, dim)
                    # push the farther child first so the nearer one is popped next
                    if da <= db:
                        stack[top] = b
                        stack[top + 1] = a
                    else:
                        stack[top] = a
                        stack[top + 1] = b
                    top += 2
            out_ids[qi] = best_id
            out_d[qi] = sqrt(best)
    return out_ids_arr, out_d_arr


def radius_batch(const double[:, ::1] pts, const long long[::1] ids,
                 const long long[::1] lo, const long long[::1] hi,
                 const long long[::1] left, const long long[::1] right,
                 const double[:, ::1] bmin, const double[:, ::1] bmax,
                 const double[:, ::1] queries, double radius):
    """All (query, id, distance) triples with distance strictly below ``radius``.

    Output is unsorted; the caller orders it.
    """
    cdef Py_ssize_t m = queries.shape[0]
    cdef Py_ssize_t dim = queries.shape[1]
    cdef vector[long long] qv
    cdef vector[long long] iv
    cdef vector[double] dv
    cdef Py_ssize_t stack[STACK_SIZE]
    cdef Py_ssize_t top, node, i, qi
    # slack keeps pruning safe against rounding in radius * radius
    cdef double r2 = radius * radius * (1.0 + 1e-12)
    cdef double d2, d
    if pts.shape[0] > 0:
        with nogil:
            for qi in range(m):
                top = 0
                stack[top] = 0
                top += 1
                while top > 0:
                    top -= 1
                    node = stack[top]
                    # box distance never exceeds any contained point distance, so
                    # pruning on box > r2 cannot drop a point with sqrt(d2) < r
                    if _box_dist2(bmin, bmax, node, queries, qi, dim) > r2:
                        continue
                    if left[node] < 0:
                        for i in range(lo[node], hi[node]):
                            d2 = _point_dist2(pts, i, queries, qi, dim)
                            d = sqrt(d2)
                            if d < radius:
                                qv.push_back(qi)
                                iv.push_back(ids[i])
                                dv.push_back(d)
                    else:
                        stack[top] = right[node]
                        stack[top + 1] = left[node]
                        top += 2
    cdef Py_ssize_t n = qv.size()
    q_arr = np.empty(n, dtype=np.int64)
    i_arr = np.empty(n, dtype=np.int64)
    d_arr = np.empty(n, dtype=np.float64)
    cdef long long[::1] q_view = q_arr
    cdef long long[::1] i_view = i_arr
    cdef double[::1] d_view = d_arr
    for i in range(n):
        q_view[i] = qv[i]
        i_view[i] = iv[i]
        d_view[i] = dv[i]
    return q_arr, i_arr, d_arr


cdef inline double _coord(const double[:, ::1] pts, long long[::1] perm,
                          Py_ssize_t i, Py_ssize_t axis) nogil:
    return pts[perm[i], axis]


cdef void _select(const double[:, ::1] pts, long long[::1] perm, Py_ssize_t lo,
                  Py_ssize_t hi, Py_ssize_t k, Py_ssize_t axis) noexcept nogil:
    """Reorder perm[lo:hi] so position k holds its order statistic along ``axis``.

    Three-way partitioning keeps runs of equal coordinates (flat ground) linear.
    """
    cdef Py_ssize_t lt, gt, i, mid
    cdef long long tmp
    cdef double pivot, a, b, c, v
    while hi - lo > 1:
        mid = lo + (hi - lo) // 2
        a = _coord(pts, perm, lo, axis)
        b = _coord(pts, perm, mid, axis)
        c = _coord(pts, perm, hi - 1, axis)
        if (a <= b <= c) or (c <= b <= a):
            pivot = b
        elif (b <= a <= c) or (c <= a <= b):
            pivot = a
        else:
            pivot = c
        lt = lo
        gt = hi
        i = lo
        while i < gt:
            v = _coord(pts, perm, i, axis)
            if v < pivot:
                tmp = perm[lt]; perm[lt] = perm[i]; perm[i] = tmp
                lt += 1
                i += 1
            elif v > pivot:
                gt -= 1
                tmp = perm[gt]; perm[gt] = perm[i]; perm[i] = tmp
            else:
                i += 1
        if k < lt:
            hi = lt
        elif k >= gt:
            lo = gt
        else:
            return


def build_tree(const double[:, ::1] points, Py_ssize_t leaf_size):
    """Median-split kd-tree over ``points``; returns the arrays the query kernels take."""
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t dim = points.shape[1]
    perm_arr = np.arange(n, dtype=np.int64)
    cdef long long[::1] perm = perm_arr
    cdef vector[long long] lo_v, hi_v, left_v, right_v
    cdef vector[double] bmin_v, bmax_v
    cdef vector[Py_ssize_t] todo
    cdef Py_ssize_t node, start, end, i, k, axis, mid
    cdef double v, ext, best_ext
    if leaf_size < 1:
        leaf_size = 1
    if n > 0:
        lo_v.push_back(0); hi_v.push_back(n); left_v.push_back(-1); right_v.push_back(-1)
        todo.push_back(0)
    with nogil:
        while todo.size() > 0:
            node = todo.back()
            todo.pop_back()
            start = lo_v[node]
            end = hi_v[node]
            # bounding box of this node, stored at offset node * dim
            while <Py_ssize_t>bmin_v.size() < (node + 1) * dim:
                bmin_v.push_back(0.0)
                bmax_v.push_back(0.0)
            for k in range(dim):
                bmin_v[node * dim + k] = points[perm[start], k]
                bmax_v[node * dim + k] = points[perm[start], k]
            for i in range(start + 1, end):
                for k in range(dim):
                    v = points[perm[i], k]
                    if v < bmin_v[node * dim + k]:
                        bmin_v[node * dim + k] = v
                    elif v > bmax_v[node * dim + k]:
                        bmax_v[node * dim + k] = v
            if end - start <= leaf_size:
                continue
            axis = 0
            best_ext = -1.0
            for k in range(dim):
                ext = bmax_v[node * dim + k] - bmin_v[node * dim + k]
                if ext > best_ext:
                    best_ext = ext
                    axis = k
            mid = start + (end - start) // 2
            _select(points, perm, start, end, mid, axis)
            left_v[node] = lo_v.size()
            lo_v.push_back(start); hi_v.push_back(mid); left_v.push_back(-1); right_v.push_back(-1)
            right_v[node] = lo_v.size()
            lo_v.push_back(mid); hi_v.push_back(end); left_v.push_back(-1); right_v.push_back(-1)
            todo.push_back(right_v[node])
            todo.push_back(left_v[node])
    cdef Py_ssize_t nn = lo_v.size()
    lo_a = np.empty(nn, dtype=np.int64)
    hi_a = np.empty(nn, dtype=np.int64)
    left_a = np.empty(nn, dtype=np.int64)
    right_a = np.empty(nn, dtype=np.int64)
    bmin_a = np.empty((nn, dim), dtype=np.float64)
    bmax_a = np.empty((nn, dim), dtype=np.float64)
    cdef long long[::1] lo_m = lo_a, hi_m = hi_a, left_m = left_a, right_m = right_a
    cdef double[:, ::1] bmin_m = bmin_a, bmax_m = bmax_a
    for i in range(nn):
        lo_m[i] = lo_v[i]
        hi_m[i] = hi_v[i]
        left_m[i] = left_v[i]
        right_m[i] = right_v[i]
        for k in range(dim):
            bmin_m[i, k] = bmin_v[i * dim + k]
            bmax_m[i, k] = bmax_v[i * dim + k]
    pts_perm = np.ascontiguousarray(np.asarray(points)[perm_arr])
    return pts_perm, perm_arr, lo_a, hi_a, left_a, right_a, bmin_a, bmax_a
