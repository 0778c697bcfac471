"""Pure numpy fallback for the compiled query kernels.

Signatures mirror :mod:`degenfuse._kdtree`, but the "tree" is just the point
array and its row ids: queries run as chunked brute force, which is exact and
needs no compiler.
"""
import numpy as np

_CHUNK_ELEMS = 4_000_000


def _chunks(m, n):
    step = max(1, _CHUNK_ELEMS // max(n, 1))
    for start in range(0, m, step):
        yield start, min(m, start + step)


def _sq_dists(pts, q):
    # same accumulation order as the compiled kernel: sum over axes of diff**2
    acc = np.zeros((q.shape[0], pts.shape[0]))
    for k in range(pts.shape[1]):
        diff = q[:, k, None] - pts[None, :, k]
        acc += diff * diff
    return acc


def build_tree(points, leaf_size):
    pts = np.ascontiguousarray(points, dtype=float)
    return pts, np.arange(len(pts), dtype=np.int64)


def nearest_batch(pts, ids, queries):
    m = queries.shape[0]
    out_ids = np.full(m, -1, dtype=np.int64)
    out_d = np.full(m, np.inf)
    if pts.shape[0] == 0:
        return out_ids, out_d
    ids = np.asarray(ids)
    order = np.argsort(ids, kind="stable")
    pts_sorted = np.asarray(pts)[order]
    ids_sorted = ids[order]
    for a, b in _chunks(m, pts_sorted.shape[0]):
        d2 = _sq_dists(pts_sorted, queries[a:b])
        # argmin returns the first minimum, i.e. the smallest id after sorting
        j = np.argmin(d2, axis=1)
        out_ids[a:b] = ids_sorted[j]
        out_d[a:b] = np.sqrt(d2[np.arange(b - a), j])
    return out_ids, out_d


def radius_batch(pts, ids, queries, radius):
    m = queries.shape[0]
    qs, js, ds = [], [], []
    if pts.shape[0] > 0:
        ids = np.asarray(ids)
        for a, b in _chunks(m, pts.shape[0]):
            d = np.sqrt(_sq_dists(np.asarray(pts), queries[a:b]))
            qi, pj = np.nonzero(d < radius)
            qs.append(qi + a)
            js.append(ids[pj])
            ds.append(d[qi, pj])
    if not qs:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                np.empty(0))
    return (np.concatenate(qs).astype(np.int64), np.concatenate(js).astype(np.int64),
            np.concatenate(ds))
