"""Immutable kd-tree index with nearest and radius queries in 2D or 3D.

Construction and queries run in the compiled kernel when it is importable and
in :mod:`degenfuse._kdtree_py` (numpy brute force) otherwise. Set
``DEGENFUSE_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kdtree_py

try:
    if os.environ.get("DEGENFUSE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _kdtree as _compiled
except ImportError:  # pragma: no cover - depends on build
    _compiled = None

BACKENDS = {"python": _kdtree_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled
DEFAULT_BACKEND = "compiled" if _compiled is not None else "python"

LEAF_SIZE = 16


class SpatialIndex:
    """Snapshot of a point set answering exact nearest / radius queries.

    Point ids are row indices of ``points`` unless ``ids`` is given.
    Distances are Euclidean; nearest ties resolve to the smallest id and
    radius queries use a strict ``distance < radius`` test.
    """

    def __init__(self, points, ids=None, backend: str | None = None, leaf_size: int = LEAF_SIZE):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(0, 2) if pts.size == 0 else pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ValueError(f"expected (n, 2) or (n, 3) points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        self.dim = pts.shape[1]
        self.size = pts.shape[0]
        self.ids = (np.arange(self.size, dtype=np.int64) if ids is None
                    else np.asarray(ids, dtype=np.int64))
        if self.ids.shape != (self.size,):
            raise ValueError("ids must match the number of points")
        self.backend = backend or DEFAULT_BACKEND
        self._kernel = BACKENDS[self.backend]
        if self.size > 1 and not np.all(np.diff(self.ids) > 0):
            # kernels break ties on row position, which equals id order only if ids increase
            raise ValueError("ids must be strictly increasing")
        self._tree = self._kernel.build_tree(np.ascontiguousarray(pts), leaf_size)

    def __len__(self):
        return self.size

    def _queries(self, q):
        q = np.ascontiguousarray(np.asarray(q, dtype=float))
        single = q.ndim == 1
        q = q.reshape(-1, self.dim) if q.size else q.reshape(0, self.dim)
        if q.shape[1] != self.dim:
            raise ValueError(f"query dimension {q.shape[1]} != index dimension {self.dim}")
        if not np.all(np.isfinite(q)):
            raise ValueError("queries must be finite")
        return q, single

    def query_nearest(self, queries):
        """Vectorised nearest search. Returns ``(ids, dists)``; id -1 / inf when empty."""
        q, _ = self._queries(queries)
        pos, d = self._kernel.nearest_batch(*self._tree, q)
        ids = np.where(pos >= 0, self.ids[np.maximum(pos, 0)], -1) if self.size else pos
        return ids, d

    def query_radius(self, queries, radius: float):
        """Vectorised radius search.

        Returns ``(query_index, ids, dists)`` flat arrays sorted by query then id.
        """
        if not radius > 0:
            raise ValueError("radius must be > 0")
        q, _ = self._queries(queries)
        qi, pos, d = self._kernel.radius_batch(*self._tree, q, float(radius))
        ids = self.ids[pos] if len(pos) else pos
        order = np.lexsort((ids, qi))
        return qi[order], ids[order], d[order]


def build_index(points, backend: str | None = None) -> SpatialIndex:
    return SpatialIndex(points, backend=backend)


def nearest(index: SpatialIndex, query):
    """Nearest point to a single query as ``(id, distance)``, or ``None`` if empty."""
    if index.size == 0:
        return None
    ids, d = index.query_nearest(np.asarray(query, dtype=float).reshape(1, -1))
    return int(ids[0]), float(d[0])


def radius_search(index: SpatialIndex, query, radius: float) -> list[tuple[int, float]]:
    _, ids, d = index.query_radius(np.asarray(query, dtype=float).reshape(1, -1), radius)
    return [(int(i), float(x)) for i, x in zip(ids, d)]
