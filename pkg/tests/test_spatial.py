import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from degenfuse.spatial import SpatialIndex, build_index, nearest, radius_search

from oracles import nearest_bf, radius_bf


def test_empty_index_has_no_match(backend):
    idx = build_index(np.zeros((0, 3)), backend=backend)
    assert nearest(idx, (1.0, 2.0, 3.0)) is None
    assert radius_search(idx, (0.0, 0.0, 0.0), 5.0) == []


def test_single_point(backend):
    idx = build_index([(0.0, 0.0, 0.0)], backend=backend)
    assert nearest(idx, (1.0, 0.0, 0.0)) == (0, 1.0)


def test_closer_point_wins(backend):
    idx = build_index([(0, 0, 0), (2, 0, 0)], backend=backend)
    i, d = nearest(idx, (0.9, 0, 0))
    assert i == 0 and d == pytest.approx(0.9, abs=1e-15)


def test_tie_breaks_to_smallest_id(backend):
    idx = build_index([(1, 0, 0), (-1, 0, 0)], backend=backend)
    assert nearest(idx, (0, 0, 0)) == (0, 1.0)
    idx = build_index([(-1, 0, 0), (1, 0, 0), (0, 1, 0), (0, -1, 0)], backend=backend)
    assert nearest(idx, (0, 0, 0)) == (0, 1.0)


def test_tie_break_with_many_duplicates(backend):
    pts = np.tile([[3.0, 4.0]], (200, 1))
    idx = build_index(pts, backend=backend)
    assert nearest(idx, (0.0, 0.0)) == (0, 5.0)


def test_radius_self_inclusion(backend):
    idx = build_index([(0.0, 0.0)], backend=backend)
    assert radius_search(idx, (0.0, 0.0), 0.1) == [(0, 0.0)]


def test_radius_boundary_excluded(backend):
    idx = build_index([(1.0, 0.0)], backend=backend)
    assert radius_search(idx, (0.0, 0.0), 1.0) == []


def test_radius_rejects_nonpositive():
    idx = build_index([(1.0, 0.0)])
    with pytest.raises(ValueError):
        radius_search(idx, (0.0, 0.0), 0.0)


@pytest.mark.parametrize("dim", [2, 3])
def test_random_instance_matches_brute_force(backend, rng, dim):
    pts = rng.uniform(-5, 5, (1000, dim))
    queries = rng.uniform(-6, 6, (50, dim))
    idx = build_index(pts, backend=backend)
    plist = [tuple(p) for p in pts]
    for q in queries:
        i, d = nearest(idx, q)
        bi, bd = nearest_bf(plist, tuple(q))
        assert i == bi
        assert d == pytest.approx(bd, rel=1e-12)
        got = radius_search(idx, q, 0.8)
        want = radius_bf(plist, tuple(q), 0.8)
        assert [g[0] for g in got] == [w[0] for w in want]
        assert all(math.isclose(g[1], w[1], rel_tol=1e-12) for g, w in zip(got, want))


def test_backends_agree_on_clustered_data(rng):
    from degenfuse.spatial import BACKENDS
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernel not built")
    pts = np.round(rng.normal(0, 1, (3000, 3)), 1)  # many exact duplicates and ties
    q = np.round(rng.normal(0, 1, (300, 3)), 1)
    a = SpatialIndex(pts, backend="compiled")
    b = SpatialIndex(pts, backend="python")
    for x, y in zip(a.query_nearest(q), b.query_nearest(q)):
        np.testing.assert_array_equal(x, y)
    for x, y in zip(a.query_radius(q, 0.3), b.query_radius(q, 0.3)):
        np.testing.assert_array_equal(x, y)


def test_custom_ids_must_increase():
    with pytest.raises(ValueError):
        SpatialIndex(np.zeros((2, 2)), ids=[3, 1])
    idx = SpatialIndex([(0.0, 0.0), (5.0, 0.0)], ids=[7, 9])
    assert nearest(idx, (4.0, 0.0)) == (9, 1.0)


def test_rejects_nan():
    with pytest.raises(ValueError):
        SpatialIndex([(0.0, np.nan, 0.0)])


# distances are compared squared; magnitudes below ~1e-154 underflow to zero when squared
coords = st.floats(-100, 100, allow_nan=False, allow_infinity=False).map(
    lambda v: 0.0 if abs(v) < 1e-100 else v)


@settings(max_examples=60, deadline=None)
@given(pts=arrays(float, st.tuples(st.integers(1, 60), st.just(2)), elements=coords),
       seed=st.integers(0, 2**31 - 1), r=st.floats(0.1, 50))
def test_radius_invariant_under_insertion_order(pts, seed, r):
    perm = np.random.default_rng(seed).permutation(len(pts))
    q = pts[0] + 0.5
    a = SpatialIndex(pts).query_radius(q, r)
    b = SpatialIndex(pts[perm]).query_radius(q, r)
    # map ids of the permuted index back to original rows
    got = sorted(zip(perm[b[1]].tolist(), b[2].tolist()))
    want = sorted(zip(a[1].tolist(), a[2].tolist()))
    assert got == want


@settings(max_examples=60, deadline=None)
@given(pts=arrays(float, st.tuples(st.integers(1, 80), st.just(3)), elements=coords),
       q=arrays(float, 3, elements=coords))
def test_nearest_matches_brute_force_property(pts, q):
    i, d = nearest(SpatialIndex(pts), q)
    bi, bd = nearest_bf([tuple(p) for p in pts], tuple(q))
    assert (i, d) == (bi, pytest.approx(bd, rel=1e-12, abs=1e-300))
