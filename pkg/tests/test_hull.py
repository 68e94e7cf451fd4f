from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_force_facets, extreme_points_lp

from projcells.hull import (
    DegenerateHullError,
    HullComplex,
    exact_orientation,
    face_lattice,
    incremental_hull,
    polytope_faces,
    stable_facets,
)

CUBE = np.array(list(product([0.0, 1.0], repeat=3)))
CENTERS = np.array([[0.5, 0.5, 0], [0.5, 0.5, 1], [0.5, 0, 0.5], [0.5, 1, 0.5], [0, 0.5, 0.5], [1, 0.5, 0.5]])


def facet_sets(h):
    return {tuple(f.vertices) for f in h.facets}


def test_square():
    h = incremental_hull(np.array([[0.0, 0], [1, 0], [1, 1], [0, 1]]), 1e-9)
    assert len(h.facets) == 4
    assert all(len(f.vertices) == 2 for f in h.facets)


def test_simplex():
    h = incremental_hull(np.vstack([np.zeros(3), np.eye(3)]))
    assert len(h.facets) == 4
    assert all(len(f.vertices) == 3 for f in h.facets)


def test_cube_with_face_centres():
    pts = np.vstack([CUBE, CENTERS])
    h = incremental_hull(pts)
    assert len(h.facets) == 6
    assert all(len(f.vertices) == 4 for f in h.facets)
    assert h.vertices == list(range(8))
    # oracle: exhaustive support planes, restricted to LP-extreme points
    ext = set(extreme_points_lp(pts))
    oracle = {tuple(v for v in s if v in ext) for s in brute_force_facets(pts)}
    assert facet_sets(h) == oracle


def test_cube_face_lattice():
    h = incremental_hull(CUBE)
    lat = face_lattice(h)
    assert [len(lat[d]) for d in (0, 1, 2)] == [8, 12, 6]
    faces = polytope_faces(CUBE)
    assert [len(faces[d]) for d in range(4)] == [8, 12, 6, 1]


def test_normals_point_inward():
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((50, 3))
    h = incremental_hull(pts)
    for f in h.facets:
        assert np.all(pts @ f.normal >= f.offset - 1e-9)
        assert np.allclose(pts[list(f.vertices)] @ f.normal, f.offset)


@pytest.mark.parametrize("dim,n,seed", [(3, 40, 0), (3, 60, 1), (4, 40, 2), (4, 60, 3)])
def test_brute_force_equivalence(dim, n, seed):
    pts = np.random.default_rng(seed).standard_normal((n, dim))
    assert facet_sets(incremental_hull(pts)) == brute_force_facets(pts)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 4), st.integers(8, 30))
def test_brute_force_property(seed, dim, n):
    pts = np.random.default_rng(seed).uniform(-1, 1, (n, dim))
    assert facet_sets(incremental_hull(pts)) == brute_force_facets(pts)


def test_insertion_order_invariance():
    rng = np.random.default_rng(7)
    pts = rng.standard_normal((60, 4))
    base = incremental_hull(pts)
    ref = {(tuple(f.vertices), round(f.offset, 9), tuple(np.round(f.normal, 9))) for f in base.facets}
    for _ in range(2):
        perm = rng.permutation(len(pts))
        h = incremental_hull(pts[perm])
        got = {(tuple(sorted(int(perm[v]) for v in f.vertices)), round(f.offset, 9), tuple(np.round(f.normal, 9)))
               for f in h.facets}
        assert got == ref


def test_degenerate_input():
    with pytest.raises(DegenerateHullError):
        incremental_hull(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]))


def test_exact_orientation_near_coplanar():
    simplex = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
    x = np.array([0.3, 0.3, 1e-17])
    assert exact_orientation(simplex, x) != 0
    assert exact_orientation(simplex, np.array([0.3, 0.3, 0.0])) == Fraction(0)
    assert np.sign(float(exact_orientation(simplex, x))) == -np.sign(float(exact_orientation(simplex, -x)))


def test_near_lightcone_points_robust():
    # points on a paraboloid hull nearly coplanar at large scale
    rng = np.random.default_rng(11)
    u = rng.uniform(-1, 1, (60, 2))
    pts = np.column_stack([u, (u**2).sum(axis=1)]) * 1e3
    h = incremental_hull(pts, 1e-12)
    assert facet_sets(h) == brute_force_facets(pts, 1e-12)


def test_json_roundtrip():
    h = incremental_hull(np.vstack([CUBE, CENTERS]))
    g = HullComplex.from_json(h.to_json())
    assert g.to_json() == h.to_json()


# --- certificates -----------------------------------------------------------


def frustum():
    sq = np.array([[1.0, 1, 1], [1, -1, 1], [-1, 1, 1], [-1, -1, 1]])
    return incremental_hull(np.vstack([sq, [[0.0, 0, 3]]]))


def bottom(h):
    return next(i for i, f in enumerate(h.facets) if np.allclose(f.normal / f.normal[2], [0, 0, 1]))


def test_certificate_arithmetic():
    h = frustum()
    i = bottom(h)
    f = h.facets[i]
    f.normal, f.offset = f.normal / np.linalg.norm(f.normal), 1.0
    samples = np.array([[np.sqrt(0.75) * np.cos(a), np.sqrt(0.75) * np.sin(a), 0.5] for a in np.linspace(0, 6, 40)])
    samples = np.vstack([samples, [[0, 0, 1.0]]])
    (c,) = stable_facets(h, samples, 1.0, [i], margin_fn=lambda psi: float(np.min(samples @ psi)))
    assert c.delta == pytest.approx(0.5)
    assert c.R_req == pytest.approx(2.0)
    assert not c.valid
    (c,) = stable_facets(h, samples, 2.5, [i], margin_fn=lambda psi: float(np.min(samples @ psi)))
    assert c.valid
    (c,) = stable_facets(h, samples, 2.5, [i])
    assert c.delta == pytest.approx(0.45) and c.R_req == pytest.approx(1 / 0.45)


def test_certificate_unstable_direction():
    h = frustum()
    i = bottom(h)
    samples = np.array([[1.0, 0, 0], [0, 0, 1]])
    (c,) = stable_facets(h, samples, 1e9, [i])
    assert c.delta <= 0 and not c.valid


def test_certificate_soundness_far_points():
    # hull of lightcone points; inject far cone points beyond R_used
    rng = np.random.default_rng(5)
    a = rng.uniform(0, 2 * np.pi, 80)
    r = rng.uniform(1, 5, 80)
    pts = np.column_stack([r * np.cos(a), r * np.sin(a), r])
    h = incremental_hull(pts)
    ids = [i for i, f in enumerate(h.facets) if f.offset > 1e-9]
    exact = lambda psi: float((psi[2] - np.hypot(psi[0], psi[1])) / np.sqrt(2))  # noqa: E731
    R_used = 5.0
    certs = [c for c in stable_facets(h, np.zeros((1, 3)) + [0, 0, 1], R_used, ids, margin_fn=exact) if c.valid]
    assert certs
    b = rng.uniform(0, 2 * np.pi, 100)
    s = rng.uniform(0, 1, 100)
    far = np.column_stack([s * np.cos(b), s * np.sin(b), np.ones(100)])
    far *= (R_used * rng.uniform(1.01, 50, 100) / np.linalg.norm(far, axis=1))[:, None]
    for c in certs:
        f = h.facets[c.facet]
        assert np.all(far @ f.normal > f.offset)
