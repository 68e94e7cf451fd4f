import warnings
from types import SimpleNamespace

import numpy as np
import pytest

from projcells.core import ProjPoint
from projcells.deform import (
    AmbiguousTrackingError,
    HypothesisError,
    TriangulatedPolytope,
    conjugation_matrix,
    deform,
    fan_triangulation,
    track_fixed_points,
    transfer_triangulation,
    validity_sweep,
)
from projcells.group import CuspSpec, Representation


def random_traceless(rng, n):
    x = rng.standard_normal((n, n))
    return x - np.trace(x) / n * np.eye(n)


def block_rotation(a, b):
    r = np.zeros((4, 4))
    for k, t in ((0, a), (2, b)):
        r[k:k + 2, k:k + 2] = [[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]]
    return r


def fixed_point_free(rep):
    gens = dict(rep.generators)
    gens["x"] = gens["x"] @ block_rotation(0.2, 0.3)
    return rep.with_generators(gens)


def test_fan_triangulation_rules():
    tri = np.array([[0.0, 0, 1], [1, 0, 1], [0, 1, 1]])
    assert fan_triangulation(tri, (4, 7, 9)) == [(4, 7, 9)]
    quad = np.array([[0.0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]])
    tris = fan_triangulation(quad, (5, 2, 8, 3))
    assert len(tris) == 2 and all(2 in t for t in tris)
    # a self-pairing by the half-turn keeps the diagonal 2-3
    assert transfer_triangulation(tris, {5: 8, 2: 3, 8: 5, 3: 2}) == tris
    # a quarter-turn pairing hands the partner the image diagonal 8-5
    assert transfer_triangulation(tris, {5: 2, 2: 8, 8: 3, 3: 5}) == [(2, 5, 8), (3, 5, 8)]


def test_torus_base(torus_base):
    assert len(torus_base.cells) == 2
    assert torus_base.face_classes == 3
    assert np.all(np.abs(torus_base.cone_determinants()) > 1e-6)


def test_fig8_base(fig8_base):
    assert len(fig8_base.cells) == 2
    assert all(len(c) == 4 for c in fig8_base.cells)
    assert len(fig8_base.simplices) == 6
    assert fig8_base.face_classes == 4


def test_polytope_json_roundtrip(fig8_base):
    d = fig8_base.to_json()
    assert TriangulatedPolytope.from_json(d).to_json() == d


@pytest.mark.parametrize("which", ["torus", "fig8"])
def test_identity_deformation(which, torus_base, fig8_base, torus_rep, fig8_rep):
    base, rep = (torus_base, torus_rep) if which == "torus" else (fig8_base, fig8_rep)
    fixed = track_fixed_points(rep, base)
    for i, p in enumerate(base.cusp_points):
        assert ProjPoint(fixed[i]) == ProjPoint(p)
    res = deform(base, rep, rep)
    assert res.valid
    assert res.max_residual < 1e-9
    assert res.max_drift < 1e-9


def test_small_conjugations(torus_base, torus_rep):
    rng = np.random.default_rng(8)
    for _ in range(20):
        h = conjugation_matrix(random_traceless(rng, 3), 1e-3)
        rep_t = torus_rep.conjugate(h)
        res = deform(torus_base, rep_t, torus_rep)
        assert res.valid
        assert res.max_residual < 1e-9
        assert res.max_drift < 1e-2
        # tracked fixed point is the conjugated base point
        assert ProjPoint(res.radial_points[0]).distance(h @ torus_base.cusp_points[0]) < 1e-2
        # combinatorial rigidity: same index structure
        assert res.polytope.simplices == torus_base.simplices
        assert [p.vertex_map for p in res.polytope.pairings] == [p.vertex_map for p in torus_base.pairings]


def test_fig8_conjugation(fig8_base, fig8_rep):
    h = conjugation_matrix(random_traceless(np.random.default_rng(2), 4), 1e-3)
    res = deform(fig8_base, fig8_rep.conjugate(h), fig8_rep)
    assert res.valid and res.max_residual < 1e-9


def test_radial_end_witness(torus_base, torus_rep):
    rng = np.random.default_rng(9)
    rep_t = torus_rep.conjugate(conjugation_matrix(random_traceless(rng, 3), 1e-3))
    res = deform(torus_base, rep_t)
    poly = res.polytope
    for s in poly.simplices:
        span = poly.coords[list(s)]
        for v in s:
            x = rep_t.word_matrix(poly.words[v]) @ res.radial_points[poly.tags[v]]
            m = np.vstack([span, x])
            sv = np.linalg.svd(m / np.linalg.norm(m, axis=1, keepdims=True), compute_uv=False)
            assert sv[len(s)] <= rep_t.tol.eps_geom


def test_fixed_point_free_rejected(fig8_base, fig8_rep):
    with pytest.raises(HypothesisError) as ei:
        deform(fig8_base, fixed_point_free(fig8_rep))
    assert ei.value.cusp == "c0"
    assert "c0" in str(ei.value)


def test_ambiguous_tracking():
    rep = Representation({"a": np.diag([2.0, 1.0, 0.5])}, cusps=[CuspSpec("c0", ["a"])])
    near = SimpleNamespace(cusp_names=["c0"], cusp_points=np.array([[1.0, 0.05, 0.0]]))
    assert np.allclose(np.abs(track_fixed_points(rep, near)[0]), [1, 0, 0])
    tie = SimpleNamespace(cusp_names=["c0"], cusp_points=np.array([[1.0, 1.0, 0.0]]))
    with pytest.raises(AmbiguousTrackingError):
        track_fixed_points(rep, tie)


def test_sweep(torus_base, torus_rep):
    x = random_traceless(np.random.default_rng(3), 3)

    def path(s):
        gens = dict(torus_rep.generators)
        gens["a"] = gens["a"] @ conjugation_matrix(x, s)
        return torus_rep.with_generators(gens)

    sw = validity_sweep(torus_base, path, s_max=2.0, n_grid=16)
    assert sw.threshold > 0
    if not sw.monotone:
        warnings.warn("validity along the sweep path is not monotone", stacklevel=1)
    valid = [s for s, ok in sw.samples if ok]
    for s in valid:
        assert deform(torus_base, path(s / 2)).valid
