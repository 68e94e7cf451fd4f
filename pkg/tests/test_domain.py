import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import lorentz_char_mc

from projcells.core import ToleranceConfig, dual_action, lorentz_embedding
from projcells.domain import (
    Horoball,
    HorofunctionWarning,
    LorentzCone,
    NotUniqueError,
    OrthantCone,
    OutsideConeError,
    PolyhedralCone,
    cone_from_json,
    horoball_contains,
    horofunction,
    is_horo_functional,
    lorentz_constant,
    lorentz_constant_closed_form,
    vinberg_lift,
    vinberg_lifts,
)

SQUARE_RAYS = np.array([[1.0, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1]])


def lorentz_interior(rng, dim, m):
    u = rng.standard_normal((m, dim - 1))
    u *= (rng.uniform(0, 0.95, m) / np.linalg.norm(u, axis=1))[:, None]
    return np.hstack([u, np.ones((m, 1))]) * rng.uniform(0.5, 3, m)[:, None]


# --- characteristic function ------------------------------------------------


def test_orthant_examples():
    c = OrthantCone(3)
    assert c.f(np.array([1.0, 1, 1])) == pytest.approx(1.0, rel=1e-15)
    assert c.f(np.array([2.0, 1, 1])) == pytest.approx(0.5, rel=1e-15)


def test_orthant_polyhedral_route_agrees(rng):
    # the generic simplicial-fan assembly must reproduce the orthant closed form
    generic = PolyhedralCone(np.eye(3))
    c = OrthantCone(3)
    for x in rng.uniform(0.1, 3, (20, 3)):
        assert generic.f(x) == pytest.approx(c.f(x), rel=1e-12)


def test_lorentz_constant():
    assert lorentz_constant(3) == pytest.approx(2 * np.pi, rel=1e-12)
    for d in (3, 4, 5):
        assert lorentz_constant(d) == pytest.approx(lorentz_constant_closed_form(d), rel=1e-12)


@pytest.mark.parametrize("x", [[0, 0, 1], [0.5, 0.2, 1], [0.3, -0.6, 2.0], [0.3, 0, 0.1, 1]])
def test_lorentz_matches_monte_carlo(x):
    x = np.array(x, dtype=float)
    est, err = lorentz_char_mc(x, 400_000)
    val = LorentzCone(x.size).f(x)
    assert abs(val - est) <= max(0.005 * est, 4 * err)


def test_outside_rejected():
    with pytest.raises(OutsideConeError):
        LorentzCone(3).f(np.array([1.0, 0, 1]))
    with pytest.raises(OutsideConeError):
        OrthantCone(3).f(np.array([1.0, -1, 1]))


@pytest.mark.parametrize("cone", [OrthantCone(3), LorentzCone(3), LorentzCone(4), PolyhedralCone(SQUARE_RAYS)])
def test_homogeneity_degree(cone, rng):
    n1 = cone.dim
    for _ in range(10):
        x = cone.interior_point() + 0.2 * rng.standard_normal(n1) * np.linalg.norm(cone.interior_point())
        if not cone.contains(x, 1e-3):
            continue
        for t in (0.5, 2.0, 10.0):
            assert cone.f(t * x) / cone.f(x) == pytest.approx(t ** (-n1), rel=1e-10)


@pytest.mark.parametrize("cone", [LorentzCone(3), PolyhedralCone(SQUARE_RAYS), OrthantCone(4)])
def test_gradient_finite_difference(cone, rng):
    x0 = cone.interior_point()
    n = 0
    while n < 50:
        x = x0 + 0.3 * rng.standard_normal(cone.dim) * np.linalg.norm(x0)
        if not cone.contains(x, 0.05):
            continue
        g = cone.char_function(x, gradient=True).gradient
        h = 1e-6 * np.linalg.norm(x)
        fd = np.array([(cone.f(x + h * e) - cone.f(x - h * e)) / (2 * h) for e in np.eye(cone.dim)])
        assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g)
        n += 1


@pytest.mark.parametrize("cone", [LorentzCone(3), PolyhedralCone(SQUARE_RAYS), OrthantCone(3)])
def test_log_f_hessian_positive(cone, rng):
    x0 = cone.interior_point()
    done = 0
    while done < 20:
        x = x0 + 0.3 * rng.standard_normal(cone.dim) * np.linalg.norm(x0)
        if not cone.contains(x, 0.05):
            continue
        x = x / np.linalg.norm(x)
        h = 1e-4
        lf = lambda y: np.log(cone.f(y))  # noqa: E731
        e = np.eye(cone.dim)
        hess = np.array([[(lf(x + h * (a + b)) - lf(x + h * (a - b)) - lf(x - h * (a - b)) + lf(x - h * (a + b)))
                          / (4 * h * h) for b in e] for a in e])
        assert np.linalg.eigvalsh(0.5 * (hess + hess.T)).min() > -1e-4
        done += 1


def test_vectorized_values_agree(rng):
    c = LorentzCone(4, transform=lorentz_embedding(np.array([[1.0, 0.3], [0.1, 1.03]]), hermitian=True) * 1.5)
    xs = np.vstack([c.interior_point() + 0.1 * rng.standard_normal((30, 4)), c.h @ np.array([1.0, 0, 0, 1])])
    vals = c.values(xs)
    for x, v in zip(xs, vals):
        if c.contains(x):
            assert v == pytest.approx(c.f(x), rel=1e-12)
        else:
            assert np.isnan(v)


# --- Vinberg hypersurface -------------------------------------------------------


def test_orthant_lifts():
    c = OrthantCone(3)
    assert np.allclose(vinberg_lift(c, [1, 1, 1]), [1, 1, 1])
    assert np.allclose(vinberg_lift(c, [8, 1, 1]), [4, 0.5, 0.5])
    assert np.allclose(vinberg_lift(c, [8, 1, 1]), vinberg_lift(c, [56, 7, 7]), rtol=1e-15)


def test_level_sets(rng):
    c = OrthantCone(4)
    for x in rng.uniform(0.1, 5, (50, 4)):
        assert np.prod(vinberg_lift(c, x)) == pytest.approx(1.0, rel=1e-12)
    lc = LorentzCone(3)
    forms = [lc.form(vinberg_lift(lc, x)) for x in lorentz_interior(rng, 3, 50)]
    assert np.ptp(forms) <= 1e-12 * np.mean(forms)


def test_batched_lifts(rng):
    lc = LorentzCone(3)
    xs = lorentz_interior(rng, 3, 20)
    assert np.allclose(vinberg_lifts(lc, xs), [vinberg_lift(lc, x) for x in xs], rtol=1e-13)


# --- duality and supporting functionals -------------------------------------------


def test_self_dual():
    assert isinstance(OrthantCone(3).dual(), OrthantCone)
    assert LorentzCone(3).dual().to_json() == LorentzCone(3).to_json()


def test_polyhedral_double_dual(rng):
    c = PolyhedralCone(SQUARE_RAYS)
    d = c.dual()
    # dual rays are the primal facet normals
    nd = d.rays / np.linalg.norm(d.rays, axis=1, keepdims=True)
    nc = c.normals / np.linalg.norm(c.normals, axis=1, keepdims=True)
    assert {tuple(np.round(r, 12)) for r in nd} == {tuple(np.round(r, 12)) for r in nc}
    dd = d.dual()
    for x in rng.uniform(-1, 1, (1000, 3)) + [0, 0, 0.5]:
        assert c.contains(x, 1e-9) == dd.contains(x, 1e-9)


def test_not_full_dimensional():
    with pytest.raises(ValueError, match="full-dimensional"):
        PolyhedralCone([[1.0, 0, 0], [0, 1, 0]])


def test_lorentz_supporting_functional(rng):
    c = LorentzCone(3)
    v = np.array([1.0, 0, 1])
    phi = c.supporting_functional(v)
    assert np.allclose(phi / phi[-1], [-1, 0, 1])
    assert abs(phi @ v) < 1e-12
    assert np.all(lorentz_interior(rng, 3, 100) @ phi > 0)
    with pytest.raises(OutsideConeError):
        c.supporting_functional([0.0, 0, 1])


def test_orthant_supporting_functional():
    c = OrthantCone(3)
    assert np.allclose(c.supporting_functional([1.0, 1, 0]), [0, 0, 1])
    with pytest.raises(NotUniqueError):
        c.supporting_functional([1.0, 0, 0])


def test_simplex_comparison(rng):
    # inscribed simplicial cone sharing the extreme ray v=(1,0,1) with the Lorentz cone
    angles = [0.0, 2.0, 4.0]
    rays = np.array([[np.cos(a), np.sin(a), 1.0] for a in angles])
    sigma = PolyhedralCone(rays)
    lc = LorentzCone(3)
    w = rng.dirichlet(np.ones(3), 100)
    for x in w @ rays:
        assert sigma.f(x) >= lc.f(x) * (1 - 1e-12)


def test_cone_json_roundtrip():
    for c in (LorentzCone(3), OrthantCone(4), PolyhedralCone(SQUARE_RAYS), LorentzCone(3, 2 * np.eye(3))):
        d = cone_from_json(c.to_json())
        assert d.to_json() == c.to_json()
    with pytest.raises(ValueError):
        cone_from_json({"variant": "bogus"})


# --- horofunctions ------------------------------------------------------------------


def test_orthant_horofunction_examples():
    c = OrthantCone(3)
    e0 = np.array([1.0, 0, 0])
    assert horofunction(c, e0, [1, 1, 1]) == pytest.approx(1.0)
    vals = [horofunction(c, e0, [t, 1, 1]) for t in (1e-3, 1.0, 1e3)]
    assert np.allclose(vals, [t ** (2 / 3) for t in (1e-3, 1.0, 1e3)], rtol=1e-12)
    assert vals[0] < vals[1] < vals[2]


def test_interior_functional_flagged():
    with pytest.warns(HorofunctionWarning):
        horofunction(OrthantCone(3), np.ones(3), [1, 1, 1])
    assert is_horo_functional(OrthantCone(3), [1.0, 0, 0])
    assert not is_horo_functional(OrthantCone(3), [1.0, 1, 1])


def test_horofunction_equivariance(rng):
    oc = OrthantCone(3)
    e0 = np.array([1.0, 0, 0])
    for _ in range(20):
        g = np.diag(rng.uniform(0.2, 5, 3))
        g /= np.linalg.det(g) ** (1 / 3)
        p = rng.uniform(0.1, 3, 3)
        assert horofunction(oc, dual_action(g, e0), g @ p) == pytest.approx(horofunction(oc, e0, p), rel=1e-9)
    lc = LorentzCone(3)
    phi = np.array([-1.0, 0, 1])
    for _ in range(20):
        a, b = rng.uniform(-1, 1, 2)
        g = lorentz_embedding(np.array([[1 + a * b, a], [b, 1.0]]))
        p = lorentz_interior(rng, 3, 1)[0]
        assert horofunction(lc, dual_action(g, phi), g @ p) == pytest.approx(horofunction(lc, phi, p), rel=1e-9)


@pytest.mark.parametrize("model", ["lorentz", "orthant"])
def test_horofunction_decay(model):
    # far along the ray the point is within the default boundary band, so tighten it
    tight = ToleranceConfig(eps_equal=1e-13, eps_geom=1e-13)
    if model == "lorentz":
        cone, phi, xhat, v = LorentzCone(3, tol=tight), np.array([-1.0, 0, 1]), np.array([0.0, 0, 1]), np.array([1.0, 0, 1])
        exact = lambda s: (2 * np.pi) ** (1 / 3) / np.sqrt(1 + 2 * s)  # noqa: E731
        far = 1e7
    else:
        cone, phi, xhat, v = OrthantCone(3, tight), np.array([1.0, 0, 0]), np.ones(3), np.array([0.0, 1, 0])
        exact = lambda s: (1 + s) ** (-1 / 3)  # noqa: E731
        far = 1e10
    ss = [0, 1, 10, 1e3, 1e6]
    vals = [horofunction(cone, phi, xhat + s * v) for s in ss]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert np.allclose(vals, [exact(s) for s in ss], rtol=1e-9)
    assert horofunction(cone, phi, xhat + far * v) < 1e-3


def test_horoball_contains_and_convexity(rng):
    lc = LorentzCone(3)
    phi = np.array([-1.0, 0, 1])
    p = np.array([0.2, 0.1, 1.0])
    h = horofunction(lc, phi, p)
    assert horoball_contains(lc, Horoball(phi, h), p)
    assert not horoball_contains(lc, Horoball(phi, h / 2), p)
    with pytest.raises(ValueError):
        Horoball(phi, 0.0)
    hb = Horoball(phi, 1.0)
    pts = [x for x in lorentz_interior(rng, 3, 4000) if horoball_contains(lc, hb, x)]
    assert len(pts) > 200
    for i in range(500):
        a, b = pts[(2 * i) % len(pts)], pts[(2 * i + 1) % len(pts)]
        mid = a / np.linalg.norm(a) + b / np.linalg.norm(b)
        assert horoball_contains(lc, hb, mid)


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.floats(0.1, 10))
def test_lift_scale_invariance(a, b, s):
    lc = LorentzCone(3)
    r = max(1.0, np.hypot(a, b) / 0.95)
    x = np.array([a / r, b / r, 1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert np.allclose(vinberg_lift(lc, x), vinberg_lift(lc, s * x), rtol=1e-13)


def test_lorentz_values_near_boundary():
    cone = LorentzCone(3, tol=ToleranceConfig(eps_equal=1e-13, eps_geom=1e-13))
    for d in (1e-4, 1e-8, 1e-11):
        x = np.array([1.0, 0.0, 1.0 + d])
        d = x[2] - 1.0  # exact: the stored offset
        q = d * (2.0 + d)
        exact = 2 * np.pi * q**-1.5
        assert cone.values(x[None])[0] == pytest.approx(exact, rel=1e-12)
        assert cone.f(x) == pytest.approx(exact, rel=1e-12)
