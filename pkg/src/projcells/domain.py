"""Properly convex cones, characteristic functions, Vinberg lifts and horoballs.

Every cone is an open convex cone in R^N (N = n+1) containing no line.  The
characteristic function is

    f(x) = integral over the dual cone of exp(-psi(x)) d psi

with the standard coordinate volume form on the dual space.  It is
evaluated in closed form for every supported variant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.optimize import linprog

from .core import DEFAULT_TOL, ProjPoint, ToleranceConfig, safe_inverse
from .hull import DegenerateHullError, incremental_hull


class OutsideConeError(ValueError):
    pass


class NotUniqueError(ValueError):
    pass


class HorofunctionWarning(UserWarning):
    """The functional is interior to the dual cone, so h is not a horofunction."""


@dataclass
class CharFunctionValue:
    value: float
    gradient: np.ndarray | None = None


@lru_cache(maxsize=None)
def lorentz_constant(dim: int) -> float:
    """f at the unit timelike axis of the standard Lorentz cone in R^dim.

    Integrating over the dual cone in slices psi_t = s gives
    ``vol(B^{dim-1}) * int_0^inf s^(dim-1) e^(-s) ds``; the radial integral
    is done by quadrature.
    """
    ball = math.pi ** ((dim - 1) / 2) / math.gamma((dim + 1) / 2)
    radial, _ = integrate.quad(lambda s: s ** (dim - 1) * math.exp(-s), 0, np.inf, epsabs=0, epsrel=1e-13)
    return ball * radial


def lorentz_constant_closed_form(dim: int) -> float:
    return math.pi ** ((dim - 1) / 2) / math.gamma((dim + 1) / 2) * math.gamma(dim)


class ConeModel:
    """Base class; subclasses set ``dim`` and ``variant``."""

    variant = "abstract"
    dim: int

    def __init__(self, tol: ToleranceConfig = DEFAULT_TOL):
        self.tol = tol

    # membership -----------------------------------------------------------
    def margin(self, x) -> float:
        """Scale-invariant distance-like margin; positive exactly inside."""
        raise NotImplementedError

    def contains(self, x, eps: float | None = None) -> bool:
        eps = self.tol.eps_geom if eps is None else eps
        return self.margin(x) > eps

    def on_boundary(self, x, eps: float | None = None) -> bool:
        eps = self.tol.eps_geom if eps is None else eps
        return abs(self.margin(x)) <= eps

    def orient(self, x) -> np.ndarray:
        """Representative of the line through x pointing into the cone closure."""
        x = np.asarray(x, dtype=float)
        return x if self.margin(x) >= self.margin(-x) else -x

    # characteristic function ---------------------------------------------
    def _char(self, x: np.ndarray, gradient: bool) -> CharFunctionValue:
        raise NotImplementedError

    def char_function(self, x, gradient: bool = False) -> CharFunctionValue:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}")
        if not self.contains(x):
            raise OutsideConeError("outside cone: the characteristic function diverges there")
        return self._char(x, gradient)

    def f(self, x) -> float:
        return self.char_function(x).value

    def values(self, xs) -> np.ndarray:
        """f on each row of ``xs``; nan where a row is not inside the cone."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return np.array([self._char(x, False).value if self.contains(x) else np.nan for x in xs])

    # duality and boundary -------------------------------------------------
    def dual(self) -> "ConeModel":
        raise NotImplementedError

    def supporting_functional(self, v) -> np.ndarray:
        raise NotImplementedError

    def boundary_samples(self, m: int, rng: np.random.Generator) -> np.ndarray:
        """``m`` unit vectors on the boundary of the cone."""
        raise NotImplementedError

    def exact_boundary_min(self, psi) -> float | None:
        """Exact min of psi over unit vectors of the closed cone, if known."""
        return None

    def interior_point(self) -> np.ndarray:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Lorentz cone


class LorentzCone(ConeModel):
    """``h`` applied to the standard cone ``{x_last > |x_rest|}``.

    With ``transform`` h the characteristic function is
    ``f(x) = f_std(h^{-1} x) / |det h|`` (change of variables in the
    defining integral), which is what conjugated holonomies need.
    """

    variant = "lorentz"

    def __init__(self, dim: int, transform=None, tol: ToleranceConfig = DEFAULT_TOL):
        super().__init__(tol)
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = int(dim)
        if transform is None:
            self.h = np.eye(dim)
            self.hinv = np.eye(dim)
            self.identity = True
        else:
            self.h = np.array(transform, dtype=float)
            if self.h.shape != (dim, dim):
                raise ValueError("transform has the wrong shape")
            self.hinv = safe_inverse(self.h, tol)
            self.identity = bool(np.allclose(self.h, np.eye(dim), rtol=0, atol=1e-15))
        self.absdet = abs(float(np.linalg.det(self.h)))
        self.c = lorentz_constant(self.dim)

    def _std(self, x):
        return self.hinv @ np.asarray(x, dtype=float)

    @staticmethod
    def _q(y):
        # factored form avoids cancellation near the boundary
        r = np.linalg.norm(y[..., :-1], axis=-1)
        return (y[..., -1] - r) * (y[..., -1] + r)

    def form(self, x) -> float:
        """Lorentz form of ``h^{-1} x``: last^2 - |rest|^2."""
        y = self._std(x)
        return float(self._q(y))

    def margin(self, x) -> float:
        y = self._std(x)
        n = np.linalg.norm(y)
        if n == 0:
            return 0.0
        return float((y[-1] - np.linalg.norm(y[:-1])) / (math.sqrt(2.0) * n))

    def _char(self, x, gradient):
        y = self._std(x)
        q = self._q(y)
        val = self.c * q ** (-self.dim / 2.0) / self.absdet
        grad = None
        if gradient:
            qy = y.copy()
            qy[:-1] *= -1
            grad = -self.dim * val * (self.hinv.T @ qy) / q
        return CharFunctionValue(float(val), grad)

    def values(self, xs):
        y = np.atleast_2d(np.asarray(xs, dtype=float)) @ self.hinv.T
        n = np.linalg.norm(y, axis=1)
        inside = (y[:, -1] - np.linalg.norm(y[:, :-1], axis=1)) > self.tol.eps_geom * math.sqrt(2.0) * n
        q = self._q(y)
        out = np.full(len(y), np.nan)
        out[inside] = self.c * q[inside] ** (-self.dim / 2.0) / self.absdet
        return out

    def dual(self):
        if self.identity:
            return LorentzCone(self.dim, tol=self.tol)
        return LorentzCone(self.dim, self.hinv.T, tol=self.tol)

    def supporting_functional(self, v):
        v = np.asarray(v, dtype=float)
        if np.linalg.norm(v) == 0:
            raise ValueError("zero vector")
        v = self.orient(v)
        if not self.on_boundary(v):
            raise OutsideConeError("vector is not on the cone boundary")
        y = self._std(v)
        phi0 = y.copy()
        phi0[:-1] *= -1  # Lorentz pairing with y, positive on the cone
        phi = self.hinv.T @ phi0
        return phi / np.linalg.norm(phi)

    def boundary_samples(self, m, rng):
        u = rng.standard_normal((m, self.dim - 1))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        y = np.hstack([u, np.ones((m, 1))])
        x = y @ self.h.T
        return x / np.linalg.norm(x, axis=1, keepdims=True)

    def exact_boundary_min(self, psi):
        if not self.identity:
            return None
        psi = np.asarray(psi, dtype=float)
        return float((psi[-1] - np.linalg.norm(psi[:-1])) / math.sqrt(2.0))

    def interior_point(self):
        e = np.zeros(self.dim)
        e[-1] = 1.0
        return self.h @ e

    def to_json(self):
        out = {"variant": "lorentz", "dim": self.dim}
        if not self.identity:
            out["transform"] = self.h.tolist()
        return out


# ---------------------------------------------------------------------------
# polyhedral cones


def _slice_functional(r: np.ndarray) -> np.ndarray:
    """A covector positive on every row of ``r`` (unit rows), or error."""
    ell = r.sum(axis=0)
    if np.linalg.norm(ell) > 0:
        ell = ell / np.linalg.norm(ell)
        if np.min(r @ ell) > 1e-9:
            return ell
    m, n = r.shape
    # maximize s subject to r @ ell >= s, |ell_i| <= 1
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-r, np.ones((m, 1))])
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(m), bounds=[(-1, 1)] * n + [(None, 1)], method="highs")
    if res.status != 0 or -res.fun <= 1e-12:
        raise ValueError("rays do not span a properly convex cone")
    ell = res.x[:n]
    return ell / np.linalg.norm(ell)


def cone_facets(rays, tol: float = 1e-9):
    """Extreme rays and facet normals of the cone spanned by ``rays``.

    Returns ``(extreme_ray_indices, normals, facet_ray_sets)`` with unit
    inward normals.  Rays are sliced by a positive covector and the slice
    polytope is hulled.
    """
    r = np.asarray(rays, dtype=float)
    if r.ndim != 2 or r.shape[0] < r.shape[1]:
        raise ValueError("not full-dimensional: need at least dim rays")
    n = r.shape[1]
    r = r / np.linalg.norm(r, axis=1, keepdims=True)
    if np.linalg.matrix_rank(r, tol=1e-10) < n:
        raise ValueError("not full-dimensional: rays span a proper subspace")
    ell = _slice_functional(r)
    inner = r.sum(axis=0)
    y = r / (r @ ell)[:, None]
    _, _, vh = np.linalg.svd(ell[None, :])
    basis = vh[1:]
    coords = y @ basis.T
    if n == 2:
        t = coords[:, 0]
        lo, hi = int(np.argmin(t)), int(np.argmax(t))
        ext = sorted({lo, hi})
        sets = [(lo,), (hi,)]
    else:
        try:
            hull = incremental_hull(coords, tol)
        except DegenerateHullError as exc:
            raise ValueError(f"not full-dimensional: {exc}") from exc
        ext = hull.vertices
        sets = [f.vertices for f in hull.facets]
    normals = []
    for vs in sets:
        _, _, vh = np.linalg.svd(r[list(vs)], full_matrices=True)
        nrm = vh[-1]
        if nrm @ inner < 0:
            nrm = -nrm
        normals.append(nrm)
    return ext, np.array(normals), sets


class PolyhedralCone(ConeModel):
    """Cone spanned by finitely many rays; facets are computed on construction."""

    variant = "polyhedral"

    def __init__(self, rays, tol: ToleranceConfig = DEFAULT_TOL, _facets=None):
        super().__init__(tol)
        r = np.asarray(rays, dtype=float)
        self.dim = r.shape[1]
        if _facets is None:
            ext, normals, sets = cone_facets(r)
            n = np.linalg.norm(r, axis=1, keepdims=True)
            unit = np.where(np.abs(n - 1.0) <= 1e-15, r, r / n)  # idempotent on unit rays
            remap = {old: new for new, old in enumerate(ext)}
            self.rays = unit[ext]
            self.normals = normals
            self.facet_rays = [tuple(remap[i] for i in s) for s in sets]
        else:
            self.rays, self.normals, self.facet_rays = _facets
        self._simplices = None

    def margin(self, x):
        x = np.asarray(x, dtype=float)
        n = np.linalg.norm(x)
        if n == 0:
            return 0.0
        return float(np.min(self.normals @ x) / n)

    def dual(self):
        return PolyhedralCone(self.normals, tol=self.tol)

    def dual_simplices(self):
        """Simplicial cones (as N x N row matrices) triangulating the dual cone."""
        if self._simplices is None:
            psi = self.normals
            n = self.dim
            if len(psi) == n:
                mats = [psi]
            else:
                # fan from the barycenter of the sliced dual rays over a
                # boundary triangulation of the slice polytope
                ell = _slice_functional(psi)
                y = psi / (psi @ ell)[:, None]
                _, _, vh = np.linalg.svd(ell[None, :])
                hull = incremental_hull(y @ vh[1:].T, 1e-9)
                bary = y.mean(axis=0)
                mats = [np.vstack([bary, y[list(s)]]) for s in hull.simplices]
            self._simplices = [(m, abs(float(np.linalg.det(m)))) for m in mats]
        return self._simplices

    def _char(self, x, gradient):
        val = 0.0
        grad = np.zeros(self.dim) if gradient else None
        for m, det in self.dual_simplices():
            vals = m @ x
            term = det / np.prod(vals)
            val += term
            if gradient:
                grad -= term * (m / vals[:, None]).sum(axis=0)
        return CharFunctionValue(float(val), grad)

    def supporting_functional(self, v):
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("zero vector")
        vals = self.normals @ (v / n)
        if np.min(vals) < -self.tol.eps_geom:
            raise OutsideConeError("vector is outside the cone")
        hits = np.flatnonzero(np.abs(vals) <= self.tol.eps_geom)
        if len(hits) == 0:
            raise OutsideConeError("vector is interior, not on the boundary")
        if len(hits) > 1:
            raise NotUniqueError("supporting hyperplane not unique")
        return self.normals[hits[0]].copy()

    def boundary_samples(self, m, rng):
        out = np.empty((m, self.dim))
        for i in range(m):
            rs = self.rays[list(self.facet_rays[rng.integers(len(self.facet_rays))])]
            w = rng.exponential(size=len(rs))
            out[i] = w @ rs
        return out / np.linalg.norm(out, axis=1, keepdims=True)

    def exact_boundary_min(self, psi):
        # psi(x)/|x| >= min_i psi(r_i) for x a nonnegative combination of unit rays
        return float(np.min(self.rays @ np.asarray(psi, dtype=float)))

    def interior_point(self):
        return self.rays.mean(axis=0)

    def to_json(self):
        return {"variant": self.variant, "dim": self.dim, "rays": self.rays.tolist()}


class OrthantCone(PolyhedralCone):
    variant = "orthant"

    def __init__(self, dim: int, tol: ToleranceConfig = DEFAULT_TOL):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        eye = np.eye(dim)
        sets = [tuple(j for j in range(dim) if j != i) for i in range(dim)]
        super().__init__(eye, tol, _facets=(eye, eye.copy(), sets))

    def _char(self, x, gradient):
        val = float(1.0 / np.prod(x))
        return CharFunctionValue(val, -val / x if gradient else None)

    def dual(self):
        return OrthantCone(self.dim, self.tol)

    def to_json(self):
        return {"variant": "orthant", "dim": self.dim}


class OrbitHullCone(PolyhedralCone):
    """Polyhedral approximation of a cone by the hull of sampled boundary rays."""

    variant = "orbit_hull"

    def __init__(self, directions, tol: ToleranceConfig = DEFAULT_TOL):
        super().__init__(directions, tol)
        self.source = np.asarray(directions, dtype=float)

    def dual(self):
        return PolyhedralCone(self.normals, tol=self.tol)


def dual_cone(cone: ConeModel) -> ConeModel:
    return cone.dual()


def cone_from_json(data: dict, tol: ToleranceConfig = DEFAULT_TOL) -> ConeModel:
    variant = data.get("variant", data.get("type"))
    dim = data.get("dim")
    if variant == "lorentz":
        return LorentzCone(int(dim), data.get("transform"), tol)
    if variant == "orthant":
        return OrthantCone(int(dim), tol)
    if variant in ("polyhedral", "orbit_hull"):
        rays = np.asarray(data["rays"], dtype=float)
        if dim is not None and rays.shape[1] != dim:
            raise ValueError("ray length does not match dim")
        cls = PolyhedralCone if variant == "polyhedral" else OrbitHullCone
        return cls(rays, tol)
    raise ValueError(f"unknown cone variant {variant!r}")


def cone_to_json(cone: ConeModel) -> dict:
    return cone.to_json()


# ---------------------------------------------------------------------------
# Vinberg hypersurface and horofunctions


def _coords(p) -> np.ndarray:
    return p.coords if isinstance(p, ProjPoint) else np.asarray(p, dtype=float)


def vinberg_lift(cone: ConeModel, p) -> np.ndarray:
    """The point of the level set ``f = 1`` on the ray through ``p``."""
    x = _coords(p)
    x = cone.orient(x / np.abs(x).max())
    fx = cone.char_function(x).value
    return fx ** (1.0 / cone.dim) * x


def vinberg_lifts(cone: ConeModel, xs) -> np.ndarray:
    """Row-wise :func:`vinberg_lift` for points already oriented into the cone; nan rows outside."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    xs = xs / np.abs(xs).max(axis=1, keepdims=True)
    return cone.values(xs)[:, None] ** (1.0 / cone.dim) * xs


def horofunction(cone: ConeModel, phi, p) -> float:
    """``phi`` evaluated on the Vinberg lift of ``p``."""
    phi = np.asarray(phi, dtype=float)
    if cone.dual().contains(phi, eps=cone.tol.eps_geom):
        warnings.warn("functional is interior to the dual cone", HorofunctionWarning, stacklevel=2)
    return float(phi @ vinberg_lift(cone, p))


@dataclass(frozen=True)
class Horoball:
    phi: np.ndarray
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("horoball level must be positive")


def horoball_contains(cone: ConeModel, hb: Horoball, p) -> bool:
    return horofunction(cone, hb.phi, p) <= hb.t + cone.tol.eps_geom


def is_horo_functional(cone: ConeModel, phi, eps: float | None = None) -> bool:
    """True when phi is on the boundary of the dual cone (kernel meets the lightcone)."""
    eps = cone.tol.eps_geom if eps is None else eps
    return cone.dual().on_boundary(np.asarray(phi, dtype=float), eps)
