"""Incremental convex hull in R^d (2 <= d <= 6) with coplanar facet merging.

The engine is a beneath-beyond / Quickhull variant.  Facets are stored with
an *inward* unit normal ``psi`` and offset ``K`` so that ``psi @ x >= K`` on
every input point, with equality on the facet.  Visibility decisions that
fall within ``10 * tol`` of the plane are re-evaluated with exact rational
determinants before the tolerance is applied.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class DegenerateHullError(ValueError):
    """Input points do not span R^d; ``affine_dim`` is the dimension found."""

    def __init__(self, affine_dim: int, dim: int):
        super().__init__(
            f"points are not full-dimensional: affine hull has dimension {affine_dim} < {dim}"
        )
        self.affine_dim = affine_dim
        self.dim = dim


@dataclass
class HullFacet:
    normal: np.ndarray
    offset: float
    vertices: tuple  # sorted point indices

    def to_json(self):
        return {
            "normal": [float(v) for v in self.normal],
            "offset": float(self.offset),
            "vertices": [int(v) for v in self.vertices],
        }


@dataclass
class HullComplex:
    """Boundary of the convex hull of ``points``.

    ``facets`` are the merged (possibly polytopal) facets; ``simplices`` is
    the simplicial boundary triangulation found during construction, each
    tagged with the merged facet containing it.  ``adjacency`` lists pairs
    of merged facets sharing a ridge.
    """

    points: np.ndarray
    facets: list
    simplices: list
    simplex_facet: list
    adjacency: list
    tol: float

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def vertices(self) -> list:
        return sorted({v for f in self.facets for v in f.vertices})

    def neighbors(self, i: int) -> list:
        out = [b for a, b in self.adjacency if a == i] + [a for a, b in self.adjacency if b == i]
        return sorted(out)

    def ridge(self, i: int, j: int) -> tuple:
        return tuple(sorted(set(self.facets[i].vertices) & set(self.facets[j].vertices)))

    def to_json(self):
        return {
            "dim": self.dim,
            "tol": self.tol,
            "vertices": [[float(c) for c in self.points[i]] for i in range(len(self.points))],
            "hull_vertices": self.vertices,
            "facets": [f.to_json() for f in self.facets],
            "simplices": [[int(v) for v in s] for s in self.simplices],
            "simplex_facet": [int(i) for i in self.simplex_facet],
            "adjacency": [[int(a), int(b)] for a, b in self.adjacency],
        }

    @classmethod
    def from_json(cls, data):
        facets = [
            HullFacet(np.array(f["normal"], float), float(f["offset"]), tuple(f["vertices"]))
            for f in data["facets"]
        ]
        return cls(
            points=np.array(data["vertices"], float),
            facets=facets,
            simplices=[tuple(s) for s in data["simplices"]],
            simplex_facet=list(data["simplex_facet"]),
            adjacency=[tuple(a) for a in data["adjacency"]],
            tol=float(data["tol"]),
        )


# ---------------------------------------------------------------------------
# exact fallback


def _exact_det(rows) -> Fraction:
    m = [[Fraction(float(v)) for v in r] for r in rows]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        inv = 1 / m[c][c]
        for r in range(c + 1, n):
            if m[r][c] != 0:
                fac = m[r][c] * inv
                m[r] = [a - fac * b for a, b in zip(m[r], m[c])]
    return det


def exact_orientation(simplex_pts: np.ndarray, x: np.ndarray) -> Fraction:
    """Exact signed volume of (simplex, x); its sign says which side x is on."""
    base = simplex_pts[0]
    rows = [[Fraction(float(a)) - Fraction(float(b)) for a, b in zip(v, base)] for v in simplex_pts[1:]]
    rows.append([Fraction(float(a)) - Fraction(float(b)) for a, b in zip(x, base)])
    return _exact_det(rows)


# ---------------------------------------------------------------------------
# construction


def _plane(pts: np.ndarray, interior: np.ndarray):
    """Unit normal and offset of the hyperplane through ``pts``, inward-oriented."""
    centroid = pts.mean(axis=0)
    _, s, vh = np.linalg.svd(pts[1:] - pts[0])
    psi = vh[-1]
    k = float(psi @ centroid)
    if psi @ interior < k:
        psi, k = -psi, -k
    return psi, k


def _initial_simplex(pts: np.ndarray, tol: float) -> list:
    n, d = pts.shape
    center = pts.mean(axis=0)
    i0 = int(np.argmax(np.linalg.norm(pts - center, axis=1)))
    chosen = [i0]
    basis = np.zeros((0, d))
    for _ in range(d):
        diff = pts - pts[i0]
        resid = diff - (diff @ basis.T) @ basis
        r = np.linalg.norm(resid, axis=1)
        j = int(np.argmax(r))
        if r[j] <= tol:
            raise DegenerateHullError(len(chosen) - 1, d)
        chosen.append(j)
        basis = np.vstack([basis, resid[j] / r[j]])
    return chosen


class _Facet:
    __slots__ = ("verts", "psi", "k", "nbr", "outside", "alive")

    def __init__(self, verts, psi, k):
        self.verts = verts
        self.psi = psi
        self.k = k
        self.nbr = {}
        self.outside = []
        self.alive = True


def _simplicial_hull(pts: np.ndarray, tol: float):
    n, d = pts.shape
    if n < d + 1:
        raise DegenerateHullError(min(n - 1, d - 1), d)
    init = _initial_simplex(pts, tol)
    interior = pts[init].mean(axis=0)
    band = 10.0 * tol

    facets: list[_Facet] = []

    def signed_dist(f: _Facet, idx):
        dist = pts[idx] @ f.psi - f.k
        # exact re-check near the plane
        near = np.flatnonzero(np.abs(dist) < band)
        if near.size:
            sv = pts[list(f.verts)]
            dc = exact_orientation(sv, interior)
            ref = float(f.psi @ interior - f.k)
            for t in near:
                dp = exact_orientation(sv, pts[idx[t]])
                dist[t] = ref * float(dp / dc) if dc != 0 else dist[t]
        return dist

    def make(verts):
        psi, k = _plane(pts[list(verts)], interior)
        f = _Facet(tuple(verts), psi, k)
        facets.append(f)
        return len(facets) - 1

    for drop in range(d + 1):
        make([v for j, v in enumerate(init) if j != drop])
    _link(facets, range(len(facets)))

    rest = np.array([i for i in range(n) if i not in set(init)], dtype=int)
    _assign(facets, range(len(facets)), rest, signed_dist, tol)

    work = [i for i, f in enumerate(facets) if f.outside]
    while work:
        fi = min(work)
        work = [w for w in work if w != fi]
        f = facets[fi]
        if not f.alive or not f.outside:
            continue
        cand = np.array(f.outside, dtype=int)
        dist = signed_dist(f, cand)
        eye = int(cand[np.argmin(dist)])

        visible = {fi}
        stack = [fi]
        while stack:
            g = facets[stack.pop()]
            for h in g.nbr.values():
                if h in visible or not facets[h].alive:
                    continue
                if signed_dist(facets[h], np.array([eye]))[0] < -tol:
                    visible.add(h)
                    stack.append(h)

        horizon = []
        for v in sorted(visible):
            for ridge, h in facets[v].nbr.items():
                if h not in visible:
                    horizon.append((ridge, h))
        horizon.sort(key=lambda rh: tuple(sorted(rh[0])))

        pending = []
        for v in visible:
            pending.extend(facets[v].outside)
            facets[v].alive = False
            facets[v].outside = []
        pending = sorted(set(pending) - {eye})

        new = []
        for ridge, h in horizon:
            nf = make(sorted(ridge | {eye}))
            facets[nf].nbr[ridge] = h
            facets[h].nbr[ridge] = nf
            new.append(nf)
        _link(facets, new)
        _assign(facets, new, np.array(pending, dtype=int), signed_dist, tol)
        work.extend(nf for nf in new if facets[nf].outside)

    return [f for f in facets if f.alive], interior


def _link(facets, ids):
    """Connect facets in ``ids`` that share a ridge (d-1 vertices)."""
    table = {}
    for i in ids:
        f = facets[i]
        for v in f.verts:
            ridge = frozenset(f.verts) - {v}
            if ridge in f.nbr:
                continue
            if ridge in table:
                j = table.pop(ridge)
                f.nbr[ridge] = j
                facets[j].nbr[ridge] = i
            else:
                table[ridge] = i


def _assign(facets, ids, idx, signed_dist, tol):
    if len(idx) == 0:
        return
    left = np.asarray(idx, dtype=int)
    for i in ids:
        if left.size == 0:
            break
        dist = signed_dist(facets[i], left)
        out = dist < -tol
        facets[i].outside.extend(int(v) for v in left[out])
        left = left[~out]


def _affine_coords(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    _, s, vh = np.linalg.svd(pts - c)
    return (pts - c) @ vh[: pts.shape[1] - 1].T


def extreme_subset(pts: np.ndarray, tol: float) -> list:
    """Indices of the extreme points of a full-dimensional point set."""
    d = pts.shape[1]
    if d == 1:
        return sorted({int(np.argmin(pts[:, 0])), int(np.argmax(pts[:, 0]))})
    return incremental_hull(pts, tol).vertices


def incremental_hull(points, tol: float = 1e-7, relative: bool = True) -> HullComplex:
    """Convex hull of ``points`` (m x d array) with coplanar facets merged.

    ``tol`` is scaled by ``max(1, max |x|)`` when ``relative`` is true.
    Merged facets keep only their extreme vertices, so points lying in the
    relative interior of a facet are not hull vertices.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] < 2:
        raise ValueError("points must be an (m, d) array with d >= 2")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    atol = tol * max(1.0, float(np.abs(pts).max())) if relative else tol
    simp, interior = _simplicial_hull(pts, atol)

    # union-find merge of adjacent coplanar simplices
    parent = list(range(len(simp)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    ridge_owner: dict = {}
    for i, f in enumerate(simp):
        for v in f.verts:
            ridge_owner.setdefault(frozenset(f.verts) - {v}, []).append(i)
    pairs = []
    for ridge, owners in ridge_owner.items():
        if len(owners) != 2:
            raise RuntimeError("hull construction produced a non-manifold ridge")
        a, b = owners
        pairs.append((a, b))
        fa, fb = simp[a], simp[b]
        cosang = float(np.clip(fa.psi @ fb.psi, -1.0, 1.0))
        if np.arccos(cosang) < 1e-6 and abs(fa.k - fb.k) <= atol:
            parent[find(a)] = find(b)

    groups: dict[int, list[int]] = {}
    for i in range(len(simp)):
        groups.setdefault(find(i), []).append(i)

    merged = []
    for members in groups.values():
        vs = sorted({v for i in members for v in simp[i].verts})
        if len(members) == 1:
            psi, k = simp[members[0]].psi, simp[members[0]].k
        else:
            psi, k = _plane(pts[vs], interior)
            sub = _affine_coords(pts[vs])
            keep = extreme_subset(sub, tol)
            vs = sorted(vs[j] for j in keep)
        merged.append((tuple(vs), psi, k, members))
    merged.sort(key=lambda m: m[0])

    owner = {}
    for fi, (_, _, _, members) in enumerate(merged):
        for s in members:
            owner[s] = fi
    facets = [HullFacet(np.asarray(psi), float(k), vs) for vs, psi, k, _ in merged]
    adj = sorted({tuple(sorted((owner[a], owner[b]))) for a, b in pairs if owner[a] != owner[b]})
    order = sorted(range(len(simp)), key=lambda i: tuple(sorted(simp[i].verts)))
    simplices = [tuple(sorted(simp[i].verts)) for i in order]
    simplex_facet = [owner[i] for i in order]
    return HullComplex(pts, facets, simplices, simplex_facet, adj, atol)


# ---------------------------------------------------------------------------
# face lattice


def polytope_faces(coords, tol: float = 1e-7) -> dict:
    """All faces of the polytope with vertex coordinates ``coords``.

    ``coords`` must be the vertices of a polytope whose affine hull has
    dimension ``k``; returns ``{dim: sorted list of vertex-index tuples}``
    for ``0 <= dim <= k`` (dimension ``k`` is the polytope itself).
    """
    pts = np.asarray(coords, dtype=float)
    m = len(pts)
    c = pts - pts.mean(axis=0)
    s = np.linalg.svd(c, compute_uv=False) if m > 1 else np.zeros(0)
    scale = max(1.0, float(np.abs(pts).max()))
    k = int(np.sum(s > tol * scale))
    out: dict[int, set] = {j: set() for j in range(k + 1)}
    _faces_into(pts, tuple(range(m)), k, tol, out)
    return {j: sorted(out[j]) for j in out}


def _faces_into(pts, ids, k, tol, out):
    key = tuple(sorted(ids))
    if key in out[k]:
        return
    out[k].add(key)
    if k == 0:
        return
    sub = pts[list(ids)]
    if k == 1:
        c = sub - sub.mean(axis=0)
        _, _, vh = np.linalg.svd(c)
        t = c @ vh[0]
        for e in (int(np.argmin(t)), int(np.argmax(t))):
            _faces_into(pts, (ids[e],), 0, tol, out)
        return
    if len(ids) == k + 1:
        for j in range(len(ids)):
            _faces_into(pts, tuple(v for i, v in enumerate(ids) if i != j), k - 1, tol, out)
        return
    loc = _affine_coords(sub) if sub.shape[1] > k else sub
    loc = loc[:, :k] if loc.shape[1] > k else loc
    hull = incremental_hull(loc, tol)
    for f in hull.facets:
        _faces_into(pts, tuple(ids[i] for i in f.vertices), k - 1, tol, out)


def face_lattice(hull: HullComplex, facet_ids=None) -> dict:
    """Faces of the hull boundary, as global vertex-index tuples by dimension."""
    ids = range(len(hull.facets)) if facet_ids is None else facet_ids
    out: dict[int, set] = {}
    for fi in ids:
        vs = hull.facets[fi].vertices
        faces = polytope_faces(hull.points[list(vs)], hull.tol / max(1.0, float(np.abs(hull.points).max())))
        for dim, lst in faces.items():
            out.setdefault(dim, set()).update(tuple(sorted(vs[i] for i in f)) for f in lst)
    return {dim: sorted(v) for dim, v in sorted(out.items())}


# ---------------------------------------------------------------------------
# stability certificates


@dataclass
class StableFacetCertificate:
    facet: int
    delta: float
    R_req: float
    R_used: float
    exact: bool = False

    @property
    def valid(self) -> bool:
        return self.delta > 0 and self.R_used >= self.R_req

    def to_json(self):
        return {
            "facet": self.facet,
            "delta": self.delta,
            "R_req": self.R_req if np.isfinite(self.R_req) else None,
            "R_used": self.R_used,
            "exact": self.exact,
            "valid": self.valid,
        }


def stable_facets(
    hull: HullComplex,
    lightcone_samples,
    R_used: float,
    facet_ids=None,
    safety: float = 0.1,
    margin_fn=None,
) -> list[StableFacetCertificate]:
    """Certify facets that no orbit point of norm above ``R_used`` can cut.

    ``delta`` is the minimum of ``psi`` over unit boundary directions of the
    cone.  With ``margin_fn`` (psi -> exact minimum or None) the exact value
    is used; otherwise it is estimated from ``lightcone_samples`` and shrunk
    by ``safety``.  Any cone point x with ``|x| > R_req = K / delta``
    satisfies ``psi(x) >= delta |x| > K``.
    """
    samples = np.asarray(lightcone_samples, dtype=float)
    if samples.size == 0:
        raise ValueError("empty boundary sample set")
    samples = samples / np.linalg.norm(samples, axis=1, keepdims=True)
    ids = range(len(hull.facets)) if facet_ids is None else facet_ids
    certs = []
    for fi in ids:
        f = hull.facets[fi]
        exact = None if margin_fn is None else margin_fn(f.normal)
        if exact is not None:
            delta, is_exact = float(exact), True
        else:
            delta = float(np.min(samples @ f.normal))
            delta = delta * (1.0 - safety) if delta > 0 else delta
            is_exact = False
        r_req = f.offset / delta if delta > 0 else float("inf")
        certs.append(StableFacetCertificate(int(fi), delta, float(r_req), float(R_used), is_exact))
    return certs
