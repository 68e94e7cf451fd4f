"""Canonical cell decompositions from cusp-orbit convex hulls.

Pipeline: lift each cusp's parabolic fixed point to the cone boundary,
enumerate its orbit, hull the pooled orbit, keep the facets that separate
the hull from the origin, certify them against un-enumerated orbit points,
and sort the resulting cells (and their faces) into group-orbit classes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .core import ProjPoint, projective_distance
from .domain import ConeModel, OrbitHullCone, horofunction, vinberg_lift, vinberg_lifts
from .group import (
    Representation,
    enumerate_elements,
    invert_word,
    is_parabolic,
    orbit_bfs,
    reduce_word,
    validate_cusp,
)
from .hull import DegenerateHullError, face_lattice, incremental_hull, stable_facets


class DecompositionError(RuntimeError):
    pass


class ShallowEnumerationError(DecompositionError):
    """No facet could be certified; ``provisional`` lists the uncertified ones."""

    def __init__(self, msg, provisional, R_used):
        super().__init__(msg)
        self.provisional = provisional
        self.R_used = R_used


@dataclass
class CuspDatum:
    name: str
    point: ProjPoint
    lift: np.ndarray
    scale: float
    phi: np.ndarray
    words: list

    def to_json(self):
        return {
            "name": self.name,
            "point": self.point.coords.tolist(),
            "lift": self.lift.tolist(),
            "scale": self.scale,
            "phi": self.phi.tolist(),
            "words": list(self.words),
        }

    @classmethod
    def from_json(cls, d):
        return cls(d["name"], ProjPoint(d["point"]), np.array(d["lift"], float), float(d["scale"]),
                   np.array(d["phi"], float), list(d["words"]))


@dataclass
class Cell:
    dim: int
    vertices: tuple  # indices into the decomposition's point pool
    cls: int = -1
    word: str = ""  # maps the class base cell onto this cell
    normal: np.ndarray | None = None
    offset: float | None = None


@dataclass
class Pairing:
    source: int
    target: int
    word: str
    residual: float = 0.0

    def to_json(self):
        return {"from": self.source, "to": self.target, "word": self.word, "residual": self.residual}


@dataclass
class CellDecomposition:
    """Certified cells of the decomposition and their orbit classes.

    ``points`` are the pooled orbit lifts (``points[i] = M(words[i]) @
    lift of cusp cusp_of[i]``); each cell refers to them by index.  Class
    ``k`` of dimension ``d`` has base cell ``bases[d][k]``; every cell's
    ``word`` maps its class base onto it.
    """

    dim: int
    points: np.ndarray
    words: list
    cusp_of: np.ndarray
    cusps: list
    cells: list
    bases: dict
    pairings: list
    provisional: list
    R_used: float
    scales: list
    stats: dict = field(default_factory=dict)
    rep: Representation | None = None

    # -- accessors --------------------------------------------------------
    @property
    def top_dim(self) -> int:
        return self.dim - 1

    def cells_of_dim(self, d: int) -> list:
        return [i for i, c in enumerate(self.cells) if c.dim == d]

    @property
    def quotient_counts(self) -> dict:
        return {d: len(self.bases.get(d, [])) for d in range(self.dim)}

    def euler_characteristic(self) -> int:
        """Alternating count of quotient cells, ideal vertices excluded."""
        return sum((-1) ** d * n for d, n in self.quotient_counts.items() if d > 0)

    def projective_vertices(self, i: int) -> list:
        return [ProjPoint(self.points[v]) for v in self.cells[i].vertices]

    def cell_index(self) -> dict:
        return {(c.dim, tuple(sorted(c.vertices))): i for i, c in enumerate(self.cells)}

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "cells": [
                {
                    "dim": c.dim,
                    "vertices": [ProjPoint(self.points[v]).coords.tolist() for v in c.vertices],
                    "vertex_ids": list(c.vertices),
                    "class": c.cls,
                    "word": c.word,
                    **({} if c.normal is None else {"normal": c.normal.tolist(), "offset": c.offset}),
                }
                for c in self.cells
            ],
            "pairings": [p.to_json() for p in self.pairings],
            "quotient_counts": {str(d): n for d, n in self.quotient_counts.items()},
            "class_bases": {str(d): list(b) for d, b in sorted(self.bases.items())},
            "provisional": self.provisional,
            "points": self.points.tolist(),
            "words": list(self.words),
            "cusp_of": [int(c) for c in self.cusp_of],
            "cusps": [c.to_json() for c in self.cusps],
            "R_used": self.R_used,
            "scales": list(self.scales),
            "stats": self.stats,
            **({} if self.rep is None else {"representation": self.rep.to_json()}),
        }

    @classmethod
    def from_json(cls, d: dict) -> "CellDecomposition":
        cells = [
            Cell(
                c["dim"],
                tuple(c["vertex_ids"]),
                c["class"],
                c.get("word", ""),
                None if "normal" not in c else np.array(c["normal"], float),
                c.get("offset"),
            )
            for c in d["cells"]
        ]
        return cls(
            dim=int(d["dim"]),
            points=np.array(d["points"], float),
            words=list(d["words"]),
            cusp_of=np.array(d["cusp_of"], int),
            cusps=[CuspDatum.from_json(c) for c in d["cusps"]],
            cells=cells,
            bases={int(k): list(v) for k, v in d["class_bases"].items()},
            pairings=[Pairing(p["from"], p["to"], p["word"], p.get("residual", 0.0)) for p in d["pairings"]],
            provisional=d["provisional"],
            R_used=float(d["R_used"]),
            scales=list(d["scales"]),
            stats=d.get("stats", {}),
            rep=Representation.from_json(d["representation"]) if "representation" in d else None,
        )

    @classmethod
    def load(cls, path) -> "CellDecomposition":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# cusp translation coordinates


def _unipotent_log(c: np.ndarray) -> np.ndarray | None:
    n = c.shape[0]
    a = c - np.eye(n)
    if np.abs(np.linalg.matrix_power(a, n)).max() > 1e-6 * max(1.0, np.abs(a).max()) ** n:
        return None
    out = np.zeros_like(a)
    term = np.eye(n)
    for k in range(1, n + 1):
        term = term @ a
        out += (-1) ** (k + 1) * term / k
    return out


class CuspFrame:
    """Coordinates on the cusp boundary in which cusp generators translate.

    For commuting unipotent generators ``c_i = exp(N_i)`` fixing the lift
    ``p`` and the functional ``phi``, ``tau(c x) = tau(x) + k`` whenever
    ``c = prod c_i^{k_i}``.
    """

    def __init__(self, mats, p: np.ndarray, phi: np.ndarray, probe: np.ndarray):
        self.mats = [np.asarray(m, float) for m in mats]
        self.inv = [np.linalg.inv(m) for m in self.mats]
        self.p = p
        self.phi = phi
        logs = [_unipotent_log(m) for m in self.mats]
        self.ok = all(lg is not None for lg in logs)
        if self.ok:
            self.logs = logs
            self.zeta = p / (p @ p)
            y = probe
            g = np.array([[self.zeta @ (a @ b @ y) for b in logs] for a in logs]) / (phi @ y)
            self.ok = abs(np.linalg.det(g)) > 1e-12
            if self.ok:
                self.ginv = np.linalg.inv(g)

    def tau(self, x: np.ndarray) -> np.ndarray:
        a = np.array([self.zeta @ (lg @ x) for lg in self.logs])
        return self.ginv @ a / (self.phi @ x)

    def element(self, k) -> np.ndarray:
        m = np.eye(len(self.p))
        for ki, c, ci in zip(k, self.mats, self.inv):
            m = m @ np.linalg.matrix_power(c if ki >= 0 else ci, abs(int(ki)))
        return m

    def candidate_shifts(self, a: np.ndarray, b: np.ndarray, search: int = 12):
        """Integer vectors k with c^k a possibly equal to b."""
        if self.ok:
            k = self.tau(b) - self.tau(a)
            r = np.round(k)
            if np.all(np.abs(k - r) <= 1e-5 * (1.0 + np.abs(k))):
                yield tuple(int(v) for v in r)
            return
        rng = range(-search, search + 1)
        for k in np.ndindex(*([len(rng)] * len(self.mats))):
            yield tuple(rng[i] for i in k)


def cusp_word(words, k) -> str:
    out = ""
    for ki, w in zip(k, words):
        out += (w if ki > 0 else invert_word(w)) * abs(int(ki))
    return out


# ---------------------------------------------------------------------------
# pipeline


def _match_sets(a: np.ndarray, b: np.ndarray, rtol: float) -> bool:
    if len(a) != len(b):
        return False
    used = set()
    for x in a:
        d = np.linalg.norm(b - x, axis=1)
        j = int(np.argmin(d))
        if d[j] > rtol * max(1.0, float(np.linalg.norm(x))) or j in used:
            return False
        used.add(j)
    return True


class _Classifier:
    """Sorts vertex sets into orbit classes using cusp stabilizers."""

    def __init__(self, rep, points, words, cusp_of, cusps, frames, rtol=1e-7):
        self.rep = rep
        self.points = points
        self.words = words
        self.cusp_of = cusp_of
        self.cusps = cusps
        self.frames = frames
        self.rtol = rtol
        self._inv = {}

    def inv_word_matrix(self, i):
        if i not in self._inv:
            self._inv[i] = self.rep.word_matrix(invert_word(self.words[i]))
        return self._inv[i]

    def normalized(self, verts, v):
        """Translate the set so that vertex ``v`` becomes its cusp's lift."""
        m = self.inv_word_matrix(v)
        return (m @ self.points[list(verts)].T).T

    def signature(self, pts, c):
        vals = np.sort(pts @ self.cusps[c].phi)
        return vals

    def equivalent(self, verts_a, verts_b) -> str | None:
        """A word whose matrix maps set A onto set B, or None."""
        if len(verts_a) != len(verts_b):
            return None
        v = verts_a[0]
        c = self.cusp_of[v]
        pa = self.normalized(verts_a, v)
        sig_a = self.signature(pa, c)
        lift = self.cusps[c].lift
        others_a = [x for x in pa if np.linalg.norm(x - lift) > self.rtol * max(1.0, np.linalg.norm(lift))]
        for u in verts_b:
            if self.cusp_of[u] != c:
                continue
            pb = self.normalized(verts_b, u)
            sig_b = self.signature(pb, c)
            if np.abs(sig_a - sig_b).max() > 1e-6 * max(1.0, np.abs(sig_a).max()):
                continue
            if not others_a:
                return reduce_word(self.words[u] + invert_word(self.words[v]))
            frame = self.frames[c]
            a0 = others_a[0]
            for b in pb:
                if np.linalg.norm(b - lift) <= self.rtol * max(1.0, np.linalg.norm(lift)):
                    continue
                for k in frame.candidate_shifts(a0, b):
                    s = frame.element(k)
                    if not np.allclose(s @ a0, b, rtol=0, atol=self.rtol * max(1.0, np.linalg.norm(b))):
                        continue
                    if _match_sets((s @ pa.T).T, pb, self.rtol):
                        w = self.words[u] + cusp_word(self.cusps[c].words, k) + invert_word(self.words[v])
                        return reduce_word(w)
        return None


def pairing_residual(rep, points, word, src, dst) -> float:
    """Max relative distance from the image of ``src`` to the nearest point of ``dst``."""
    m = rep.word_matrix(word)
    img = (m @ points[list(src)].T).T
    tgt = points[list(dst)]
    worst = 0.0
    for x in img:
        d = np.linalg.norm(tgt - x, axis=1).min()
        worst = max(worst, d / max(1.0, float(np.linalg.norm(x))))
    return float(worst)


def cusp_data(rep: Representation, cone: ConeModel, scales=None) -> list[CuspDatum]:
    if not rep.cusps:
        raise DecompositionError("representation has no cusps")
    scales = [1.0] * len(rep.cusps) if scales is None else list(scales)
    if len(scales) != len(rep.cusps) or any(not s > 0 for s in scales):
        raise DecompositionError("need one positive scale per cusp")
    out = []
    for cusp, s in zip(rep.cusps, scales):
        report = validate_cusp(rep, cusp, cone)
        if not report.ok:
            raise DecompositionError(f"cusp {cusp.name!r} failed validation: {'; '.join(report.violations)}")
        x = cone.orient(report.fixed_point.coords)
        out.append(CuspDatum(cusp.name, report.fixed_point, float(s) * x, float(s), report.phi, list(cusp.words)))
    return out


def check_cone_invariance(rep: Representation, cone: ConeModel, m: int = 20, seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    x0 = cone.interior_point()
    for _ in range(m):
        x = x0 + 0.3 * np.linalg.norm(x0) * rng.uniform(-1, 1, cone.dim) / np.sqrt(cone.dim)
        if not cone.contains(x):
            continue
        for g in rep.generators.values():
            if cone.margin(g @ x) <= 0 and cone.margin(-(g @ x)) <= 0:
                return False
    return True


def epstein_penner(
    rep: Representation,
    cone: ConeModel,
    scales=None,
    word_length: int = 8,
    max_norm: float = 1e3,
    rng_seed: int = 0,
) -> CellDecomposition:
    """Certified canonical cells of the cusped manifold with holonomy ``rep``."""
    tol = rep.tol
    if not check_cone_invariance(rep, cone):
        raise DecompositionError("generators do not preserve the cone")
    cusps = cusp_data(rep, cone, scales)

    # pooled orbits
    pts, words, owner = [], [], []
    r_used = np.inf
    for ci, cd in enumerate(cusps):
        orb = orbit_bfs(rep, cd.lift, word_length, max_norm=max_norm)
        r_used = min(r_used, orb.R_used)
        pts.append(orb.points)
        words.extend(orb.words)
        owner.extend([ci] * len(orb.words))
    pool = np.vstack(pts)
    owner = np.array(owner)
    norms = np.linalg.norm(pool, axis=1)
    keep = np.flatnonzero(norms < r_used)
    if len(keep) < rep.dim + 2:
        keep = np.arange(len(pool))
    sub = pool[keep]
    try:
        hull = incremental_hull(sub, tol.eps_geom)
    except DegenerateHullError as exc:
        raise DecompositionError(f"orbit hull is degenerate: {exc}") from exc

    cand = [i for i, f in enumerate(hull.facets) if f.offset > tol.eps_geom * max(1.0, float(np.abs(sub).max()))]
    rng = np.random.default_rng(rng_seed)
    samples = np.vstack([sub / np.linalg.norm(sub, axis=1, keepdims=True),
                         cone.boundary_samples(max(10 * rep.dim**2, 500), rng)])
    certs = stable_facets(hull, samples, r_used, cand, margin_fn=cone.exact_boundary_min)
    good = [c for c in certs if c.valid]
    provisional = [
        {"vertex_ids": [int(keep[v]) for v in hull.facets[c.facet].vertices],
         "vertices": [ProjPoint(sub[v]).coords.tolist() for v in hull.facets[c.facet].vertices],
         "R_req": c.R_req if np.isfinite(c.R_req) else None}
        for c in certs if not c.valid
    ]
    if not good:
        finite = [c.R_req for c in certs if np.isfinite(c.R_req)]
        raise ShallowEnumerationError(
            f"enumeration too shallow: no certified facet (R_used={r_used:.6g}, "
            f"smallest R_req={min(finite) if finite else float('inf'):.6g})",
            provisional,
            float(r_used),
        )

    # renumber to the pool and collect faces
    top = []
    for c in good:
        f = hull.facets[c.facet]
        top.append(Cell(rep.dim - 1, tuple(sorted(int(keep[v]) for v in f.vertices)), normal=f.normal, offset=f.offset))
    lattice = face_lattice(hull, [c.facet for c in good])
    cells = []
    for d in range(rep.dim - 1):
        for vs in lattice.get(d, []):
            cells.append(Cell(d, tuple(sorted(int(keep[v]) for v in vs))))
    cells.extend(top)
    # stable order: by dimension, then by the words of the vertices (scale independent)
    cells.sort(key=lambda c: (c.dim, sorted(c.vertices)))

    frames = [CuspFrame([rep.word_matrix(w) for w in cd.words], cd.lift, cd.phi, cone.interior_point()) for cd in cusps]
    clf = _Classifier(rep, pool, words, owner, cusps, frames)
    bases: dict[int, list[int]] = {}
    pairings = []
    for i, cell in enumerate(cells):
        blist = bases.setdefault(cell.dim, [])
        for k, b in enumerate(blist):
            w = clf.equivalent(cells[b].vertices, cell.vertices)
            if w is not None:
                cell.cls, cell.word = k, w
                res = pairing_residual(rep, pool, w, cells[b].vertices, cell.vertices)
                pairings.append(Pairing(b, i, w, res))
                break
        else:
            cell.cls, cell.word = len(blist), ""
            blist.append(i)

    stats = {
        "orbit_points": int(len(pool)),
        "hull_points": int(len(keep)),
        "hull_facets": len(hull.facets),
        "candidate_facets": len(cand),
        "certified_facets": len(good),
        "max_pairing_residual": max((p.residual for p in pairings), default=0.0),
    }
    logs = np.log(np.array([cd.scale for cd in cusps]))
    return CellDecomposition(
        dim=rep.dim,
        points=pool,
        words=words,
        cusp_of=owner,
        cusps=cusps,
        cells=cells,
        bases=bases,
        pairings=pairings,
        provisional=provisional,
        R_used=float(r_used),
        scales=[float(s) for s in np.exp(logs)],
        stats=stats,
        rep=rep,
    )


def face_pairings(dec: CellDecomposition, rep: Representation, tol: float = 1e-7):
    """Recheck every stored pairing word; returns (pairings, inconsistencies)."""
    bad = []
    out = []
    for p in dec.pairings:
        res = pairing_residual(rep, dec.points, p.word, dec.cells[p.source].vertices, dec.cells[p.target].vertices)
        out.append(Pairing(p.source, p.target, p.word, res))
        if res > tol:
            bad.append(f"word {p.word!r} maps cell {p.source} to cell {p.target} with residual {res:.3g}")
    return out, bad


def quotient_signature(dec: CellDecomposition) -> tuple:
    """Combinatorial invariant of the quotient complex: counts and incidence of class bases."""
    inc = []
    for d in range(1, dec.dim):
        for b in dec.bases.get(d, []):
            faces = []
            verts = dec.cells[b].vertices
            for e in dec.cells_of_dim(d - 1):
                if set(dec.cells[e].vertices) <= set(verts):
                    faces.append(dec.cells[e].cls)
            inc.append((d, tuple(sorted(faces))))
    counts = tuple(sorted(dec.quotient_counts.items()))
    return counts, tuple(sorted(inc))


def canonical_one_cusp(rep: Representation, cone: ConeModel, word_length: int = 8, check_scale: float = 2.0, **kw):
    """Decomposition at scale 1, cross-checked against a rescaled lift."""
    if len(rep.cusps) != 1:
        raise DecompositionError("canonical_one_cusp needs exactly one cusp; use epstein_penner with scales")
    dec = epstein_penner(rep, cone, [1.0], word_length, **kw)
    if check_scale is not None:
        other = epstein_penner(rep, cone, [check_scale], word_length, **kw)
        if quotient_signature(dec) != quotient_signature(other):
            raise DecompositionError("decomposition changed under rescaling the cusp lift")
        dec.stats["scale_check"] = float(check_scale)
    return dec


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class ContinuityReport:
    same_combinatorics: bool
    max_drift: float
    perturbation: float
    constant: float

    @property
    def wall_crossed(self) -> bool:
        return not self.same_combinatorics


def continuity_probe(rep0, rep1, cone_builder, word_length: int = 8, **kw) -> ContinuityReport:
    """Compare decompositions of two nearby representations.

    Cells are matched through the words labelling their vertices, which
    are representation independent.
    """
    d0 = epstein_penner(rep0, cone_builder(rep0), word_length=word_length, **kw)
    d1 = epstein_penner(rep1, cone_builder(rep1), word_length=word_length, **kw)
    same = quotient_signature(d0) == quotient_signature(d1)
    pos1 = {w: i for i, w in enumerate(d1.words)}
    drift = 0.0
    used = {v for c in d0.cells for v in c.vertices}
    for v in used:
        j = pos1.get(d0.words[v])
        if j is not None:
            drift = max(drift, projective_distance(d0.points[v], d1.points[j]))
    pert = rep0.distance(rep1)
    return ContinuityReport(same, float(drift), float(pert), float(drift / pert) if pert > 0 else 0.0)


def coset_representatives(rep: Representation, cusp: CuspDatum, word_length: int = 4) -> list:
    """Elements moving the cusp point, one per distinct image of its lift."""
    seen = []
    out = []
    for e in enumerate_elements(rep, word_length):
        y = e.matrix @ cusp.lift
        if projective_distance(y, cusp.lift) < 1e-8:
            continue
        if any(np.linalg.norm(y - z) <= 1e-9 * max(1.0, np.linalg.norm(y)) for z in seen):
            continue
        seen.append(y)
        out.append(e)
    return out


def _minmax_level(cone, phi_a, phi_b, p, q) -> float:
    """min over the domain of max(h_a, h_b) for horoballs centred at p and q."""

    def h(phi, x):
        return float(phi @ vinberg_lift(cone, x))

    def point(lam):
        return (1 - lam) * p / np.linalg.norm(p) + lam * q / np.linalg.norm(q)

    lo, hi = 1e-9, 1 - 1e-9
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        x = point(mid)
        if h(phi_a, x) < h(phi_b, x):
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    x0 = point(0.5 * (lo + hi))
    best = max(h(phi_a, x0), h(phi_b, x0))

    # local refinement over the whole domain in an affine chart
    psi0 = cone.dual().interior_point()
    _, _, vh = np.linalg.svd(psi0[None, :])
    basis = vh[1:]
    c0 = x0 / (psi0 @ x0)

    def obj(u):
        x = c0 + u @ basis
        if not cone.contains(x):
            return np.inf
        return max(h(phi_a, x), h(phi_b, x))

    res = minimize(obj, np.zeros(cone.dim - 1), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    if np.isfinite(res.fun):
        best = min(best, float(res.fun))
    return best


def precisely_invariant_level(
    rep: Representation, cone: ConeModel, cusp: CuspDatum, word_length: int = 4, phi_scale: float = 1.0
) -> float:
    """Largest t for which horoballs at level t about the cusp orbit are disjoint.

    Since ``g B(phi, t) = B(g* phi, t)``, the horoball about the cusp point
    and its image under g are disjoint exactly when
    ``t < min_x max(h_phi(x), h_{g* phi}(x))``; the result is the minimum of
    that level over the coset representatives found.
    """
    phi = phi_scale * cusp.phi
    reps = coset_representatives(rep, cusp, word_length)
    if not reps:
        raise DecompositionError("no coset representative outside the cusp subgroup")
    levels = {}
    for e in reps:
        q = e.matrix @ cusp.lift
        key = tuple(np.round(q / np.linalg.norm(q), 9))
        if key in levels:
            continue
        phi_g = np.linalg.solve(e.matrix.T, phi)
        levels[key] = _minmax_level(cone, phi, phi_g, cusp.lift, q)
    return float(min(levels.values()))


def sample_horoball(cone: ConeModel, phi, center, t: float, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` points of the horoball ``h_phi <= t`` centred at ``center``.

    Random interior points are slid toward the centre along projective
    segments until they reach a random sublevel in ``(0, t]``.
    """
    x0 = cone.interior_point()
    c = cone.orient(np.asarray(center, dtype=float))
    c = c / np.linalg.norm(c)
    phi = np.asarray(phi, dtype=float)
    horofunction(cone, phi, x0)  # warns once if phi is not a boundary functional

    ys = []
    while sum(len(y) for y in ys) < m:
        y = x0 + 0.8 * np.linalg.norm(x0) * rng.uniform(-1, 1, (m, cone.dim)) / np.sqrt(cone.dim)
        ys.append(y[np.isfinite(cone.values(y))])
    y = np.vstack(ys)[:m]
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    level = t * rng.uniform(0.05, 1.0, m)

    def h(z):
        return vinberg_lifts(cone, z) @ phi

    lo = np.zeros(m)
    hi = np.where(h(y) <= level, 0.0, 1.0 - 1e-12)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        z = (1 - mid)[:, None] * y + mid[:, None] * c
        above = h(z) > level
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return (1 - hi)[:, None] * y + hi[:, None] * c


def density_probe(rep: Representation, cone: ConeModel, seed, word_length: int, n_samples: int = 2000,
                  rng_seed: int = 0) -> float:
    """One-sided Hausdorff distance from the boundary to the projectivized orbit.

    Distances are measured in the affine chart normal to an interior point
    of the dual cone (the Klein model for the standard Lorentz cone).
    """
    seed = np.asarray(seed, dtype=float)
    if not cone.on_boundary(cone.orient(seed), 1e-6):
        raise ValueError("seed is not on the cone boundary")
    orb = orbit_bfs(rep, cone.orient(seed), word_length, extra_layer=False)
    psi0 = cone.dual().interior_point()
    psi0 = psi0 / np.linalg.norm(psi0)
    _, _, vh = np.linalg.svd(psi0[None, :])
    basis = vh[1:]

    def chart(x):
        x = np.atleast_2d(x)
        return (x / (x @ psi0)[:, None]) @ basis.T

    rng = np.random.default_rng(rng_seed)
    bd = chart(cone.boundary_samples(n_samples, rng))
    d, _ = cKDTree(chart(orb.points)).query(bd)
    return float(d.max())


def discreteness_probe(rep: Representation, lift, word_length: int, radius: float) -> float:
    """Minimum pairwise distance between orbit points of norm below ``radius``."""
    from .group import min_pairwise_distance

    orb = orbit_bfs(rep, lift, word_length, extra_layer=False)
    return min_pairwise_distance(orb.points, radius)


def orbit_hull_cone(rep: Representation, word_length: int = 6, max_norm: float = 1e4) -> OrbitHullCone:
    """Polyhedral approximation of the invariant domain from boundary directions.

    Directions are the attracting and repelling eigenvectors of enumerated
    loxodromic elements together with the cusp orbit directions.
    """
    dirs = []
    for e in enumerate_elements(rep, min(word_length, 4)):
        if not e.word or is_parabolic(e.matrix, rep.tol):
            continue
        w, v = np.linalg.eig(e.matrix)
        mods = np.abs(w)
        if mods.max() - mods.min() < 1e-6:
            continue
        for k in (int(np.argmax(mods)), int(np.argmin(mods))):
            if abs(w[k].imag) < 1e-9:
                dirs.append(np.real(v[:, k]))
    for cusp in rep.cusps:
        mats = [rep.word_matrix(w) for w in cusp.words]
        from .group import common_fixed_points

        fps = [f for f in common_fixed_points(mats, rep.tol) if f.isolated]
        if fps:
            orb = orbit_bfs(rep, fps[0].point.coords, word_length, max_norm=max_norm, extra_layer=False)
            dirs.extend(orb.points)
    d = np.array(dirs, dtype=float)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    # orient all directions to one side: the cone is the one containing most of them
    ref = d[0]
    d = np.where((d @ ref)[:, None] < 0, -d, d)
    # dedupe
    d = np.unique(np.round(d, 12), axis=0)
    return OrbitHullCone(d)
