"""Rebuilding a fundamental polytope under a deformation of the holonomy.

A fundamental polytope P is assembled from one top cell per orbit class,
glued along shared faces.  Its boundary faces are paired by group words and
its boundary simplices are coned to a fixed interior point x0.  Under a new
representation each cusp's fixed point is tracked and pushed to the other
vertices by the same words, so the pairings hold by construction; the
result is valid while every coned simplex keeps its orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import projective_distance
from .decomp import CellDecomposition
from .group import Representation, common_fixed_points, invert_word, reduce_word
from .hull import polytope_faces


class HypothesisError(ValueError):
    """A cusp subgroup of the deformed representation has no usable fixed point."""

    def __init__(self, cusp: str, msg: str):
        super().__init__(msg)
        self.cusp = cusp


class AmbiguousTrackingError(HypothesisError):
    pass


class TriangulationError(ValueError):
    pass


@dataclass
class FacePairing:
    source: int  # boundary simplex index
    target: int
    word: str
    vertex_map: dict  # local vertex -> local vertex

    def to_json(self):
        return {
            "from": self.source,
            "to": self.target,
            "word": self.word,
            "vertex_map": [[int(a), int(b)] for a, b in sorted(self.vertex_map.items())],
        }


@dataclass
class TriangulatedPolytope:
    """Boundary triangulation of a fundamental polytope, coned to ``x0``."""

    dim: int
    vertex_ids: list  # pool indices in the base decomposition
    words: list  # word mapping the cusp lift to each vertex
    tags: list  # cusp index of each vertex
    coords: np.ndarray
    x0: np.ndarray
    cells: list  # chosen top cells, local vertex tuples
    simplices: list  # boundary simplices, local vertex tuples
    glued: list  # faces shared by two chosen cells
    pairings: list
    cusp_names: list
    cusp_points: np.ndarray

    @property
    def face_classes(self) -> int:
        return len({min(p.source, p.target) for p in self.pairings}) + len(self.glued)

    def cone_determinants(self, coords=None) -> np.ndarray:
        """Normalized determinants of (x0, simplex) for every boundary simplex."""
        v = self.coords if coords is None else coords
        out = np.empty(len(self.simplices))
        for i, s in enumerate(self.simplices):
            m = np.vstack([self.x0, v[list(s)]])
            m = m / np.linalg.norm(m, axis=1, keepdims=True)
            out[i] = np.linalg.det(m)
        return out

    def to_json(self):
        return {
            "dim": self.dim,
            "vertex_ids": [int(v) for v in self.vertex_ids],
            "words": list(self.words),
            "tags": [int(t) for t in self.tags],
            "coords": self.coords.tolist(),
            "x0": self.x0.tolist(),
            "cells": [list(c) for c in self.cells],
            "simplices": [list(s) for s in self.simplices],
            "glued": [list(g) for g in self.glued],
            "pairings": [p.to_json() for p in self.pairings],
            "cusp_names": list(self.cusp_names),
            "cusp_points": self.cusp_points.tolist(),
        }

    @classmethod
    def from_json(cls, d):
        return cls(
            dim=int(d["dim"]),
            vertex_ids=list(d["vertex_ids"]),
            words=list(d["words"]),
            tags=list(d["tags"]),
            coords=np.array(d["coords"], float),
            x0=np.array(d["x0"], float),
            cells=[tuple(c) for c in d["cells"]],
            simplices=[tuple(s) for s in d["simplices"]],
            glued=[tuple(g) for g in d["glued"]],
            pairings=[FacePairing(p["from"], p["to"], p["word"], {a: b for a, b in p["vertex_map"]})
                      for p in d["pairings"]],
            cusp_names=list(d["cusp_names"]),
            cusp_points=np.array(d["cusp_points"], float),
        )


# ---------------------------------------------------------------------------
# triangulating faces


def fan_triangulation(coords, ids, tol: float = 1e-9) -> list:
    """Placing triangulation of a polytope: fan from its lowest-labelled vertex.

    ``coords`` holds one row per entry of ``ids``.  Returns sorted tuples.
    """
    coords = np.asarray(coords, dtype=float)
    ids = tuple(ids)
    faces = polytope_faces(coords, tol)
    k = max(faces)
    if len(ids) == k + 1:
        return [tuple(sorted(ids))]
    apex = min(ids)
    out = []
    for f in faces[k - 1]:
        fids = tuple(ids[i] for i in f)
        if apex in fids:
            continue
        out.extend(tuple(sorted((apex,) + s)) for s in fan_triangulation(coords[list(f)], fids, tol))
    return sorted(out)


def transfer_triangulation(simplices, vertex_map: dict) -> list:
    return sorted(tuple(sorted(vertex_map[v] for v in s)) for s in simplices)


# ---------------------------------------------------------------------------
# base polytope


def _match(points, targets, rtol=1e-7):
    """Index into ``targets`` of each point (nearest, within relative tolerance)."""
    out = []
    for x in points:
        d = np.linalg.norm(targets - x, axis=1)
        j = int(np.argmin(d))
        if d[j] > rtol * max(1.0, float(np.linalg.norm(x))):
            return None
        out.append(j)
    return out


def triangulate_base(dec: CellDecomposition, rep: Representation | None = None) -> TriangulatedPolytope:
    """Fundamental polytope: one top cell per class, glued across shared faces.

    Boundary faces are paired by the word carrying the neighbouring cell
    outside the polytope onto the chosen cell of its class.  Non-simplex
    faces are fan-triangulated in pairing order and the triangulation is
    pushed through each pairing to the partner face.
    """
    rep = dec.rep if rep is None else rep
    if rep is None:
        raise ValueError("the decomposition carries no representation")
    top_dim = dec.top_dim
    tops = dec.cells_of_dim(top_dim)
    codim1 = dec.cells_of_dim(top_dim - 1)
    faces_of: dict[int, list[int]] = {}
    by_face: dict[int, list[int]] = {}
    for t in tops:
        vs = set(dec.cells[t].vertices)
        faces_of[t] = [f for f in codim1 if set(dec.cells[f].vertices) <= vs]
        for f in faces_of[t]:
            by_face.setdefault(f, []).append(t)

    nclass = len(dec.bases[top_dim])
    start = dec.bases[top_dim][0]
    chosen, have, glued = [start], {dec.cells[start].cls}, []
    queue = [start]
    while queue and len(have) < nclass:
        t = queue.pop(0)
        for f in faces_of[t]:
            for u in by_face.get(f, []):
                if u != t and dec.cells[u].cls not in have:
                    chosen.append(u)
                    have.add(dec.cells[u].cls)
                    glued.append(f)
                    queue.append(u)
    if len(have) < nclass:
        raise TriangulationError("could not reach every top class through shared faces")
    class_cell = {dec.cells[t].cls: t for t in chosen}

    verts = sorted({v for t in chosen for v in dec.cells[t].vertices})
    loc = {v: i for i, v in enumerate(verts)}
    coords = dec.points[verts]

    boundary = sorted(
        ((t, f) for t in chosen for f in faces_of[t] if f not in glued),
        key=lambda tf: (dec.cells[tf[1]].dim, min(loc[v] for v in dec.cells[tf[1]].vertices), tf[1]),
    )
    face_tris: dict[int, list] = {}
    simplices: list = []
    simplex_ids: dict = {}
    pairings: list = []
    done = set()

    def add_simplices(tris):
        for s in tris:
            if s not in simplex_ids:
                simplex_ids[s] = len(simplices)
                simplices.append(s)

    for t, f in boundary:
        if f in done:
            continue
        others = [u for u in by_face.get(f, []) if u != t]
        if not others:
            raise TriangulationError(f"boundary face {f} has no neighbouring cell in the certified region")
        out = others[0]
        dest = class_cell[dec.cells[out].cls]
        word = reduce_word(dec.cells[dest].word + invert_word(dec.cells[out].word))
        g = rep.word_matrix(word)
        fv = list(dec.cells[f].vertices)
        img = (g @ dec.points[fv].T).T
        partner = None
        for f2 in faces_of[dest]:
            if f2 in glued:
                continue
            m = _match(img, dec.points[list(dec.cells[f2].vertices)])
            if m is not None:
                partner = (f2, {loc[a]: loc[dec.cells[f2].vertices[j]] for a, j in zip(fv, m)})
                break
        if partner is None:
            raise TriangulationError(f"pairing word {word!r} does not carry face {f} onto a boundary face")
        f2, vmap = partner
        local = tuple(loc[v] for v in fv)
        tris = fan_triangulation(coords[list(local)], local)
        image = transfer_triangulation(tris, vmap)
        if f2 == f and image != tris:
            raise TriangulationError(f"face class of {f} is paired to itself inconsistently with its triangulation")
        if f2 in face_tris and face_tris[f2] != image:
            raise TriangulationError(f"conflicting triangulations reach face {f2}")
        face_tris[f] = tris
        face_tris[f2] = image
        add_simplices(tris)
        add_simplices(image)
        for s in tris:
            pairings.append(FacePairing(simplex_ids[s], simplex_ids[tuple(sorted(vmap[v] for v in s))], word,
                                        {v: vmap[v] for v in s}))
        done.update((f, f2))

    unit = coords / np.linalg.norm(coords, axis=1, keepdims=True)
    psi0 = unit.mean(axis=0)
    psi0 /= np.linalg.norm(psi0)
    x0 = (coords / (coords @ psi0)[:, None]).mean(axis=0)
    return TriangulatedPolytope(
        dim=dec.dim,
        vertex_ids=verts,
        words=[dec.words[v] for v in verts],
        tags=[int(dec.cusp_of[v]) for v in verts],
        coords=coords.copy(),
        x0=x0,
        cells=[tuple(sorted(loc[v] for v in dec.cells[t].vertices)) for t in chosen],
        simplices=simplices,
        glued=[tuple(sorted(loc[v] for v in dec.cells[f].vertices)) for f in glued],
        pairings=pairings,
        cusp_names=[c.name for c in dec.cusps],
        cusp_points=np.array([c.lift for c in dec.cusps]),
    )


# ---------------------------------------------------------------------------
# deformation


def _cusp_words(rep: Representation, name: str) -> list:
    for c in rep.cusps:
        if c.name == name:
            return c.words
    raise ValueError(f"representation has no cusp named {name!r}")


def track_fixed_points(rep_t: Representation, base) -> dict:
    """Fixed point of each deformed cusp subgroup nearest the base one.

    Returns ``{cusp index: unit vector}`` oriented like the base lift.
    Raises :class:`HypothesisError` when a cusp subgroup has no isolated
    fixed point and :class:`AmbiguousTrackingError` when the nearest
    candidate is not at least twice as close as the next one.
    """
    if isinstance(base, CellDecomposition):
        names = [c.name for c in base.cusps]
        points = np.array([c.lift for c in base.cusps])
    else:
        names, points = base.cusp_names, base.cusp_points
    out = {}
    for i, (name, p0) in enumerate(zip(names, points)):
        mats = [rep_t.word_matrix(w) for w in _cusp_words(rep_t, name)]
        fps = [f for f in common_fixed_points(mats, rep_t.tol) if f.isolated]
        if not fps:
            raise HypothesisError(name, f"fixed-point hypothesis violated for cusp {name!r}: "
                                        "the deformed cusp subgroup has no isolated fixed point")
        dist = sorted((projective_distance(f.point.coords, p0), k) for k, f in enumerate(fps))
        if len(dist) > 1 and dist[1][0] <= 2 * dist[0][0]:
            raise AmbiguousTrackingError(name, f"ambiguous tracking for cusp {name!r}")
        v = fps[dist[0][1]].point.coords
        v = v / np.linalg.norm(v)
        if v @ p0 < 0:
            v = -v
        out[i] = v
    return out


@dataclass
class DeformationResult:
    polytope: TriangulatedPolytope
    radial_points: dict
    max_residual: float
    max_drift: float
    rep_distance: float | None
    valid: bool
    degenerate: list = field(default_factory=list)
    bad_words: list = field(default_factory=list)
    min_determinant: float = 0.0

    def to_json(self):
        return {
            "valid": self.valid,
            "max_pairing_residual": self.max_residual,
            "max_vertex_drift": self.max_drift,
            "rep_distance": self.rep_distance,
            "min_abs_determinant": self.min_determinant,
            "radial_points": {self.polytope.cusp_names[k]: v.tolist() for k, v in sorted(self.radial_points.items())},
            "degenerate_simplices": [list(s) for s in self.degenerate],
            "bad_words": list(self.bad_words),
            "polytope": self.polytope.to_json(),
        }


def deform(base: TriangulatedPolytope, rep_t: Representation, rep0: Representation | None = None,
           eps_geom: float | None = None) -> DeformationResult:
    """Move the polytope's vertices to the tracked fixed points of ``rep_t``."""
    eps = rep_t.tol.eps_geom if eps_geom is None else eps_geom
    fixed = track_fixed_points(rep_t, base)
    coords = np.array([rep_t.word_matrix(w) @ fixed[c] for w, c in zip(base.words, base.tags)])
    # keep each representative on the same side as its base vector
    flip = np.einsum("ij,ij->i", coords, base.coords) < 0
    coords[flip] *= -1

    res = 0.0
    bad = []
    for p in base.pairings:
        g = rep_t.word_matrix(p.word)
        worst = max(projective_distance(g @ coords[a], coords[b]) for a, b in p.vertex_map.items())
        res = max(res, worst)
        if worst >= eps and p.word not in bad:
            bad.append(p.word)

    d0 = base.cone_determinants()
    d1 = base.cone_determinants(coords)
    degenerate = [base.simplices[i] for i in range(len(d1))
                  if np.sign(d1[i]) != np.sign(d0[i]) or abs(d1[i]) <= eps]
    drift = max(projective_distance(a, b) for a, b in zip(base.coords, coords))
    poly = TriangulatedPolytope(
        base.dim, list(base.vertex_ids), list(base.words), list(base.tags), coords, base.x0.copy(),
        list(base.cells), list(base.simplices), list(base.glued), list(base.pairings), list(base.cusp_names),
        np.array([fixed[i] for i in range(len(base.cusp_names))]),
    )
    return DeformationResult(
        polytope=poly,
        radial_points=fixed,
        max_residual=float(res),
        max_drift=float(drift),
        rep_distance=None if rep0 is None else rep0.distance(rep_t),
        valid=not degenerate and res < eps,
        degenerate=degenerate,
        bad_words=bad,
        min_determinant=float(np.abs(d1).min()) if len(d1) else 0.0,
    )


def conjugation_matrix(x, s: float = 1.0) -> np.ndarray:
    """``exp(s X)`` via scipy."""
    from scipy.linalg import expm

    return expm(s * np.asarray(x, dtype=float))


@dataclass
class SweepResult:
    threshold: float
    samples: list
    monotone: bool


def validity_sweep(base: TriangulatedPolytope, path, s_max: float = 1.0, n_grid: int = 24,
                   rel_precision: float = 1e-3) -> SweepResult:
    """Largest parameter along ``path(s)`` up to which deform stays valid.

    The grid is geometric from ``s_max * 1e-6`` to ``s_max``; the first
    failure is refined by bisection.  ``monotone`` is False when a valid
    sample follows an invalid one.
    """

    def ok(s):
        try:
            return deform(base, path(s)).valid
        except (HypothesisError, np.linalg.LinAlgError, ValueError):
            return False

    grid = np.geomspace(s_max * 1e-6, s_max, n_grid)
    samples = [(float(s), ok(s)) for s in grid]
    flags = [v for _, v in samples]
    monotone = all(a or not b for a, b in zip(flags, flags[1:]))
    first_bad = next((i for i, v in enumerate(flags) if not v), None)
    if first_bad is None:
        return SweepResult(float(s_max), samples, monotone)
    if first_bad == 0:
        return SweepResult(0.0, samples, monotone)
    lo, hi = grid[first_bad - 1], grid[first_bad]
    while hi - lo > rel_precision * lo:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return SweepResult(float(lo), samples, monotone)
