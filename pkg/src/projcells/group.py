"""Holonomy representations, word enumeration, orbits and cusp fixed points.

Words are strings over single-letter generator names; an uppercase letter
is the inverse of its lowercase generator.  A word evaluates left to right:
``"ab"`` is the matrix product ``a @ b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core import (
    DEFAULT_TOL,
    ProjPoint,
    ToleranceConfig,
    cartan_involution,
    lorentz_embedding,
    null_space,
    projective_distance,
    spectral,
    unit_determinant_lift,
)


def invert_letter(c: str) -> str:
    return c.lower() if c.isupper() else c.upper()


def invert_word(w: str) -> str:
    return "".join(invert_letter(c) for c in reversed(w))


def reduce_word(w: str) -> str:
    out: list[str] = []
    for c in w:
        if out and out[-1] == invert_letter(c):
            out.pop()
        else:
            out.append(c)
    return "".join(out)


@dataclass
class CuspSpec:
    name: str
    words: list
    expected_fixed_point: np.ndarray | None = None

    def to_json(self):
        out = {"name": self.name, "words": list(self.words)}
        if self.expected_fixed_point is not None:
            out["expected_fixed_point"] = [float(v) for v in self.expected_fixed_point]
        return out


@dataclass
class GroupElement:
    word: str
    matrix: np.ndarray

    def __len__(self):
        return len(self.word)


def _parse_entry(v):
    if isinstance(v, str):
        return complex(v.replace(" ", "").replace("i", "j"))
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValueError("complex entries must be [re, im] pairs")
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _parse_matrix(rows) -> np.ndarray:
    m = np.array([[_parse_entry(v) for v in row] for row in rows], dtype=complex)
    if np.abs(m.imag).max() == 0:
        return m.real.copy()
    return m


class Representation:
    """Generators, relators and cusp subgroups of a holonomy representation.

    Generators are rescaled to unit determinant on construction; elements
    with determinant -1 are kept and listed in ``orientation_reversing``.
    Relators must evaluate to plus or minus the identity.
    """

    def __init__(self, generators: dict, relators=(), cusps=(), tol: ToleranceConfig = DEFAULT_TOL):
        if not generators:
            raise ValueError("a representation needs at least one generator")
        self.tol = tol
        self.generators: dict[str, np.ndarray] = {}
        for name in sorted(generators):
            if len(name) != 1 or not name.islower():
                raise ValueError(f"generator names must be single lowercase letters, got {name!r}")
            g = np.asarray(generators[name], dtype=float)
            self.generators[name] = unit_determinant_lift(g, tol)
        dims = {g.shape[0] for g in self.generators.values()}
        if len(dims) != 1:
            raise ValueError("generators have inconsistent sizes")
        self.dim = dims.pop()
        self.letters: dict[str, np.ndarray] = {}
        for name, g in self.generators.items():
            self.letters[name] = g
            self.letters[name.upper()] = np.linalg.inv(g)
        self.alphabet = "".join(sorted(self.letters, key=lambda c: (c.lower(), c.isupper())))
        self.orientation_reversing = [n for n, g in self.generators.items() if np.linalg.det(g) < 0]
        self.relators = list(relators)
        self.cusps = [c if isinstance(c, CuspSpec) else CuspSpec(c["name"], list(c["words"])) for c in cusps]
        for w in self.relators:
            self._check_word(w)
            m = self.word_matrix(w)
            eye = np.eye(self.dim)
            scale = max(1.0, np.abs(m).max())
            err = min(np.abs(m - eye).max(), np.abs(m + eye).max())
            if err > 1e3 * tol.eps_equal * scale:
                raise ValueError(f"relator {w!r} does not evaluate to the identity (error {err:.3g})")
        for c in self.cusps:
            if not c.words:
                raise ValueError(f"cusp {c.name!r} has no generator words")
            for w in c.words:
                self._check_word(w)

    def _check_word(self, w: str):
        bad = [c for c in w if c not in self.letters]
        if bad:
            raise ValueError(f"word {w!r} uses unknown letters {bad}")

    def word_matrix(self, w: str) -> np.ndarray:
        m = np.eye(self.dim)
        for c in w:
            m = m @ self.letters[c]
        return m

    def element(self, w: str) -> GroupElement:
        self._check_word(w)
        return GroupElement(w, self.word_matrix(w))

    def conjugate(self, h) -> "Representation":
        """The representation ``g -> h g h^{-1}`` with the same words."""
        h = np.asarray(h, dtype=float)
        hi = np.linalg.inv(h)
        gens = {n: h @ g @ hi for n, g in self.generators.items()}
        cusps = [CuspSpec(c.name, list(c.words)) for c in self.cusps]
        return Representation(gens, self.relators, cusps, self.tol)

    def with_generators(self, gens: dict) -> "Representation":
        cusps = [CuspSpec(c.name, list(c.words)) for c in self.cusps]
        return Representation(gens, [], cusps, self.tol)

    def distance(self, other: "Representation") -> float:
        return max(float(np.abs(self.generators[n] - other.generators[n]).max()) for n in self.generators)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "generators": {n: g.tolist() for n, g in self.generators.items()},
            "relators": list(self.relators),
            "cusps": [c.to_json() for c in self.cusps],
        }

    @classmethod
    def from_json(cls, data: dict, tol: ToleranceConfig = DEFAULT_TOL) -> "Representation":
        if not isinstance(data, dict) or "generators" not in data:
            raise ValueError("representation JSON needs a 'generators' object")
        emb = data.get("embedding")
        gens = {}
        for name, rows in data["generators"].items():
            m = _parse_matrix(rows)
            if emb in ("sl2r", "sl2c"):
                m = lorentz_embedding(m, tol, hermitian=emb == "sl2c")
            elif emb is not None:
                raise ValueError(f"unknown embedding {emb!r}")
            elif np.iscomplexobj(m):
                raise ValueError(f"generator {name!r} has complex entries but no embedding")
            gens[name] = m
        cusps = []
        for c in data.get("cusps", []):
            efp = c.get("expected_fixed_point")
            cusps.append(CuspSpec(c["name"], list(c["words"]), None if efp is None else np.array(efp, float)))
        rep = cls(gens, data.get("relators", []), cusps, tol)
        if "dim" in data and int(data["dim"]) != rep.dim:
            raise ValueError(f"declared dim {data['dim']} does not match generator size {rep.dim}")
        return rep

    @classmethod
    def load(cls, path, tol: ToleranceConfig = DEFAULT_TOL) -> "Representation":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh), tol)


# ---------------------------------------------------------------------------
# tolerant dedup


class PointIndex:
    """Approximate set of vectors with tolerant membership.

    Vectors are bucketed by a fixed random projection ``w . x / max(1,|x|)``;
    lookups inspect the neighbouring buckets and compare in full with
    relative tolerance ``eps``.
    """

    def __init__(self, dim: int, eps: float = 1e-9, width: float = 1e-6, sign: bool = False, seed: int = 7):
        w = np.random.default_rng(seed).standard_normal(dim)
        self.w = w / np.linalg.norm(w)
        self.eps = eps
        self.width = max(width, 4 * eps)
        self.sign = sign
        self.buckets: dict[int, list[int]] = {}
        self.items: list[np.ndarray] = []

    def _key(self, x):
        return int(np.floor((self.w @ x) / max(1.0, float(np.linalg.norm(x))) / self.width))

    def _find_one(self, x):
        b = self._key(x)
        nx = float(np.linalg.norm(x))
        for k in (b - 1, b, b + 1):
            for i in self.buckets.get(k, ()):
                y = self.items[i]
                if np.linalg.norm(x - y) <= self.eps * max(1.0, nx):
                    return i
        return None

    def find(self, x) -> int | None:
        x = np.asarray(x, dtype=float).ravel()
        i = self._find_one(x)
        if i is None and self.sign:
            i = self._find_one(-x)
        return i

    def add(self, x) -> tuple[int, bool]:
        """Insert ``x`` unless present; returns (index, inserted)."""
        x = np.asarray(x, dtype=float).ravel()
        i = self.find(x)
        if i is not None:
            return i, False
        self.items.append(x)
        self.buckets.setdefault(self._key(x), []).append(len(self.items) - 1)
        return len(self.items) - 1, True

    def __len__(self):
        return len(self.items)


# ---------------------------------------------------------------------------
# enumeration


def enumerate_elements(
    rep: Representation,
    max_word_length: int,
    max_matrix_norm: float | None = None,
    identify_sign: bool = False,
    letters: str | None = None,
) -> list[GroupElement]:
    """Breadth-first ball of the Cayley graph, deduplicated by matrix.

    Elements are returned in discovery order, so each carries a shortest
    word among those explored.  ``letters`` restricts the alphabet (used
    for cusp subgroups, whose letters are words of ``rep``).
    """
    if max_word_length < 0:
        raise ValueError("max_word_length must be >= 0")
    alpha = rep.alphabet if letters is None else letters
    mats = {c: rep.letters[c] for c in alpha}
    index = PointIndex(rep.dim**2, rep.tol.eps_equal, sign=identify_sign)
    eye = np.eye(rep.dim)
    index.add(eye)
    out = [GroupElement("", eye)]
    frontier = [0]
    for _ in range(max_word_length):
        nxt = []
        for i in frontier:
            e = out[i]
            for c in alpha:
                if e.word and e.word[-1] == invert_letter(c):
                    continue
                m = e.matrix @ mats[c]
                if max_matrix_norm is not None and np.abs(m).max() > max_matrix_norm:
                    continue
                _, new = index.add(m)
                if new:
                    out.append(GroupElement(e.word + c, m))
                    nxt.append(len(out) - 1)
        frontier = nxt
    return out


def subgroup_elements(rep: Representation, words, max_word_length: int) -> list[GroupElement]:
    """Elements of the subgroup generated by ``words`` (words in rep's letters)."""
    gens = {}
    names = "abcdefghijklmnopqrstuvwxyz"
    for name, w in zip(names, words):
        gens[name] = rep.word_matrix(w)
    sub = Representation.__new__(Representation)
    sub.tol = rep.tol
    sub.dim = rep.dim
    sub.letters = {}
    for name, g in gens.items():
        sub.letters[name] = g
        sub.letters[name.upper()] = np.linalg.inv(g)
    sub.alphabet = "".join(sorted(sub.letters, key=lambda c: (c.lower(), c.isupper())))
    els = enumerate_elements(sub, max_word_length)
    table = dict(zip(names, words))
    for e in els:
        e.word = reduce_word("".join(table[c] if c.islower() else invert_word(table[c.lower()]) for c in e.word))
    return els


@dataclass
class Orbit:
    """Orbit points with words such that ``points[i] = word_matrix(words[i]) @ seed``."""

    seed: np.ndarray
    points: np.ndarray
    words: list
    layers: np.ndarray
    R_used: float = float("inf")
    pruned_min_norm: float = float("inf")

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)

    def within(self, radius: float) -> np.ndarray:
        return np.flatnonzero(self.norms < radius)


def orbit(p, elements, eps: float = DEFAULT_TOL.eps_equal) -> list[tuple[np.ndarray, str]]:
    """Apply each element to ``p`` and deduplicate, keeping the first word."""
    p = np.asarray(p, dtype=float)
    if np.linalg.norm(p) == 0:
        raise ValueError("orbit seed must be nonzero")
    index = PointIndex(p.size, eps)
    out = []
    for e in elements:
        x = e.matrix @ p
        _, new = index.add(x)
        if new:
            out.append((x, e.word))
    return out


def orbit_bfs(
    rep: Representation,
    p,
    max_word_length: int,
    max_norm: float | None = None,
    extra_layer: bool = True,
) -> Orbit:
    """Orbit of ``p`` by breadth-first search over points.

    The search expands points rather than group elements, so stabilizer
    words cost nothing.  A new point is ``letter @ x`` with word
    ``letter + word(x)``.  Points whose norm exceeds ``max_norm * |p|`` are
    pruned.  With ``extra_layer`` one more layer is explored without being
    stored; ``R_used`` is the smallest norm of a point not enumerated
    (from that layer or from pruning), which is the completeness radius
    used by the hull certificates.
    """
    p = np.asarray(p, dtype=float)
    scale = float(np.linalg.norm(p))
    if scale == 0:
        raise ValueError("orbit seed must be nonzero")
    bound = None if max_norm is None else max_norm * scale
    eps = rep.tol.eps_equal
    index = PointIndex(rep.dim, eps)
    index.add(p)
    pts = [p]
    words = [""]
    layers = [0]
    frontier = [0]
    alpha = rep.alphabet
    mats = np.stack([rep.letters[c] for c in alpha])
    pruned = float("inf")
    r_used = float("inf")
    for layer in range(1, max_word_length + 2):
        last = layer == max_word_length + 1
        if last and not extra_layer:
            break
        if not frontier:
            break
        fx = np.array([pts[i] for i in frontier])
        cand = np.einsum("lij,fj->fli", mats, fx)
        nrm = np.linalg.norm(cand, axis=2)
        nxt = []
        new_min = float("inf")
        for a, i in enumerate(frontier):
            w = words[i]
            for b, c in enumerate(alpha):
                if w and w[0] == invert_letter(c):
                    continue
                x = cand[a, b]
                if last:
                    if index.find(x) is None:
                        new_min = min(new_min, nrm[a, b])
                    continue
                if bound is not None and nrm[a, b] > bound:
                    if index.find(x) is None:
                        pruned = min(pruned, nrm[a, b])
                    continue
                _, new = index.add(x)
                if new:
                    pts.append(x)
                    words.append(c + w)
                    layers.append(layer)
                    nxt.append(len(pts) - 1)
        if last:
            r_used = min(new_min, pruned)
        frontier = nxt
    if not extra_layer:
        r_used = pruned
    return Orbit(p, np.array(pts), words, np.array(layers), float(r_used), float(pruned))


def min_pairwise_distance(points, radius: float | None = None) -> float:
    pts = np.asarray(points, dtype=float)
    if radius is not None:
        pts = pts[np.linalg.norm(pts, axis=1) < radius]
    if len(pts) < 2:
        return float("inf")
    d, _ = cKDTree(pts).query(pts, k=2)
    return float(d[:, 1].min())


# ---------------------------------------------------------------------------
# parabolics and fixed points


def is_parabolic(g, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """All eigenvalue moduli 1 (within eps_eig) and not semisimple."""
    eig = spectral(g, tol)
    if any(abs(e.modulus - 1.0) > tol.eps_eig for e in eig):
        return False
    return any(e.defective for e in eig)


def _rank(a: np.ndarray, atol: float) -> int:
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > atol))


def parabolic_fixed_point(g, tol: ToleranceConfig = DEFAULT_TOL) -> ProjPoint:
    """The fixed direction of a parabolic, inside its largest Jordan block.

    For the real modulus-1 eigenvalue whose Jordan blocks are largest (size
    k), the fixed direction spans the image of ``(g - lambda)^(k-1)`` on
    the generalized eigenspace.
    """
    g = np.asarray(g, dtype=float)
    if not is_parabolic(g, tol):
        raise ValueError("matrix is not parabolic")
    n = g.shape[0]
    gscale = max(1.0, np.abs(g).max())
    best = None
    for e in spectral(g, tol):
        if e.vectors is None or not e.defective:
            continue
        lam = e.eigenvalue.real
        a = g - lam * np.eye(n)
        m = e.algebraic
        powers = [np.eye(n)]
        for _ in range(m):
            powers.append(powers[-1] @ a)
        atol = lambda j: tol.eps_eig * gscale**j
        target = n - m
        k = next(j for j in range(1, m + 1) if _rank(powers[j], atol(j)) <= target)
        if best is None or k > best[0]:
            best = (k, lam, powers, m)
    k, lam, powers, m = best
    _, s, vh = np.linalg.svd(powers[m])
    gen = vh[int(np.sum(s > tol.eps_eig * gscale**m)) :].T
    img = powers[k - 1] @ gen
    u, _, _ = np.linalg.svd(img)
    v = u[:, 0]
    # polish: one step of inverse iteration toward the kernel of (g - lam)
    a = g - lam * np.eye(n)
    ns = null_space(a, 1e-9)
    if ns.shape[1] >= 1:
        proj = ns @ (ns.T @ v)
        if np.linalg.norm(proj) > 0.5:
            v = proj / np.linalg.norm(proj)
    return ProjPoint(v)


def _invariant_subspace(g: np.ndarray, s: np.ndarray, rtol: float) -> np.ndarray:
    """Largest g-invariant subspace contained in span(s) (orthonormal columns)."""
    while s.shape[1] > 0:
        resid = g @ s - s @ (s.T @ (g @ s))
        keep = null_space(resid, rtol) if resid.size else np.eye(s.shape[1])
        if keep.shape[1] == s.shape[1]:
            return s
        if keep.shape[1] == 0:
            return s[:, :0]
        s, _ = np.linalg.qr(s @ keep)
    return s


@dataclass
class FixedPoint:
    point: ProjPoint
    isolated: bool
    basis: np.ndarray = field(repr=False)

    @property
    def flag(self) -> str:
        return "isolated" if self.isolated else "non-isolated"


def common_fixed_points(mats, tol: ToleranceConfig = DEFAULT_TOL) -> list[FixedPoint]:
    """Common eigendirections of ``mats``.

    The search branches over real eigenspaces of each matrix restricted to
    the current subspace, after shrinking that subspace to its largest
    invariant part.  Leaves of dimension 1 are isolated fixed points; larger
    leaves are returned once (with their basis) and flagged non-isolated.
    """
    mats = [np.asarray(m, dtype=float) for m in mats]
    if not mats:
        raise ValueError("need at least one matrix")
    n = mats[0].shape[0]
    rtol = tol.eps_eig
    leaves = []

    def walk(s, i):
        if s.shape[1] == 0:
            return
        if i == len(mats):
            leaves.append(s)
            return
        g = mats[i]
        s = _invariant_subspace(g, s, rtol)
        if s.shape[1] == 0:
            return
        if s.shape[1] == 1:  # an invariant line is already a common eigenline
            walk(s, i + 1)
            return
        b = s.T @ g @ s
        for e in spectral(b, tol):
            if e.vectors is None:
                continue
            sub, _ = np.linalg.qr(s @ e.vectors)
            walk(sub, i + 1)

    walk(np.eye(n), 0)
    out: list[FixedPoint] = []
    for s in leaves:
        pt = ProjPoint(s[:, 0])
        if any(o.basis.shape[1] == s.shape[1] and o.point.isclose(pt, 1e-6) for o in out):
            continue
        out.append(FixedPoint(pt, s.shape[1] == 1, s))
    return out


# ---------------------------------------------------------------------------
# cusp validation


@dataclass
class CuspReport:
    name: str
    ok: bool
    fixed_point: ProjPoint | None
    phi: np.ndarray | None
    violations: list
    notes: list

    def to_json(self):
        return {
            "name": self.name,
            "ok": self.ok,
            "fixed_point": None if self.fixed_point is None else self.fixed_point.coords.tolist(),
            "phi": None if self.phi is None else self.phi.tolist(),
            "violations": list(self.violations),
            "notes": list(self.notes),
        }


def cusp_matrices(rep: Representation, cusp: CuspSpec) -> list:
    return [rep.word_matrix(w) for w in cusp.words]


def validate_cusp(rep: Representation, cusp: CuspSpec, cone=None, word_length: int = 2) -> CuspReport:
    """Check the cusp axioms that are computable.

    Violations are collected rather than raised: nontrivial cusp elements
    must be parabolic, the generators must share an isolated fixed point p,
    and the supporting functional at p must be fixed by the dual action
    with eigenvalue exactly 1.
    """
    if not cusp.words:
        raise ValueError(f"cusp {cusp.name!r} has no generator words")
    for w in cusp.words:
        rep._check_word(w)
    tol = rep.tol
    viol, notes = [], []
    mats = cusp_matrices(rep, cusp)
    eye = np.eye(rep.dim)
    for e in subgroup_elements(rep, cusp.words, word_length):
        if not e.word:
            continue
        scale = max(1.0, np.abs(e.matrix).max())
        if min(np.abs(e.matrix - eye).max(), np.abs(e.matrix + eye).max()) <= tol.eps_equal * scale:
            notes.append(f"cusp word {e.word!r} is trivial")
            continue
        if not is_parabolic(e.matrix, tol):
            viol.append(f"element {e.word!r} is not parabolic")
    fps = [f for f in common_fixed_points(mats, tol) if f.isolated]
    if not fps:
        viol.append("cusp generators have no common isolated fixed point")
        return CuspReport(cusp.name, False, None, None, viol, notes)
    p = fps[0].point
    if len(fps) > 1:
        notes.append(f"{len(fps)} common fixed points; using the first")
    cands = common_fixed_points([cartan_involution(m) for m in mats], tol)
    cands = [c for c in cands if abs(c.point.coords @ p.coords) <= 1e-6 * np.linalg.norm(p.coords)]
    phi = cands[0].point.coords / np.linalg.norm(cands[0].point.coords) if cands else None
    if phi is None:
        viol.append("no invariant supporting functional at the fixed point")
    if cone is not None:
        x = cone.orient(p.coords)
        if not cone.on_boundary(x, 1e3 * tol.eps_geom):
            viol.append("fixed point is not on the cone boundary")
        if phi is not None:
            if phi @ cone.interior_point() < 0:
                phi = -phi
            try:
                ref = cone.supporting_functional(x)
            except ValueError:
                ref = None  # polyhedral vertex: only the algebraic functional is available
            if ref is not None and projective_distance(ref, phi) > 1e-6:
                viol.append("invariant functional is not the cone's supporting functional")
    if phi is not None:
        for w, m in zip(cusp.words, mats):
            img = np.linalg.solve(m.T, phi)
            if projective_distance(img, phi) > 1e3 * tol.eps_equal:
                viol.append(f"generator {w!r} does not preserve the supporting hyperplane")
            elif np.linalg.norm(img - phi) > 1e3 * tol.eps_equal:
                viol.append(f"generator {w!r} rescales the supporting functional")
            v = m @ p.coords
            if np.linalg.norm(v - p.coords) > 1e3 * tol.eps_equal * max(1.0, np.abs(m).max()):
                viol.append(f"generator {w!r} does not fix the lift of p as a vector")
    if rep.orientation_reversing:
        notes.append("orientation-reversing generators: " + ",".join(rep.orientation_reversing))
    return CuspReport(cusp.name, not viol, p, phi, viol, notes)


def accumulation_ratio(rep: Representation, x, max_word_length: int, max_norm: float = 1e6) -> float:
    """Smallest orbit norm divided by |x|; small values mean 0 is approached."""
    orb = orbit_bfs(rep, x, max_word_length, max_norm=max_norm, extra_layer=False)
    return float(orb.norms.min() / np.linalg.norm(x))
