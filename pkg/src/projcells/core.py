"""Projective linear algebra over R^{n+1}.

Matrices are plain ``numpy`` arrays; covectors are 1-d arrays paired with
vectors by the dot product.  The only wrapper type is :class:`ProjPoint`,
which fixes a canonical representative of a line through the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MACHINE_EPS = np.finfo(float).eps


class NotInvertibleError(ValueError):
    """Raised when an operation needs an invertible matrix."""


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical tolerances shared by every module.

    ``eps_equal`` decides identity of matrices and points, ``eps_geom``
    coplanarity and containment, ``eps_eig`` eigenvalue moduli and ranks.
    All are relative to the magnitude of the data they are compared with.
    """

    eps_equal: float = 1e-9
    eps_geom: float = 1e-7
    eps_eig: float = 1e-6

    def __post_init__(self):
        for name in ("eps_equal", "eps_geom", "eps_eig"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.eps_equal > self.eps_geom:
            raise ValueError("eps_equal must not exceed eps_geom")


DEFAULT_TOL = ToleranceConfig()


def as_square(g) -> np.ndarray:
    """Validate and return ``g`` as a float (or complex) square array."""
    a = np.asarray(g)
    if a.dtype.kind not in "fc":
        a = a.astype(float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
        raise ValueError(f"expected a square matrix of size >= 2, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def _check_invertible(g: np.ndarray, tol: ToleranceConfig) -> float:
    # reciprocal condition number: scale invariant, unlike a bare determinant test
    sv = np.linalg.svd(g, compute_uv=False)
    if not np.all(np.isfinite(sv)) or sv[-1] <= tol.eps_equal * sv[0]:
        raise NotInvertibleError("matrix is not invertible")
    return np.linalg.det(g)


def safe_inverse(g, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    g = as_square(g)
    _check_invertible(g, tol)
    return np.linalg.inv(g)


# ---------------------------------------------------------------------------
# projective points


class ProjPoint:
    """A point of RP^n stored by its canonical representative.

    The representative is scaled so that its largest coordinate in absolute
    value is 1, then the sign is fixed so the first non-negligible
    coordinate is positive.  Equality is tolerant (``eps_equal``), so the
    class is deliberately unhashable.
    """

    __slots__ = ("coords",)

    def __init__(self, vec, tol: float = 1e-12):
        v = np.asarray(vec, dtype=float).ravel()
        if v.size < 2 or not np.all(np.isfinite(v)):
            raise ValueError("projective point needs a finite vector of length >= 2")
        big = np.abs(v).max()
        if big == 0:
            raise ValueError("the zero vector has no projective class")
        v = v / v[np.argmax(np.abs(v))]
        nz = np.flatnonzero(np.abs(v) > tol)
        if v[nz[0]] < 0:
            v = -v
        v.setflags(write=False)
        self.coords = v

    __hash__ = None

    @property
    def dim(self) -> int:
        return self.coords.size

    def distance(self, other) -> float:
        return projective_distance(self.coords, _coords(other))

    def isclose(self, other, tol: float = DEFAULT_TOL.eps_equal) -> bool:
        return self.distance(other) <= tol

    def __eq__(self, other):
        if not isinstance(other, ProjPoint):
            return NotImplemented
        return self.dim == other.dim and self.isclose(other)

    def __repr__(self):
        inner = ":".join(f"{c:.6g}" for c in self.coords)
        return f"ProjPoint[{inner}]"


def _coords(p) -> np.ndarray:
    return p.coords if isinstance(p, ProjPoint) else np.asarray(p, dtype=float)


def projective_distance(u, v) -> float:
    """Angle in [0, pi/2] between the lines spanned by ``u`` and ``v``."""
    a = np.asarray(_coords(u), dtype=float)
    b = np.asarray(_coords(v), dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    d = min(np.linalg.norm(a - b), np.linalg.norm(a + b))
    return float(2.0 * np.arcsin(min(1.0, d / 2.0)))


# ---------------------------------------------------------------------------
# duality


def normalize_functional(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    n = np.linalg.norm(phi)
    if n == 0:
        raise ValueError("functional must be nonzero")
    return phi / n


def dual_action(g, phi, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Return the covector ``phi o g^{-1}`` (no renormalization)."""
    g = as_square(g)
    _check_invertible(g, tol)
    phi = np.asarray(phi, dtype=float)
    # phi o g^{-1} as a row vector is phi @ g^{-1}; solve g^T y = phi instead of inverting
    return np.linalg.solve(g.T, phi)


def cartan_involution(g, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Inverse transpose; realizes the dual action on covectors."""
    return safe_inverse(g, tol).T


def unit_determinant_lift(g, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Rescale ``g`` so that ``|det| = 1``; the sign of the determinant is kept."""
    g = as_square(g)
    det = _check_invertible(g, tol)
    if abs(abs(det) - 1.0) <= 8 * g.shape[0] * _MACHINE_EPS:
        return g.copy()  # already unimodular; rescaling would only add roundoff
    return g / abs(det) ** (1.0 / g.shape[0])


# ---------------------------------------------------------------------------
# spectral data


@dataclass
class Eigenspace:
    eigenvalue: complex
    algebraic: int
    geometric: int
    vectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def modulus(self) -> float:
        return abs(self.eigenvalue)

    @property
    def is_real(self) -> bool:
        return self.vectors is not None

    @property
    def defective(self) -> bool:
        return self.geometric < self.algebraic


def cluster_tolerance(g: np.ndarray, tol: ToleranceConfig) -> float:
    # a Jordan block of size k splits under roundoff by ~ (eps*|g|*cond)^(1/k);
    # the eigenbasis condition of a large unipotent grows like |g|
    k = g.shape[0]
    norm = max(1.0, float(np.linalg.norm(g)))
    return max(tol.eps_eig, 10.0 * (_MACHINE_EPS * norm**2) ** (1.0 / k))


def null_space(a: np.ndarray, rtol: float) -> np.ndarray:
    """Orthonormal basis (as columns) of the numerical kernel of ``a``."""
    a = np.atleast_2d(a)
    _, s, vh = np.linalg.svd(a)
    scale = max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > rtol * scale))
    return vh[rank:].conj().T


def matrix_rank(a: np.ndarray, rtol: float) -> int:
    s = np.linalg.svd(np.atleast_2d(a), compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > rtol * max(1.0, s[0])))


def spectral(g, tol: ToleranceConfig = DEFAULT_TOL) -> list[Eigenspace]:
    """Eigenvalues of ``g`` with algebraic and geometric multiplicities.

    Eigenvalues that roundoff splits apart are clustered (see
    :func:`cluster_tolerance`) and replaced by the cluster mean, which is
    accurate even for defective clusters.  Geometric multiplicity is the
    numerical nullity of ``g - lambda I`` at relative tolerance ``eps_eig``.
    Real eigenvalues come with an orthonormal basis of real eigenvectors.
    The list is sorted by modulus, largest first.
    """
    g = as_square(g)
    n = g.shape[0]
    lam = np.linalg.eigvals(g)
    ctol = cluster_tolerance(g, tol)

    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(lam[i] - lam[j]) <= ctol * max(1.0, abs(lam[i])):
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    out = []
    norm = max(1.0, np.abs(g).max())
    for members in groups.values():
        mean = complex(np.mean(lam[members]))
        if abs(mean.imag) <= ctol * max(1.0, abs(mean)):
            mean = complex(mean.real, 0.0)
            shifted = g.real - mean.real * np.eye(n)
            basis = null_space(shifted, tol.eps_eig * norm / max(1.0, np.abs(shifted).max()))
            geo = basis.shape[1]
            vectors = basis
        else:
            shifted = g.astype(complex) - mean * np.eye(n)
            geo = n - matrix_rank(shifted, tol.eps_eig * norm / max(1.0, np.abs(shifted).max()))
            vectors = None
        geo = max(1, min(geo, len(members)))
        out.append(Eigenspace(mean, len(members), geo, vectors))
    out.sort(key=lambda e: (-abs(e.eigenvalue), -e.eigenvalue.real, -e.eigenvalue.imag))
    return out


# ---------------------------------------------------------------------------
# Lorentz models used to build example holonomies


def lorentz_gram(dim: int) -> np.ndarray:
    """Gram matrix of ``x_last^2 - sum(x_i^2)``, positive on the future cone."""
    q = -np.eye(dim)
    q[-1, -1] = 1.0
    return q


_SYM_BASIS = (
    np.array([[1.0, 0.0], [0.0, -1.0]]),
    np.array([[0.0, 1.0], [1.0, 0.0]]),
    np.eye(2),
)
_HERM_BASIS = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, 1j], [-1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
    np.eye(2, dtype=complex),
)


def sym_to_vector(x: np.ndarray) -> np.ndarray:
    """Coordinates (x, y, t) of ``[[t+x, y], [y, t-x]]``."""
    return np.array([(x[0, 0] - x[1, 1]) / 2, x[0, 1], (x[0, 0] + x[1, 1]) / 2]).real


def herm_to_vector(x: np.ndarray) -> np.ndarray:
    """Coordinates (x, y, z, t) of ``[[t+z, x+iy], [x-iy, t-z]]``."""
    return np.array(
        [x[0, 1].real, x[0, 1].imag, (x[0, 0] - x[1, 1]).real / 2, (x[0, 0] + x[1, 1]).real / 2]
    )


def lorentz_embedding(g, tol: ToleranceConfig = DEFAULT_TOL, hermitian: bool | None = None) -> np.ndarray:
    """Image of a 2x2 matrix under SL(2,R) -> SO(2,1) or SL(2,C) -> SO(3,1).

    A real ``g`` acts on symmetric matrices by ``X -> g X g^T``; a complex
    one acts on Hermitian matrices by ``X -> g X g^*``.  ``hermitian``
    forces the choice (a real matrix may be read as an element of SL(2,C)).  In both cases the
    determinant of ``X`` is the Lorentz form ``t^2 - |space|^2`` in the
    coordinates of :func:`sym_to_vector` / :func:`herm_to_vector`.
    """
    g = np.asarray(g)
    if g.shape != (2, 2):
        raise ValueError("lorentz_embedding expects a 2x2 matrix")
    if abs(abs(np.linalg.det(g)) - 1.0) > tol.eps_equal * max(1.0, np.abs(g).max() ** 2):
        raise ValueError("lorentz_embedding needs |det g| = 1")
    if hermitian is None:
        hermitian = bool(np.iscomplexobj(g) and np.abs(g.imag).max() > 0)
    if hermitian:
        g = g.astype(complex)
        cols = [herm_to_vector(g @ b @ g.conj().T) for b in _HERM_BASIS]
    else:
        g = g.real.astype(float)
        cols = [sym_to_vector(g @ b @ g.T) for b in _SYM_BASIS]
    return np.column_stack(cols)


def random_special_linear(dim: int, rng: np.random.Generator, spread: float = 1.0) -> np.ndarray:
    """A random element of SL(dim, R); used by tests and sweeps."""
    while True:
        a = np.eye(dim) + spread * rng.standard_normal((dim, dim))
        det = np.linalg.det(a)
        if abs(det) > 1e-3:
            break
    if det < 0:
        a[0] = -a[0]
    return unit_determinant_lift(a)
