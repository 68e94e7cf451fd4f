"""Canonical cell decompositions of cusped convex projective manifolds."""

from importlib import resources

from .core import DEFAULT_TOL, ProjPoint, ToleranceConfig, projective_distance
from .decomp import CellDecomposition, epstein_penner
from .deform import deform, triangulate_base, validity_sweep
from .domain import LorentzCone, OrthantCone, PolyhedralCone, cone_from_json, vinberg_lift
from .group import Representation, orbit_bfs, validate_cusp
from .hull import incremental_hull

__all__ = [
    "DEFAULT_TOL", "ProjPoint", "ToleranceConfig", "projective_distance",
    "CellDecomposition", "epstein_penner",
    "deform", "triangulate_base", "validity_sweep",
    "LorentzCone", "OrthantCone", "PolyhedralCone", "cone_from_json", "vinberg_lift",
    "Representation", "orbit_bfs", "validate_cusp",
    "incremental_hull", "load_example",
]
__version__ = "0.1.0"


def load_example(name: str) -> Representation:
    """Load a bundled representation ("modular_torus" or "figure_eight")."""
    path = resources.files(__name__) / "data" / f"{name}.json"
    return Representation.load(str(path))
