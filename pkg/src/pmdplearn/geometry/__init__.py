from .lp import LPResult, lp_solve
from .polytope import TOL, EmptyRegion, Polytope
from .region import build_region, obbt
from .vertices import VertexEnumerationUnavailable, enumerate_vertices

__all__ = [
    "TOL",
    "EmptyRegion",
    "LPResult",
    "Polytope",
    "VertexEnumerationUnavailable",
    "build_region",
    "enumerate_vertices",
    "lp_solve",
    "obbt",
]
