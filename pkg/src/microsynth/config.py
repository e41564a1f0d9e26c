"""Central numerical tolerances.

Every module reads its defaults from :data:`TOL`; callers that need a
different setting pass explicit values instead of mutating the record.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # relative to the bounding-box diagonal of the geometry being merged
    merge_rel: float = 1e-9
    # relative residual accepted from collocation solves
    solve_residual: float = 1e-10
    # slack allowed when testing a parameter against a domain interval
    domain_eps: float = 1e-12
    # knot-span membership slack, relative to the span width
    span_rel: float = 1e-9
    # Jacobian sampling per direction per Bezier span
    jacobian_samples: int = 9
    # Gauss-Legendre points per direction per span for face areas
    area_order: int = 5
    # Gauss-Legendre points per direction for rational volume integrands
    rational_order: int = 12
    # evaluation chunk size (points) for vectorised kernels
    chunk: int = 20000


TOL = Tolerances()
