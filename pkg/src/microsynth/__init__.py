"""Volumetric-spline micro-structure synthesis by exact functional composition.

Set ``MICROSYNTH_THREADS`` to cap the BLAS/OpenMP thread pools; it must be
set before the first import of this package.
"""

import os as _os

_threads = _os.environ.get("MICROSYNTH_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .composition import compose, compose_many  # noqa: E402
from .errors import (  # noqa: E402
    ArgumentError,
    CompositionError,
    ConfigError,
    DomainError,
    GeometryError,
    MicrosynthError,
    NumericalError,
    ParameterValidationError,
)
from .heat_exchanger import build_hx, respace, sew  # noqa: E402
from .rocket import assign_ar, simulate_burn, volume_of_revolution  # noqa: E402
from .spline import KnotVector, SplineMap, evaluate, extract_face, jacobian, subdivide  # noqa: E402
from .synthesis import MicroStructure, optimize, synthesize, synthesize_graded  # noqa: E402
from .tiles import FAMILIES, MicroTile, instantiate, make_params  # noqa: E402
from .validation import check_c0, check_jacobian, surface_area, volume  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "CompositionError", "ConfigError", "DomainError", "GeometryError",
    "MicrosynthError", "NumericalError", "ParameterValidationError",
    "KnotVector", "SplineMap", "evaluate", "jacobian", "subdivide", "extract_face",
    "compose", "compose_many", "FAMILIES", "MicroTile", "instantiate", "make_params",
    "MicroStructure", "synthesize", "synthesize_graded", "optimize",
    "respace", "sew", "build_hx", "volume_of_revolution", "assign_ar", "simulate_burn",
    "check_c0", "check_jacobian", "volume", "surface_area",
]
