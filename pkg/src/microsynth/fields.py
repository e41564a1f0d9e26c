"""Scalar fields over a macro domain, stored as single-channel trivariates."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ArgumentError
from .spline import KnotVector, SplineMap, grid_points, interpolate_tensor

UNIT = ((0.0, 1.0),) * 3


def constant_field(value: float, domain=UNIT) -> SplineMap:
    knots = tuple(KnotVector.uniform(0, 1, lo, hi) for lo, hi in domain)
    return SplineMap(knots, np.full((1, 1, 1, 1), float(value)))


def field_from_function(fn: Callable[[np.ndarray], np.ndarray], domain=UNIT, degrees=(3, 3, 3),
                        spans=(1, 1, 1)) -> SplineMap:
    """Interpolate ``fn`` (``(n, 3) -> (n,)``) at the Greville points of a spline space.

    Exact whenever ``fn`` is a polynomial within the chosen degrees.
    """
    knots = [KnotVector.uniform(p, s, lo, hi) for p, s, (lo, hi) in zip(degrees, spans, domain)]
    axes = [kv.greville() if kv.degree > 0 else np.array([0.5 * sum(kv.domain)]) for kv in knots]
    values = np.asarray(fn(grid_points(*axes)), dtype=float).reshape(tuple(a.size for a in axes))
    if not np.all(np.isfinite(values)):
        raise ArgumentError("field function returned non-finite values")
    return interpolate_tensor(values[..., None], degrees, knots, axes)


def linear_field(origin_value: float, gradient, domain=UNIT) -> SplineMap:
    """``f(p) = origin_value + gradient . (p - domain_lo)``."""
    lo = np.array([d[0] for d in domain], dtype=float)
    g = np.asarray(gradient, dtype=float)
    return field_from_function(lambda p: origin_value + (p - lo) @ g, domain, (1, 1, 1))
