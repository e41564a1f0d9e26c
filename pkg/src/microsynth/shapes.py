"""Built-in macro maps used by the pipelines, scripts and configs."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ArgumentError
from .spline import KnotVector, SplineMap, grid_points, identity_map, interpolate_tensor


def from_function(fn: Callable[[np.ndarray], np.ndarray], degrees, spans=(1, 1, 1),
                  domain=((0.0, 1.0),) * 3) -> SplineMap:
    """Interpolate a vector function at Greville points (exact for polynomials in the space)."""
    knots = [KnotVector.uniform(p, s, lo, hi) for p, s, (lo, hi) in zip(degrees, spans, domain)]
    axes = [kv.greville() for kv in knots]
    vals = np.asarray(fn(grid_points(*axes)), dtype=float)
    return interpolate_tensor(vals.reshape(tuple(a.size for a in axes) + (-1,)), degrees, knots, axes)


def bent_block(bend: float = 0.35, twist: float = 0.0, spans=(1, 1, 1)) -> SplineMap:
    """Unit block bent upward along x (quadratic in x), optionally sheared in y."""

    def fn(p):
        x, y, z = p.T
        return np.stack([x, y + twist * x * z, z + bend * 4.0 * x * (1.0 - x)], axis=-1)

    return from_function(fn, (2, 1, 1), spans)


def curved_duct(bend: float = 0.3, taper: float = 0.2, spans=(4, 4, 4)) -> SplineMap:
    """Duct ``X = (1 + taper z) x, Y = y + bend z^2, Z = 2 z``; degrees (1, 1, 2)."""

    def fn(p):
        x, y, z = p.T
        return np.stack([(1.0 + taper * z) * x, y + bend * z**2, 2.0 * z], axis=-1)

    return from_function(fn, (1, 1, 2), spans)


def wing(span: float = 8.0, root_chord: float = 1.5, tip_chord: float = 0.75, sweep: float = 0.6,
         root_thickness: float = 0.3, tip_thickness: float = 0.15) -> SplineMap:
    """Trilinear tapered, swept wing box: x chordwise, y spanwise, z through thickness."""

    def fn(p):
        x, y, z = p.T
        chord = root_chord + (tip_chord - root_chord) * y
        thick = root_thickness + (tip_thickness - root_thickness) * y
        return np.stack([sweep * y + chord * x, span * y, thick * (z - 0.5)], axis=-1)

    return from_function(fn, (1, 1, 1))


def scaled_identity(scale=(1.0, 1.0, 1.0)) -> SplineMap:
    m = identity_map()
    return SplineMap(m.knots, m.control * np.asarray(scale, dtype=float))


MACROS = {
    "identity": lambda **kw: identity_map(**kw),
    "bent_block": bent_block,
    "curved_duct": curved_duct,
    "wing": wing,
    "scaled": lambda scale=(1.0, 1.0, 1.0): scaled_identity(scale),
}


# Wall-thickness fields for the four porous wing designs: y runs root (0) to
# tip (1), z through the thickness with the skin at z = 0 and z = 1.

def _hat(centre: float, half_width: float, depth: float):
    def fn(p):
        return depth * np.clip(1.0 - np.abs(p[:, 1] - centre) / half_width, 0.0, None)

    return fn


def wing_thickness_field(case: str) -> SplineMap:
    """Shelled-box ``wall`` field for wing design ``case`` in {a, b, c, d}.

    a: linear from thick at the root to thin at the tip;
    b: as a, with thicker interior tiles and thinner skin tiles;
    c: constant, except a thinned section two thirds from the root;
    d: as b, without the root-to-tip reduction.
    """
    from .fields import field_from_function, linear_field

    core = lambda p: 4.0 * p[:, 2] * (1.0 - p[:, 2])  # 0 at the skin, 1 mid-thickness
    if case == "a":
        return linear_field(0.2, (0.0, -0.15, 0.0))
    if case == "b":
        return field_from_function(lambda p: 0.2 - 0.15 * p[:, 1] + 0.25 * core(p), degrees=(1, 1, 2))
    if case == "c":
        dip = _hat(2.0 / 3.0, 1.0 / 6.0, 0.1)
        return field_from_function(lambda p: 0.17 - dip(p), degrees=(1, 1, 1), spans=(1, 6, 1))
    if case == "d":
        return field_from_function(lambda p: 0.08 + 0.25 * core(p), degrees=(1, 1, 2))
    raise ArgumentError(f"unknown wing case {case!r} (expected a, b, c or d)")
