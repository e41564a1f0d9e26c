"""Layered solid-rocket grain with accelerant/retardant factors.

The grain volume, parametrised by (u, v, w), burns inside out along w.  It
is cut into ``n_layers`` layers at uniform w, each layer into ``n_u x n_v``
tiles.  For every tile the burn-front area (area of its w_min face) and the
depth (mean physical length of its w-curves) are integrated; the factor of
each tile is then

    factor = thrust_ratio * depth / mean_depth,
    thrust_ratio = profile((k + 1) / n_layers) / sum(area * depth),

with mean_depth the arithmetic mean tile depth of layer k (counted from 0)
and the profile sampled at the end of the layer's burn interval.  All tiles
of a layer then burn out together, and ``simulate_burn`` replays the burn
as a check.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config import TOL
from .errors import ArgumentError, GeometryError
from .spline import KnotVector, SplineMap, split_many, with_channels
from .validation import _geometry_partials, gauss_nodes, quad_orders

log = logging.getLogger(__name__)

CIRCLE_KNOTS = KnotVector(np.array([0, 0, 0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1, 1, 1], dtype=float), 2)
_S = math.sqrt(0.5)
# clockwise seen from +z, so (axial u, angle v, radial w) is right-handed
CIRCLE_XY = np.array([(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0)], dtype=float)
CIRCLE_W = np.array([1, _S, 1, _S, 1, _S, 1, _S, 1], dtype=float)


# ---------------------------------------------------------------- profile


@dataclass(frozen=True)
class ThrustProfile:
    """Positive relative thrust over normalised time t in [0, 1].

    Built from a callable or from a sample table (linear interpolation).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "profile"

    @classmethod
    def from_samples(cls, t, values, name: str = "table") -> "ThrustProfile":
        t = np.asarray(t, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2 or np.any(np.diff(t) <= 0):
            raise ArgumentError("profile table needs strictly increasing times and matching values")
        if t[0] > 0 or t[-1] < 1:
            raise ArgumentError("profile table must cover [0, 1]")
        if np.any(~(v > 0)):
            raise ArgumentError("profile values must be positive")
        return cls(lambda x: np.interp(x, t, v), name)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < -TOL.domain_eps) or np.any(t > 1 + TOL.domain_eps):
            raise ArgumentError("profile is defined on [0, 1]")
        out = np.asarray(self.fn(np.clip(t, 0.0, 1.0)), dtype=float)
        if np.any(~(out > 0)):
            raise ArgumentError(f"profile {self.name!r} must be strictly positive")
        return out


def decaying_profile(high: float = 3.0, low: float = 1.0, rate: float = 3.0) -> ThrustProfile:
    """``low + (high - low) exp(-rate t)``: high initial thrust decaying smoothly."""
    return ThrustProfile(lambda t: low + (high - low) * np.exp(-rate * t), f"decay({high:g},{low:g},{rate:g})")


# -------------------------------------------------------- volume of revolution


def volume_of_revolution(section: SplineMap) -> SplineMap:
    """Rotate a planar section, parametrised by (u, w), about the z axis; v is the angle direction.

    The section gives ``(r, z)`` in its first two channels, or ``(x, y, z)`` with
    ``y = 0`` (x is then the radius).  The result is an exact rational
    trivariate in (u, v, w) with a nine-point circle in v.
    """
    if section.domain_dim != 2:
        raise ArgumentError("the section must be a bivariate map of (u, w)")
    c = section.control
    if section.range_dim == 2:
        r, z = c[..., 0], c[..., 1]
    elif section.range_dim >= 3:
        scale = max(1.0, float(np.abs(c[..., :3]).max()))
        if np.abs(c[..., 1]).max() > TOL.merge_rel * scale:
            raise GeometryError("section must lie in the x-z plane (y = 0)")
        r, z = c[..., 0], c[..., 2]
    else:
        raise ArgumentError("section needs at least two channels")
    scale = max(1.0, float(np.abs(r).max()))
    if r.min() < -TOL.merge_rel * scale:
        raise GeometryError(f"section crosses the rotation axis (control radius {r.min():.6g} < 0)")
    ws = np.ones(r.shape) if section.weights is None else section.weights
    nu, nw = r.shape
    ctrl = np.empty((nu, 9, nw, 3))
    ctrl[..., 0] = r[:, None, :] * CIRCLE_XY[None, :, 0, None]
    ctrl[..., 1] = r[:, None, :] * CIRCLE_XY[None, :, 1, None]
    ctrl[..., 2] = z[:, None, :]
    weights = ws[:, None, :] * CIRCLE_W[None, :, None]
    return SplineMap((section.knots[0], CIRCLE_KNOTS, section.knots[1]), ctrl, weights)


def annulus_section(r_in: float = 1.0, r_out: float = 2.0, height: float = 1.0) -> SplineMap:
    """Rectangle section: u runs along the axis, w radially outward."""
    lin = KnotVector.uniform(1)
    ctrl = np.array([[[r_in, 0.0], [r_out, 0.0]], [[r_in, height], [r_out, height]]])
    return SplineMap((lin, lin), ctrl)


# ----------------------------------------------------------------- layers


def partition_layers(revolved: SplineMap, n: int) -> list[SplineMap]:
    """Split the grain at the ``n - 1`` uniform parameter values of w."""
    if n < 1:
        raise ArgumentError("n must be >= 1")
    lo, hi = revolved.knots[2].domain
    return split_many(revolved, 2, [lo + (hi - lo) * k / n for k in range(1, n)])


def layer_tiles(layer: SplineMap, n_u: int, n_v: int) -> list[list[SplineMap]]:
    """``n_u x n_v`` tiles of a layer, indexed ``[i][j]``."""
    if n_u < 1 or n_v < 1:
        raise ArgumentError("tile counts must be >= 1")
    lo, hi = layer.knots[0].domain
    rows = split_many(layer, 0, [lo + (hi - lo) * i / n_u for i in range(1, n_u)])
    out = []
    for row in rows:
        a, b = row.knots[1].domain
        out.append(split_many(row, 1, [a + (b - a) * j / n_v for j in range(1, n_v)]))
    return out


# ------------------------------------------------------------ tile metrics


@dataclass(frozen=True, eq=False)
class TileBatch:
    """Tiles grouped by knot structure on a shared unit domain.

    Integrals do not depend on the parametrisation, so relabelling every
    tile's domain to the unit cube lets tiles with the same knot pattern
    share quadrature nodes and run as one array computation.
    """

    size: int
    groups: tuple[tuple[tuple[KnotVector, ...], np.ndarray, np.ndarray, np.ndarray | None], ...]

    @classmethod
    def of(cls, tiles: Sequence[SplineMap]) -> "TileBatch":
        keyed: dict = {}
        for i, t in enumerate(tiles):
            key = (tuple((kv.degree, _unit_values(kv).tobytes()) for kv in t.knots), t.is_rational)
            keyed.setdefault(key, []).append(i)
        groups = []
        for idx in keyed.values():
            first = tiles[idx[0]]
            knots = tuple(KnotVector(_unit_values(kv), kv.degree) for kv in first.knots)
            ctrl = np.stack([tiles[i].control for i in idx])
            wts = np.stack([tiles[i].weights for i in idx]) if first.is_rational else None
            groups.append((knots, np.array(idx), ctrl, wts))
        return cls(len(tiles), tuple(groups))


def _unit_values(kv: KnotVector) -> np.ndarray:
    lo, hi = kv.domain
    return (kv.values - lo) / (hi - lo)


def _orders(knots, wts, order: int | None) -> list[int]:
    if order:
        return [int(order)] * len(knots)
    return quad_orders(knots, wts, lambda p: max(TOL.area_order, p + 1))


def _as_batch(tiles) -> TileBatch:
    return tiles if isinstance(tiles, TileBatch) else TileBatch.of(tiles)


def iso_w_areas(tiles, s: float = 0.0, order: int | None = None) -> np.ndarray:
    """Area of the w-isosurface at fraction ``s`` of each tile's w range (0 is the w_min face)."""
    batch = _as_batch(tiles)
    out = np.zeros(batch.size)
    for knots, idx, ctrl, wts in batch.groups:
        nu, nv, _ = _orders(knots, wts, order)
        (tu, wu), (tv, wv) = gauss_nodes(knots[0], nu), gauss_nodes(knots[1], nv)
        du, dv, _ = _geometry_partials(knots, ctrl, wts, [tu, tv, np.array([float(s)])])
        jac = np.linalg.norm(np.cross(du[..., 0, :], dv[..., 0, :]), axis=-1)
        out[idx] = np.einsum("bij,i,j->b", jac, wu, wv)
    return out


def tile_front_area(tile: SplineMap, order: int | None = None) -> float:
    """Area of the w_min face (the burn front when the tile ignites)."""
    area = float(iso_w_areas([tile], 0.0, order)[0])
    if area <= 0.0:
        log.warning("degenerate burn front (zero area)")
        return 0.0
    return area


def tile_depths(tiles, order: int | None = None) -> np.ndarray:
    """Mean physical length of the w-curves over a (u, v) quadrature grid."""
    batch = _as_batch(tiles)
    out = np.zeros(batch.size)
    for knots, idx, ctrl, wts in batch.groups:
        (tu, wu), (tv, wv), (tw, ww) = (gauss_nodes(kv, n) for kv, n in zip(knots, _orders(knots, wts, order)))
        _, _, dw = _geometry_partials(knots, ctrl, wts, [tu, tv, tw])
        length = np.einsum("buvw,w->buv", np.linalg.norm(dw, axis=-1), ww)
        out[idx] = np.einsum("buv,u,v->b", length, wu, wv) / (wu.sum() * wv.sum())
    return out


def tile_depth(tile: SplineMap, order: int | None = None) -> float:
    return float(tile_depths([tile], order)[0])


# ------------------------------------------------------------- assignment


@dataclass(frozen=True)
class TileRecord:
    index: tuple[int, int, int]
    map: SplineMap
    area: float
    depth: float
    thrust: float
    ar: float


@dataclass(frozen=True)
class LayerRecord:
    k: int
    total_thrust: float
    mean_depth: float
    thrust_ratio: float


@dataclass
class GrainModel:
    n_layers: int
    n_u: int
    n_v: int
    profile: ThrustProfile
    tiles: dict[tuple[int, int, int], TileRecord] = field(default_factory=dict)
    layers: list[LayerRecord] = field(default_factory=list)

    def layer_tiles(self, k: int) -> list[TileRecord]:
        return [self.tiles[(i, j, k)] for i in range(self.n_u) for j in range(self.n_v)]

    def ar_maps(self) -> list[SplineMap]:
        """Tile trivariates with AR appended as channel 4, in (k, i, j) order."""
        return [with_channels(r.map, [r.ar]) for k in range(self.n_layers) for r in self.layer_tiles(k)]

    def identity_violation(self) -> float:
        """Largest |factor - thrust_ratio * depth / mean_depth| (zero when the construction holds)."""
        worst = 0.0
        for (i, j, k), r in self.tiles.items():
            L = self.layers[k]
            worst = max(worst, abs(r.ar - L.thrust_ratio * (r.depth / L.mean_depth)))
        return worst


def assign_ar(revolved: SplineMap, n_layers: int, profile: ThrustProfile, n_u: int | None = None,
              n_v: int | None = None) -> GrainModel:
    """Accelerant/retardant factor per tile so layers burn out together on profile."""
    if revolved.domain_dim != 3:
        raise ArgumentError("the grain must be a trivariate")
    n_u = n_layers if n_u is None else n_u
    n_v = n_layers if n_v is None else n_v
    grain = GrainModel(n_layers, n_u, n_v, profile)
    for k, layer in enumerate(partition_layers(revolved, n_layers)):
        grid = layer_tiles(layer, n_u, n_v)
        flat = [t for row in grid for t in row]
        batch = TileBatch.of(flat)
        areas = iso_w_areas(batch)
        depths = tile_depths(batch)
        thrust = areas * depths
        total = float(thrust.sum())
        if not total > 0:
            raise GeometryError(f"layer {k}: total layer thrust is {total}")
        mean_depth = float(depths.mean())
        ratio = float(profile((k + 1) / n_layers)) / total
        grain.layers.append(LayerRecord(k, total, mean_depth, ratio))
        for n, t in enumerate(flat):
            i, j = divmod(n, n_v)
            ar = ratio * (float(depths[n]) / mean_depth)
            if not ar > 0:
                raise GeometryError(f"tile {(i, j, k)}: non-positive AR {ar}")
            grain.tiles[(i, j, k)] = TileRecord((i, j, k), t, float(areas[n]), float(depths[n]), float(thrust[n]), ar)
    return grain


# -------------------------------------------------------------- simulation


@dataclass
class BurnResult:
    times: np.ndarray
    thrust: np.ndarray
    ignition: np.ndarray
    burnout: np.ndarray
    tile_burnout: dict[tuple[int, int, int], float]
    midpoint_thrust: np.ndarray
    scale: float

    @property
    def relative_thrust(self) -> np.ndarray:
        return self.thrust * self.scale

    @property
    def relative_midpoint_thrust(self) -> np.ndarray:
        return self.midpoint_thrust * self.scale

    def burnout_spread(self, grain: GrainModel) -> float:
        """Largest max/min - 1 of tile burn durations within one layer."""
        worst = 0.0
        for k in range(grain.n_layers):
            dur = np.array([self.tile_burnout[(i, j, k)] - self.ignition[k] for i in range(grain.n_u) for j in range(grain.n_v)])
            worst = max(worst, float(dur.max() / dur.min() - 1.0))
        return worst


def simulate_burn(grain: GrainModel, base_rate: float = 1.0, steps: int = 8) -> BurnResult:
    """Replay the burn layer by layer.

    Every tile's front moves at ``base_rate * AR`` through its depth; a
    layer ignites when the previous one is fully consumed.  Thrust at a
    moment is the sum over burning tiles of front area times burn speed,
    the front area being that of the w-isosurface the front has reached.
    ``scale`` converts thrust to the profile's relative units: it is the
    mean layer depth over ``base_rate``.
    """
    if not base_rate > 0:
        raise ArgumentError("base_rate must be positive")
    steps = max(int(steps), 2)
    fracs = np.linspace(0.0, 1.0, steps + 1)
    times, thrust, ign, out, mids = [], [], [], [], []
    tile_out: dict = {}
    t0 = 0.0
    for k in range(grain.n_layers):
        recs = grain.layer_tiles(k)
        speed = np.array([base_rate * r.ar for r in recs])
        dur = np.array([r.depth for r in recs]) / speed
        ign.append(t0)
        for r, dt in zip(recs, dur):
            tile_out[r.index] = t0 + float(dt)
        layer_time = float(dur.max())
        batch = TileBatch.of([r.map for r in recs])
        for s in fracs:
            times.append(t0 + s * layer_time)
            thrust.append(float(np.dot(iso_w_areas(batch, s), speed)))
        mids.append(float(np.dot(iso_w_areas(batch, 0.5), speed)))
        t0 = t0 + layer_time
        out.append(t0)
    scale = float(np.mean([L.mean_depth for L in grain.layers])) / base_rate
    return BurnResult(np.array(times), np.array(thrust), np.array(ign), np.array(out), tile_out, np.array(mids), scale)
