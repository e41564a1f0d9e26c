"""Heat-exchanger pipeline: re-space, sample, correct thicknesses, compose, sew.

The duct map is re-spaced so its knot spans follow the desired
relative tile spacings; each grid cell then reads the hot-to-cold area ratio
and the metal thickness at its eight corners.  Thicknesses are physical, so
each corner value is divided by the local stretch of the duct map across the wall
before it becomes a tile parameter.  Adjacent cells share corner samples,
which makes the composed tiles meet face to face; ``sew`` then identifies
those faces.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .config import TOL
from .errors import ArgumentError, GeometryError
from .faces import face_net, pair_coincident
from .spline import KnotVector, SplineMap, evaluate, insert_knot, jacobian, partials
from .synthesis import Index, MicroStructure, _build, _unwrap, cell_edges, check_dims
from .tiles import CORNERS, get_family, instantiate, make_params

X_NORMAL = np.array([1.0, 0.0, 0.0])


# ---------------------------------------------------------------- respace


def respace(duct_map, spacings: Sequence[Sequence[float] | None]) -> SplineMap:
    """Move interior knots so span widths are proportional to ``spacings``.

    Interior knots are first raised to full multiplicity (exact knot
    insertion), which turns every span into an independent Bezier segment;
    relabelling the span intervals then leaves the image unchanged.  The
    result is C0 at interior knots.  A direction given ``None``, or whose
    knots already have the requested spacing, is left untouched.
    """
    macro_map = _unwrap(duct_map)
    if len(spacings) != macro_map.domain_dim:
        raise ArgumentError(f"need one spacing list per direction ({macro_map.domain_dim})")
    out = macro_map
    for j, w in enumerate(spacings):
        if w is None:
            continue
        kv = out.knots[j]
        w = np.asarray(w, dtype=float)
        if w.size != kv.n_spans:
            raise ArgumentError(f"direction {j}: {w.size} weights for {kv.n_spans} spans")
        if np.any(~(w > 0)):
            raise ArgumentError(f"direction {j}: spacing weights must be positive")
        lo, hi = kv.domain
        new_br = lo + (hi - lo) * np.concatenate([[0.0], np.cumsum(w) / w.sum()])
        new_br[-1] = hi
        old_br = kv.breaks
        if np.allclose(new_br, old_br, rtol=0.0, atol=TOL.domain_eps * (hi - lo)):
            continue
        for t in old_br[1:-1]:
            out = insert_knot(out, j, float(t), kv.degree)
        kv = out.knots[j]
        values = np.interp(kv.values, old_br, new_br)
        knots = list(out.knots)
        knots[j] = KnotVector(values, kv.degree)
        out = SplineMap(tuple(knots), out.control, out.weights)
    return out


# --------------------------------------------------------------- sampling


def corner_samples(fld: SplineMap, cell: Index, dims, edges=None) -> np.ndarray:
    """Field values at the eight cell corners, x fastest (corner m = a + 2b + 4c)."""
    dims = check_dims(dims)
    if edges is None:
        edges = [np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(fld.domain, dims)]
    lo = np.array([edges[j][cell[j]] for j in range(3)])
    hi = np.array([edges[j][cell[j] + 1] for j in range(3)])
    return evaluate(fld, lo + CORNERS * (hi - lo))[:, 0]


def directional_stretch(macro_map: SplineMap, point, direction=X_NORMAL) -> float:
    """|J n|: physical length per unit parameter length along ``direction``."""
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    J = jacobian(macro_map, point)  # row j is dT/du_j
    if np.linalg.det(J[:, :3]) <= 0:
        raise GeometryError(f"non-positive Jacobian of the macro map at {np.asarray(point).tolist()}")
    return float(np.linalg.norm(n @ J[:, :3]))


def inverse_thickness(macro_map, corner_thickness: float, point, direction=X_NORMAL) -> float:
    """Parametric thickness that maps to physical thickness ``corner_thickness`` across the wall."""
    macro_map = _unwrap(macro_map)
    stretch = directional_stretch(macro_map, point, direction)
    if not stretch > 0:
        raise GeometryError(f"singular macro map at {np.asarray(point).tolist()}")
    return float(corner_thickness) / stretch


# ----------------------------------------------------------------- sewing


@dataclass
class SewnSolid:
    """A structure plus the identification of its coincident faces.

    Faces are ``(block, side)`` with blocks numbered in ``structure.all_maps()``
    order.  ``merge`` maps each matched face to its partner (both ways).
    ``unmatched`` lists the faces on interior grid interfaces that found
    no partner, as ``(cell, block-in-cell, side)``.
    """

    structure: MicroStructure
    tol: float
    merge: dict[tuple[int, int], tuple[int, int]] = field(default_factory=dict)
    deviations: dict[tuple[int, int], float] = field(default_factory=dict)
    unmatched: list[tuple[Index, int, int]] = field(default_factory=list)
    interior_faces: int = 0

    @property
    def pairs(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        return sorted((a, b) for a, b in self.merge.items() if a < b)

    @property
    def ok(self) -> bool:
        return not self.unmatched

    def summary(self) -> dict:
        return {
            "pairs": len(self.pairs),
            "interior_faces": self.interior_faces,
            "unmatched": len(self.unmatched),
            "max_deviation": max(self.deviations.values(), default=0.0),
            "tol": self.tol,
        }

    def lines(self) -> list[str]:
        s = self.summary()
        out = [f"sew: {s['pairs']} face pairs, {s['interior_faces']} interior faces, tol={self.tol:.3e}"]
        for cell, b, side in self.unmatched:
            out.append(f"  UNMATCHED cell {cell} block {b} side {side}")
        out.append("PASS" if self.ok else "FAIL")
        return out


def _block_table(ms: MicroStructure):
    rows = []
    for idx in sorted(ms.cells):
        rec = ms.cells[idx]
        for b, (m, sides) in enumerate(zip(rec.maps, rec.sides)):
            rows.append((idx, b, m, sides))
    return rows


def _on_interior_interface(idx: Index, tile_face: int, dims) -> bool:
    axis, end = divmod(tile_face, 2)
    return idx[axis] + (1 if end else -1) in range(dims[axis])


def sew(ms: MicroStructure, tol: float | None = None) -> SewnSolid:
    """Identify every pair of coincident block faces (deterministic, greedy by index)."""
    if tol is None:
        tol = TOL.merge_rel * ms.diagonal()
    if not tol > 0:
        raise ArgumentError("tol must be positive")
    rows = _block_table(ms)
    keys = [(n, s) for n in range(len(rows)) for s in range(6)]
    nets = [face_net(rows[n][2], s) for n, s in keys]
    solid = SewnSolid(ms, float(tol))
    for i, j, dev in pair_coincident(nets, [k[0] for k in keys], tol):
        a, b = keys[i], keys[j]
        solid.merge[a] = b
        solid.merge[b] = a
        solid.deviations[a] = solid.deviations[b] = float(dev)
    for n, (idx, b, _, sides) in enumerate(rows):
        for side, tf in sorted(sides.items()):
            if _on_interior_interface(idx, tf, ms.dims):
                solid.interior_faces += 1
                if (n, side) not in solid.merge:
                    solid.unmatched.append((idx, b, side))
    return solid


# ---------------------------------------------------------------- pipeline


def hx_cell_params(macro_map: SplineMap, area_ratio: SplineMap, wall_thickness: SplineMap, cell: Index, dims, edges) -> dict[str, tuple]:
    """Tile parameters of one cell: corner ratios and stretch-corrected metal fractions."""
    h = corner_samples(area_ratio, cell, dims, edges)
    k = corner_samples(wall_thickness, cell, dims, edges)
    lo = np.array([edges[j][cell[j]] for j in range(3)])
    hi = np.array([edges[j][cell[j] + 1] for j in range(3)])
    pts = lo + CORNERS * (hi - lo)
    if np.any(~(h > 0)) or np.any(~(k > 0)):
        raise ArgumentError(f"cell {cell}: area ratio and wall thickness must be positive")
    width = hi[0] - lo[0]
    m = [inverse_thickness(macro_map, kk, p) / width for kk, p in zip(k, pts)]
    return {"h": tuple(float(x) for x in h), "m": tuple(float(x) for x in m)}


def build_hx(duct_map, area_ratio: SplineMap, wall_thickness: SplineMap, dims, spacings=None, family="hx",
             categories: Mapping | None = None, tol: float | None = None) -> SewnSolid:
    """Heat-exchanger micro-structure over a duct, sewn into one solid."""
    fam = get_family(family)
    macro_map = respace(duct_map, spacings) if spacings is not None else _unwrap(duct_map)
    dims = check_dims(dims)
    edges = cell_edges(macro_map, dims)
    tiles = {}
    for idx in itertools.product(*(range(n) for n in dims)):
        values = hx_cell_params(macro_map, area_ratio, wall_thickness, idx, dims, edges)
        tiles[idx] = instantiate(fam, make_params(fam, values, categories))
    ms = _build(fam.name, macro_map, dims, tiles, edges)
    return sew(ms, tol)


# ---------------------------------------------------------------- metrics


def _ruled_area(c1, d1, c2, d2, wv, ws, s) -> float:
    # R(s, v) = (1 - s) c1(v) + s c2(v)
    Rs = (c2 - c1)[None]
    Rv = (1 - s)[:, None, None] * d1[None] + s[:, None, None] * d2[None]
    jac = np.linalg.norm(np.cross(np.broadcast_to(Rs, Rv.shape), Rv), axis=-1)
    return float(np.einsum("sv,s,v->", jac, ws, wv))


def channel_areas(ms: MicroStructure, cell: Index, flow_axis: int = 2, at: float = 0.5,
                  order: int = 24) -> tuple[float, float]:
    """Hot and cold channel cross-section areas of one hx cell.

    The cross-section is the ruled surface between the facing block
    faces, cut at tile-local parameter ``at`` along ``flow_axis``.
    """
    rec = ms.cells[tuple(cell)]
    by_role = dict(zip(rec.roles, rec.maps))
    across = [a for a in (1, 2) if a != flow_axis][0]
    x, w = np.polynomial.legendre.leggauss(order)
    s, ws = 0.5 * (x + 1), 0.5 * w

    def curve(m: SplineMap, xside: int):
        dom = m.domain
        t = dom[across, 0] + s * (dom[across, 1] - dom[across, 0])
        pts = np.zeros((order, 3))
        pts[:, 0] = dom[0, xside]
        pts[:, across] = t
        pts[:, flow_axis] = dom[flow_axis, 0] + at * (dom[flow_axis, 1] - dom[flow_axis, 0])
        vals, ders = partials(m, pts)
        return vals[:, :3], ders[:, across, :3], ws * (dom[across, 1] - dom[across, 0])

    c1, d1, wv = curve(by_role["hot_wall"], 1)
    c2, d2, _ = curve(by_role["separator"], 0)
    hot = _ruled_area(c1, d1, c2, d2, wv, ws, s)
    c1, d1, wv = curve(by_role["separator"], 1)
    c2, d2, _ = curve(by_role["cold_wall"], 0)
    cold = _ruled_area(c1, d1, c2, d2, wv, ws, s)
    return hot, cold


def separator_thickness(ms: MicroStructure, cell: Index, at=(0.5, 0.5)) -> float:
    """Distance from the separator's x_min face point at ``at`` to its x_max face.

    The distance to the opposite face is minimised over its parameters
    (point-to-face distance on the composed geometry).
    """
    from scipy.optimize import minimize

    rec = ms.cells[tuple(cell)]
    m = dict(zip(rec.roles, rec.maps))["separator"]
    dom = m.domain
    yz = dom[1:, 0] + np.asarray(at) * (dom[1:, 1] - dom[1:, 0])
    p = evaluate(m, [[dom[0, 0], *yz]])[0, :3]

    def dist2(ab):
        ab = np.clip(ab, dom[1:, 0], dom[1:, 1])
        q = evaluate(m, [[dom[0, 1], *ab]])[0, :3]
        return float(((q - p) ** 2).sum())

    res = minimize(dist2, yz, method="L-BFGS-B", bounds=list(map(tuple, dom[1:])),
                   options={"ftol": 1e-15, "gtol": 1e-12})
    return float(np.sqrt(res.fun))
