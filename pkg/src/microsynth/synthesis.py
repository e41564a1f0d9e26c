"""Grid paving, composition and the optimization loop around them.

A structure is built cell by cell: the unit-cube tile is scaled into its
grid cell of the macro domain (``pave``) and every block is composed
through the macro map.  Cells are the unit of composition; when a cell
straddles an interior knot of the macro map the affected blocks are split at the knot
preimage first, so each composed piece is polynomial.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from .composition import compose_many
from .config import TOL
from .errors import ArgumentError, CompositionError
from .faces import tile_boundary_sides
from .spline import SplineMap, affine_transform, evaluate, subdivide
from .tiles import MicroTile, TileParams, get_family, instantiate, make_params, params_from_fields

log = logging.getLogger(__name__)

Index = tuple[int, int, int]


# ------------------------------------------------------------------ types


@dataclass(frozen=True, eq=False)
class MacroMap:
    """A trivariate deformation map with the grid it is paved with."""

    map: SplineMap
    dims: tuple[int, int, int] | None = None

    def __post_init__(self):
        if self.map.domain_dim != 3 or self.map.range_dim < 3:
            raise ArgumentError("a macro map is a trivariate with at least three channels")
        dims = self.dims or tuple(kv.n_spans for kv in self.map.knots)
        object.__setattr__(self, "dims", check_dims(dims))

    @property
    def domain(self) -> np.ndarray:
        return self.map.domain


def _unwrap(macro_map) -> SplineMap:
    return macro_map.map if isinstance(macro_map, MacroMap) else macro_map


def check_dims(dims) -> tuple[int, int, int]:
    dims = tuple(int(n) for n in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ArgumentError(f"grid dims must be three integers >= 1, got {dims}")
    return dims


@dataclass(frozen=True, eq=False)
class CellRecord:
    index: Index
    maps: tuple[SplineMap, ...]
    placed: tuple[SplineMap, ...]
    roles: tuple[str, ...]
    sides: tuple[dict[int, int], ...]
    params: TileParams
    box: np.ndarray


@dataclass(eq=False)
class MicroStructure:
    """Grid-indexed composed tiles with their adjacency and provenance."""

    family: str
    macro: SplineMap
    dims: tuple[int, int, int]
    edges: tuple[np.ndarray, ...]
    cells: dict[Index, CellRecord]
    adjacency: list[tuple[Index, Index, int]] = field(default_factory=list)
    # names of the attribute channels (4th channel onward) of every map
    attributes: tuple[str, ...] = ()

    def all_maps(self) -> list[SplineMap]:
        return [m for idx in sorted(self.cells) for m in self.cells[idx].maps]

    def diagonal(self) -> float:
        boxes = np.array([m.bbox() for m in self.all_maps()])
        return float(np.linalg.norm(boxes[:, 1].max(axis=0) - boxes[:, 0].min(axis=0)))

    @property
    def n_tiles(self) -> int:
        return len(self.cells)

    def params_of(self, index: Index) -> TileParams:
        return self.cells[tuple(index)].params


def grid_adjacency(dims) -> list[tuple[Index, Index, int]]:
    """Interior interfaces ``(cell, +neighbour, axis)`` in lexicographic order."""
    out = []
    for idx in itertools.product(*(range(n) for n in dims)):
        for axis in range(3):
            if idx[axis] + 1 < dims[axis]:
                nb = list(idx)
                nb[axis] += 1
                out.append((idx, tuple(nb), axis))
    return out


def cell_edges(macro_map, dims) -> tuple[np.ndarray, ...]:
    """Cell boundaries per direction.

    A direction whose cell count is a multiple of the macro span count splits
    every span evenly, so no cell straddles a knot; otherwise the cells are
    uniform over the domain.
    """
    macro_map = _unwrap(macro_map)
    out = []
    for kv, n in zip(macro_map.knots, check_dims(dims)):
        br = kv.breaks
        spans = br.size - 1
        if n % spans == 0:
            per = n // spans
            pts = [np.linspace(a, b, per + 1)[:-1] for a, b in zip(br[:-1], br[1:])]
            out.append(np.concatenate(pts + [br[-1:]]))
        else:
            out.append(np.linspace(br[0], br[-1], n + 1))
    return tuple(out)


# ----------------------------------------------------------------- paving


@dataclass(frozen=True, eq=False)
class Placement:
    index: Index
    box: np.ndarray
    blocks: tuple[SplineMap, ...]


def cell_box(edges, index) -> np.ndarray:
    return np.array([(e[i], e[i + 1]) for e, i in zip(edges, index)])


def place(block: SplineMap, box: np.ndarray) -> SplineMap:
    """Scale and translate a unit-cube block into ``box``."""
    return affine_transform(block, np.diag(box[:, 1] - box[:, 0]), box[:, 0])


def pave(tile: MicroTile, dims, domain_box=((0.0, 1.0),) * 3, edges=None) -> list[Placement]:
    """One placement of ``tile`` per grid cell of ``domain_box``, cells in lexicographic order."""
    dims = check_dims(dims)
    if edges is None:
        edges = [np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(np.asarray(domain_box, dtype=float), dims)]
    out = []
    for idx in itertools.product(*(range(n) for n in dims)):
        box = cell_box(edges, idx)
        out.append(Placement(idx, box, tuple(place(b, box) for b in tile.blocks)))
    return out


def _split_axis(block: SplineMap, coord: int, t: float) -> tuple[SplineMap, SplineMap] | None:
    """Split a tile-local block where its coordinate ``coord`` equals ``t``.

    Only blocks whose ``coord`` varies along one parametric direction, and
    linearly, can be split exactly; ``None`` signals any other case.
    """
    c = block.control[..., coord]
    for axis in range(3):
        flat = np.moveaxis(c, axis, 0).reshape(c.shape[axis], -1)
        if np.ptp(flat, axis=1).max() > 1e-14 or block.degrees[axis] != 1 or c.shape[axis] != 2:
            continue
        x0, x1 = flat[0, 0], flat[-1, 0]
        if x1 == x0:
            return None
        lo, hi = block.knots[axis].domain
        s = lo + (t - x0) / (x1 - x0) * (hi - lo)
        return subdivide(block, axis, s)
    return None


def split_at_knots(blocks: Sequence[SplineMap], cuts: Sequence[Sequence[float]],
                   index: Index = (0, 0, 0)) -> list[SplineMap]:
    """Split tile-local blocks at tile-local knot positions ``cuts`` per coordinate."""
    out = list(blocks)
    for coord, ts in enumerate(cuts):
        for t in ts:
            nxt = []
            for b in out:
                lo, hi = b.bbox()[:, coord]
                if not lo + 1e-12 < t < hi - 1e-12:
                    nxt.append(b)
                    continue
                pieces = _split_axis(b, coord, t)
                if pieces is None:
                    raise CompositionError(
                        f"cell {index}: a block straddles a macro knot in direction {'xyz'[coord]} "
                        "and cannot be split exactly; choose dims as a multiple of the span count"
                    )
                nxt.extend(pieces)
            out = nxt
    return out


def _local_cuts(macro_map: SplineMap, box: np.ndarray) -> list[list[float]]:
    cuts = []
    for kv, (lo, hi) in zip(macro_map.knots, box):
        inner = kv.breaks[1:-1]
        width = hi - lo
        cuts.append([(k - lo) / width for k in inner if lo + TOL.span_rel * width < k < hi - TOL.span_rel * width])
    return cuts


# -------------------------------------------------------------- synthesis


def _build(family: str, macro_map: SplineMap, dims, tiles: Mapping[Index, MicroTile], edges) -> MicroStructure:
    cells_blocks, meta = [], []
    for idx in sorted(tiles):
        tile = tiles[idx]
        box = cell_box(edges, idx)
        cuts = _local_cuts(macro_map, box)
        if any(cuts):
            local = split_at_knots(tile.blocks, cuts, idx)
            roles = _roles_after_split(tile, local)
            sides = tuple(tile_boundary_sides(b) for b in local)
        else:
            local, roles, sides = list(tile.blocks), tile.roles, tile.sides
        placed = tuple(place(b, box) for b in local)
        cells_blocks.append(placed)
        meta.append((idx, roles, sides, tile.params, box))
    flat = [b for blocks in cells_blocks for b in blocks]
    labels = [f"cell {m[0]}" for m, blocks in zip(meta, cells_blocks) for _ in blocks]
    cache: dict = {}
    composed: list[SplineMap] = []
    for start in range(0, len(flat), TOL.chunk // 8):
        stop = start + TOL.chunk // 8
        composed.extend(compose_many(macro_map, flat[start:stop], cache, labels[start:stop]))
    cells = {}
    pos = 0
    for (idx, roles, sides, params, box), placed in zip(meta, cells_blocks):
        n = len(placed)
        cells[idx] = CellRecord(idx, tuple(composed[pos : pos + n]), placed, tuple(roles), tuple(sides), params, box)
        pos += n
    attrs = next(iter(tiles.values())).attributes if tiles else ()
    return MicroStructure(family, macro_map, tuple(dims), tuple(edges), cells, grid_adjacency(dims), tuple(attrs))


def _roles_after_split(tile: MicroTile, local: Sequence[SplineMap]) -> tuple[str, ...]:
    # a split piece lies inside exactly one original block; match by centroid
    roles = []
    for b in local:
        c = b.control[..., :3].reshape(-1, 3).mean(axis=0)
        best = min(range(len(tile.blocks)), key=lambda n: _box_distance(tile.blocks[n], c))
        roles.append(tile.roles[best])
    return tuple(roles)


def _box_distance(block: SplineMap, p: np.ndarray) -> float:
    lo, hi = block.bbox()
    return float(np.linalg.norm(np.maximum(0.0, np.maximum(lo - p, p - hi))))


def synthesize(tile: MicroTile, macro_map, dims=None) -> MicroStructure:
    """Pave ``tile`` over the macro domain and compose every block through the macro map."""
    if isinstance(macro_map, MacroMap) and dims is None:
        dims = macro_map.dims
    macro_map = _unwrap(macro_map)
    dims = check_dims(dims if dims is not None else tuple(kv.n_spans for kv in macro_map.knots))
    edges = cell_edges(macro_map, dims)
    tiles = {idx: tile for idx in itertools.product(*(range(n) for n in dims))}
    return _build(tile.family, macro_map, dims, tiles, edges)


def synthesize_graded(family, macro_map, dims, fields: Mapping[str, SplineMap], fixed: Mapping | None = None,
                      categories: Mapping | None = None, check: bool = True) -> MicroStructure:
    """Like :func:`synthesize`, with per-cell parameters sampled from scalar fields."""
    fam = get_family(family)
    if isinstance(macro_map, MacroMap) and dims is None:
        dims = macro_map.dims
    macro_map = _unwrap(macro_map)
    dims = check_dims(dims)
    edges = cell_edges(macro_map, dims)
    tiles = {}
    cache: dict = {}
    for idx in itertools.product(*(range(n) for n in dims)):
        tile_params = params_from_fields(fam, fields, idx, dims, edges, fixed, categories)
        key = tuple(sorted((k, v) for k, v in tile_params.values.items()))
        if key not in cache:
            cache[key] = instantiate(fam, tile_params, check=check)
        tiles[idx] = cache[key]
    return _build(fam.name, macro_map, dims, tiles, edges)


def synthesize_params(family, macro_map, dims, tile_params: TileParams | Mapping) -> MicroStructure:
    """Uniform structure of one family for one parameter set."""
    return synthesize(instantiate(family, tile_params), macro_map, dims)


def spot_check(ms: MicroStructure, n_tiles: int = 5, n_points: int = 20, seed: int = 0) -> float:
    """Max |composed(p) - macro_map(placed(p))| over random points of random tiles."""
    rng = np.random.default_rng(seed)
    keys = sorted(ms.cells)
    picks = rng.choice(len(keys), size=min(n_tiles, len(keys)), replace=False)
    worst = 0.0
    for k in sorted(picks):
        rec = ms.cells[keys[k]]
        for m, p in zip(rec.maps, rec.placed):
            u = rng.random((n_points, 3))
            lo, hi = p.domain[:, 0], p.domain[:, 1]
            u = lo + u * (hi - lo)
            direct = evaluate(ms.macro, evaluate(p, u)[:, :3])[:, :3]
            worst = max(worst, float(np.abs(evaluate(m, u)[:, :3] - direct).max()))
    return worst


# ------------------------------------------------------------- objectives


@dataclass(frozen=True)
class Objective:
    """A scalar to minimise over structures (lower is better)."""

    name: str
    evaluate: Callable[[MicroStructure], float]
    per_tile: bool = False

    def __call__(self, ms: MicroStructure) -> float:
        value = float(self.evaluate(ms))
        if not math.isfinite(value):
            raise ArgumentError(f"objective {self.name!r} returned {value}")
        return value


def volume_objective() -> Objective:
    from .validation import volume

    return Objective("volume", volume, per_tile=True)


def surface_area_objective() -> Objective:
    from .validation import surface_area

    return Objective("surface_area", surface_area)


def target_volume_objective(target: float) -> Objective:
    from .validation import volume

    return Objective(f"|volume-{target:g}|", lambda ms: abs(volume(ms) - target), per_tile=True)


def cell_volumes(ms: MicroStructure) -> dict[Index, float]:
    from .validation import volumes

    keys = sorted(ms.cells)
    flat = [m for k in keys for m in ms.cells[k].maps]
    vols = volumes(flat)
    out, pos = {}, 0
    for k in keys:
        n = len(ms.cells[k].maps)
        out[k] = float(vols[pos : pos + n].sum())
        pos += n
    return out


def field_matching_objective(target: SplineMap, quantity: Callable[[MicroStructure], Mapping[Index, float]] | None = None) -> Objective:
    """L2 distance between a per-tile quantity and a field sampled at cell centres.

    The default quantity is each cell's material volume divided by the
    volume of the cell's image under the macro map (the local solid fraction).
    """

    def solid_fraction(ms: MicroStructure) -> dict[Index, float]:
        from .validation import volume

        vols = cell_volumes(ms)
        out = {}
        for k, rec in ms.cells.items():
            full = volume(_cell_image(ms.macro, rec.box))
            out[k] = vols[k] / full
        return out

    q = quantity or solid_fraction

    def value(ms: MicroStructure) -> float:
        got = q(ms)
        keys = sorted(got)
        centres = np.array([ms.cells[k].box.mean(axis=1) for k in keys])
        want = evaluate(target, centres)[:, 0]
        return float(np.sqrt(np.sum((np.array([got[k] for k in keys]) - want) ** 2)))

    return Objective("field_matching", value, per_tile=True)


def _cell_image(macro_map: SplineMap, box: np.ndarray) -> SplineMap:
    from .spline import identity_map

    return compose_many(macro_map, [identity_map(box)])[0]


# -------------------------------------------------------------- optimizer


class Optimizer(Protocol):
    """Black-box optimizer contract.

    ``propose(history)`` returns the next parameter vector (a name -> value
    mapping) or ``None`` when it has converged; ``observe(params, value)``
    reports the objective of the last proposal.  ``history`` is the list of
    ``(params, value)`` pairs seen so far, oldest first.
    """

    def propose(self, history: Sequence[tuple[dict, float]]) -> dict | None: ...

    def observe(self, tile_params: dict, value: float) -> None: ...


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class CoordinateDescent:
    """Bounded coordinate descent with a golden-section search per variable.

    Variables are swept in the given order; a sweep that improves the best
    value by less than ``rel_improvement`` (relative) ends the search.
    Fully deterministic: ``seed`` is accepted for interface symmetry and
    unused.
    """

    def __init__(self, bounds: Mapping[str, tuple[float, float]], start: Mapping[str, float],
                 xtol: float = 1e-4, rel_improvement: float = 1e-6, max_sweeps: int = 20, seed: int | None = None):
        self.bounds = dict(bounds)
        self.order = list(bounds)
        self.xtol = xtol
        self.rel_improvement = rel_improvement
        self.max_sweeps = max_sweeps
        self.best = dict(start)
        self.best_value = math.inf
        self._pending: float | None = None
        self._gen = self._run()
        self._started = False

    def _run(self):
        for _ in range(self.max_sweeps):
            before = self.best_value
            for name in self.order:
                lo, hi = self.bounds[name]
                yield from self._golden(name, lo, hi)
            if not math.isfinite(before):
                continue
            if before - self.best_value <= self.rel_improvement * max(abs(before), 1e-300):
                return

    def _golden(self, name: str, a: float, b: float):
        def probe(x):
            tile_params = {**self.best, name: x}
            value = yield tile_params
            return value

        tol = self.xtol * (b - a)
        c = b - GOLDEN * (b - a)
        d = a + GOLDEN * (b - a)
        fc = yield from probe(c)
        fd = yield from probe(d)
        while b - a > tol:
            if fc <= fd:
                b, d, fd = d, c, fc
                c = b - GOLDEN * (b - a)
                fc = yield from probe(c)
            else:
                a, c, fc = c, d, fd
                d = a + GOLDEN * (b - a)
                fd = yield from probe(d)

    def propose(self, history):
        try:
            if not self._started:
                self._started = True
                return next(self._gen)
            return self._gen.send(self._pending)
        except StopIteration:
            return None

    def observe(self, tile_params, value):
        self._pending = value
        if value < self.best_value:
            self.best_value = value
            self.best = dict(tile_params)


@dataclass
class OptimizationResult:
    structure: MicroStructure
    params: TileParams
    value: float
    initial_value: float
    trace: list[tuple[int, dict, float]]

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1


def _clamp(tile_params: Mapping[str, float], bounds: Mapping[str, tuple[float, float]]) -> dict:
    out = {}
    for k, v in tile_params.items():
        if k not in bounds:
            raise ArgumentError(f"optimizer proposed unknown variable {k!r}")
        lo, hi = bounds[k]
        c = float(min(max(float(v), lo), hi))
        if c != v:
            log.warning("optimizer proposal %s=%r outside [%g, %g]; clamped to %r", k, v, lo, hi, c)
        out[k] = c
    return out


def optimize(family, macro_map, dims, objective: Objective, optimizer: Optimizer | None = None, budget: int = 50,
             variables: Sequence[str] | None = None, initial: Mapping | None = None,
             categories: Mapping | None = None, seed: int = 0) -> OptimizationResult:
    """Search the family's parameters (shared by all tiles) to minimise ``objective``.

    The initial structure is always synthesised and evaluated; ``budget``
    counts the evaluations after it.  Ties keep the earlier parameters, so
    the result is never worse than the start.
    """
    fam = get_family(family)
    if budget < 0:
        raise ArgumentError("budget must be >= 0")
    base = make_params(fam, initial, categories)
    names = list(variables or [p.name for p in fam.params])
    bounds = {n: (fam.spec(n).lo, fam.spec(n).hi) for n in names}
    start = {n: base.center(n) for n in names}

    def run(values: Mapping[str, float]):
        tile_params = base.with_values(**values)
        ms = synthesize(instantiate(fam, tile_params), macro_map, dims)
        return ms, tile_params, objective(ms)

    best_ms, best_P, best_value = run(start)
    initial_value = best_value
    trace = [(0, dict(start), best_value)]
    history = [(dict(start), best_value)]
    if optimizer is None:
        optimizer = CoordinateDescent(bounds, start, seed=seed)
    if isinstance(optimizer, CoordinateDescent):
        optimizer.observe(dict(start), best_value)
    for it in range(1, budget + 1):
        proposal = optimizer.propose(history)
        if proposal is None:
            break
        values = _clamp(proposal, bounds)
        ms, tile_params, value = run(values)
        optimizer.observe(values, value)
        history.append((values, value))
        trace.append((it, values, value))
        if value < best_value:
            best_ms, best_P, best_value = ms, tile_params, value
    return OptimizationResult(best_ms, best_P, best_value, initial_value, trace)
