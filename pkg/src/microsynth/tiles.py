"""Parametric micro-tile families confined to the unit cube.

Every family builds its tile from trilinear hexahedral blocks whose vertex
positions are affine in the tile parameters.  Parameters flagged as
*blendable* may be given either as one scalar or as eight corner values
(corner ``m = a + 2b + 4c`` sits at ``(a, b, c)``); the geometry on each
tile face then depends only on the corner values of that face, which is
what keeps graded neighbours conforming.

Shipped families (``tiles list`` on the CLI prints the same table):

``shelled_box``
    Hollow box with wall thickness ``wall`` (26 blocks around the cavity).
    ``shell="single"`` keeps only the wall on the x_max side.
``tube_lattice``
    Three orthogonal square struts of widths ``d_x, d_y, d_z`` meeting in a
    central node; ``walls="z"`` adds two fixed-thickness boundary plates.
``hx``
    Heat-exchanger tile: two half walls and a separating plate normal to x
    enclosing a hot and a cold channel with area ratio ``h``; metal
    thickness ``m`` as a fraction of the tile width.
``solid``
    Full unit cube carrying an accelerant/retardant factor ``ar`` and a
    material class as attribute channels.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigError, GeometryError, ParameterValidationError
from .faces import face_net, match_faces, tile_boundary_sides
from .spline import KnotVector, SplineMap, evaluate

MATERIALS = {"insulator": 0, "thermal": 1, "electrical": 2}
LINEAR = KnotVector.uniform(1)
CORNERS = np.array([(a, b, c) for c in (0, 1) for b in (0, 1) for a in (0, 1)], dtype=float)


@dataclass(frozen=True)
class ParamSpec:
    name: str
    lo: float
    hi: float
    default: float
    blend: bool = True
    doc: str = ""


@dataclass(frozen=True)
class TileParams:
    """Named parameter values with their bounds, plus categorical choices.

    A value is a float or a tuple of eight corner values.
    """

    values: Mapping[str, float | tuple[float, ...]]
    bounds: Mapping[str, tuple[float, float]]
    categories: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        vals = {}
        for name, v in self.values.items():
            if name not in self.bounds:
                raise ParameterValidationError(f"parameter {name!r} has no bounds")
            lo, hi = self.bounds[name]
            if not hi > lo:
                raise ParameterValidationError(f"parameter {name!r}: bounds [{lo}, {hi}] have no width")
            arr = np.atleast_1d(np.asarray(v, dtype=float))
            if arr.size not in (1, 8):
                raise ParameterValidationError(f"parameter {name!r}: expected a scalar or 8 corner values")
            slack = 1e-12 * max(1.0, abs(hi))
            if not np.all(np.isfinite(arr)) or np.any(arr < lo - slack) or np.any(arr > hi + slack):
                raise ParameterValidationError(f"parameter {name!r}={arr.tolist() if arr.size > 1 else float(arr[0])} outside [{lo}, {hi}]")
            vals[name] = float(arr[0]) if arr.size == 1 else tuple(float(x) for x in arr)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "bounds", dict(self.bounds))
        object.__setattr__(self, "categories", dict(self.categories))

    def corners(self, name: str) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.values[name], dtype=float), (8,)).copy()

    def corner_grid(self, name: str) -> np.ndarray:
        """Corner values indexed ``[a, b, c]``."""
        return self.corners(name).reshape(2, 2, 2).transpose(2, 1, 0)

    def center(self, name: str) -> float:
        return float(self.corners(name).mean())

    @property
    def is_scalar(self) -> bool:
        return all(not isinstance(v, tuple) for v in self.values.values())

    def with_values(self, **kw) -> "TileParams":
        return TileParams({**self.values, **kw}, self.bounds, self.categories)

    def to_dict(self) -> dict:
        return {
            "values": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.values.items()},
            "categories": dict(self.categories),
        }


@dataclass(frozen=True)
class Family:
    name: str
    doc: str
    params: tuple[ParamSpec, ...]
    categories: Mapping[str, tuple[str, ...]]
    build: Callable[["TileParams"], list[tuple[str, np.ndarray]]]
    periodic: Callable[["TileParams"], tuple[int, ...]]
    attributes: Callable[["TileParams"], dict[str, float]]

    def spec(self, name: str) -> ParamSpec:
        for p in self.params:
            if p.name == name:
                return p
        raise ConfigError(f"family {self.name!r} has no parameter {name!r}")

    @property
    def bounds(self) -> dict[str, tuple[float, float]]:
        return {p.name: (p.lo, p.hi) for p in self.params}

    def defaults(self) -> TileParams:
        return TileParams(
            {p.name: p.default for p in self.params},
            self.bounds,
            {k: v[0] for k, v in self.categories.items()},
        )

    def describe(self) -> dict:
        return {
            "name": self.name,
            "doc": self.doc,
            "params": [
                {"name": p.name, "lo": p.lo, "hi": p.hi, "default": p.default, "corner_blend": p.blend, "doc": p.doc}
                for p in self.params
            ],
            "categories": {k: list(v) for k, v in self.categories.items()},
        }


@dataclass(frozen=True, eq=False)
class MicroTile:
    family: str
    blocks: tuple[SplineMap, ...]
    roles: tuple[str, ...]
    sides: tuple[dict[int, int], ...]
    params: TileParams
    periodic: tuple[int, ...]
    attributes: tuple[str, ...] = ()

    def __len__(self):
        return len(self.blocks)


# ----------------------------------------------------------------- helpers


def hex_block(verts: np.ndarray, attrs: tuple[float, ...] = ()) -> SplineMap:
    """Trilinear block from its 2x2x2 vertex array (indexed [a, b, c])."""
    verts = np.asarray(verts, dtype=float)
    if attrs:
        verts = np.concatenate([verts, np.broadcast_to(np.asarray(attrs, dtype=float), (2, 2, 2, len(attrs)))], axis=-1)
    return SplineMap((LINEAR, LINEAR, LINEAR), verts)


def _collapsed(verts: np.ndarray, tol: float = 1e-12) -> bool:
    for axis in range(3):
        edges = np.diff(verts, axis=axis)
        if np.sqrt((edges**2).sum(axis=-1)).max() <= tol:
            return True
    return False


def _box(lo, hi) -> np.ndarray:
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    verts = np.empty((2, 2, 2, 3))
    for a, b, c in itertools.product((0, 1), repeat=3):
        verts[a, b, c] = [(lo, hi)[a][0], (lo, hi)[b][1], (lo, hi)[c][2]]
    return verts


def _material(tile_params: TileParams) -> dict[str, float]:
    mat = tile_params.categories.get("material", "none")
    return {} if mat == "none" else {"material": float(MATERIALS[mat])}


# -------------------------------------------------------- family: shelled box


def _shelled_box(tile_params: TileParams) -> list[tuple[str, np.ndarray]]:
    tau = tile_params.corner_grid("wall")
    if tile_params.categories.get("shell", "closed") == "single":
        verts = np.empty((2, 2, 2, 3))
        for a, b, c in itertools.product((0, 1), repeat=3):
            verts[a, b, c] = [1.0 - tau[1, b, c] if a == 0 else 1.0, b, c]
        return [("wall", verts)]
    grid = np.empty((4, 4, 4, 3))
    for q in itertools.product(range(4), repeat=3):
        t = tau[tuple(int(x >= 2) for x in q)]
        grid[q] = [(0.0, t, 1.0 - t, 1.0)[x] for x in q]
    blocks = []
    for i, j, k in itertools.product(range(3), repeat=3):
        if (i, j, k) == (1, 1, 1):
            continue
        verts = grid[i : i + 2, j : j + 2, k : k + 2]
        if not _collapsed(verts):
            blocks.append(("wall", verts))
    return blocks


def _shelled_periodic(tile_params: TileParams) -> tuple[int, ...]:
    return (1, 2) if tile_params.categories.get("shell", "closed") == "single" else (0, 1, 2)


# ------------------------------------------------------ family: tube lattice


def _face_mean(grid: np.ndarray, axis: int, end: int) -> float:
    return float(np.take(grid, end, axis=axis).mean())


def _tube_lattice(tile_params: TileParams) -> list[tuple[str, np.ndarray]]:
    d = [tile_params.corner_grid(n) for n in ("d_x", "d_y", "d_z")]
    dc = [float(g.mean()) for g in d]
    half = 0.5 * np.array([max(dc[1], dc[2]), max(dc[0], dc[2]), max(dc[0], dc[1])])
    walls = tile_params.categories.get("walls", "none") == "z"
    tw = WALL_THICKNESS if walls else 0.0
    c = np.full(3, 0.5)
    blocks = [("node", _box(c - half, c + half))]
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        for end in (0, 1):
            s = 0.5 * _face_mean(d[axis], axis, end)
            start = (tw if walls and axis == 2 else 0.0) if end == 0 else 1.0 - (tw if walls and axis == 2 else 0.0)
            node_face = 0.5 - half[axis] if end == 0 else 0.5 + half[axis]
            verts = np.empty((2, 2, 2, 3))
            for idx in itertools.product((0, 1), repeat=3):
                along = idx[axis]
                at_face = (along == 0) if end == 0 else (along == 1)
                p = np.empty(3)
                p[axis] = start if at_face else node_face
                for o in others:
                    r = s if at_face else half[o]
                    p[o] = 0.5 - r if idx[o] == 0 else 0.5 + r
                verts[idx] = p
            blocks.append((f"arm_{'xyz'[axis]}{end}", verts))
    if walls:
        for end in (0, 1):
            s = 0.5 * _face_mean(d[2], 2, end)
            br = [0.0, 0.5 - s, 0.5 + s, 1.0]
            z = (0.0, tw) if end == 0 else (1.0 - tw, 1.0)
            for i, j in itertools.product(range(3), repeat=2):
                blocks.append((f"plate_z{end}", _box((br[i], br[j], z[0]), (br[i + 1], br[j + 1], z[1]))))
    return blocks


WALL_THICKNESS = 0.1


# ------------------------------------------------------ family: heat exchanger


def hx_positions(m_lo: float, m_hi: float, h: float) -> np.ndarray:
    """x positions of the six block boundaries along one x-edge of the tile."""
    m_mid = 0.5 * (m_lo + m_hi)
    free = 1.0 - 0.5 * m_lo - 0.5 * m_hi - m_mid
    a_hot = free * h / (1.0 + h)
    x1 = 0.5 * m_lo
    x2 = x1 + a_hot
    x3 = x2 + m_mid
    return np.array([0.0, x1, x2, x3, 1.0 - 0.5 * m_hi, 1.0])


def _hx(tile_params: TileParams) -> list[tuple[str, np.ndarray]]:
    m = tile_params.corner_grid("m")
    h = tile_params.corner_grid("h")
    xs = np.empty((2, 2, 6))
    for b, c in itertools.product((0, 1), repeat=2):
        xs[b, c] = hx_positions(m[0, b, c], m[1, b, c], 0.5 * (h[0, b, c] + h[1, b, c]))
    out = []
    for role, (i0, i1) in (("hot_wall", (0, 1)), ("separator", (2, 3)), ("cold_wall", (4, 5))):
        verts = np.empty((2, 2, 2, 3))
        for a, b, c in itertools.product((0, 1), repeat=3):
            verts[a, b, c] = [xs[b, c, (i0, i1)[a]], b, c]
        out.append((role, verts))
    return out


# ---------------------------------------------------------- family: solid


def _solid(tile_params: TileParams) -> list[tuple[str, np.ndarray]]:
    return [("solid", _box((0, 0, 0), (1, 1, 1)))]


def _solid_attrs(tile_params: TileParams) -> dict[str, float]:
    return {"ar": tile_params.center("ar"), "material": float(MATERIALS[tile_params.categories.get("material", "thermal")])}


FAMILIES: dict[str, Family] = {
    f.name: f
    for f in (
        Family(
            "shelled_box",
            "hollow box, corner-blended wall thickness (26 blocks); shell=single keeps the x_max wall only",
            (ParamSpec("wall", 0.01, 0.5, 0.1, True, "wall thickness as a fraction of the tile edge"),),
            {"shell": ("closed", "single"), "material": ("none", *MATERIALS)},
            _shelled_box,
            _shelled_periodic,
            _material,
        ),
        Family(
            "tube_lattice",
            "three orthogonal square struts through a central node; walls=z adds fixed plates",
            (
                ParamSpec("d_x", 0.05, 0.6, 0.3, True, "width of the strut along x"),
                ParamSpec("d_y", 0.05, 0.6, 0.3, True, "width of the strut along y"),
                ParamSpec("d_z", 0.05, 0.6, 0.3, True, "width of the strut along z"),
            ),
            {"walls": ("none", "z"), "material": ("none", *MATERIALS)},
            _tube_lattice,
            lambda tile_params: (0, 1, 2),
            _material,
        ),
        Family(
            "hx",
            "heat-exchanger tile: hot wall | hot channel | separator | cold channel | cold wall along x",
            (
                ParamSpec("h", 0.25, 4.0, 1.0, True, "hot-to-cold channel area ratio"),
                ParamSpec("m", 0.02, 0.3, 0.1, True, "metal thickness as a fraction of the tile width"),
            ),
            {"material": ("none", *MATERIALS)},
            _hx,
            lambda tile_params: (0, 1, 2),
            _material,
        ),
        Family(
            "solid",
            "full unit cube with accelerant/retardant factor and material class channels",
            (ParamSpec("ar", 1e-6, 1e6, 1.0, False, "burn-rate multiplier"),),
            {"material": ("thermal", "insulator", "electrical")},
            _solid,
            lambda tile_params: (0, 1, 2),
            _solid_attrs,
        ),
    )
}


def get_family(family) -> Family:
    if isinstance(family, Family):
        return family
    try:
        return FAMILIES[family]
    except KeyError:
        raise ConfigError(f"unknown tile family {family!r}; known: {sorted(FAMILIES)}") from None


def make_params(family, values: Mapping | None = None, categories: Mapping | None = None) -> TileParams:
    """Family defaults overridden by ``values``/``categories`` (validated)."""
    fam = get_family(family)
    base = fam.defaults()
    values = dict(values or {})
    for name in values:
        fam.spec(name)
    cats = dict(base.categories)
    for k, v in (categories or {}).items():
        if k not in fam.categories:
            raise ConfigError(f"family {fam.name!r} has no category {k!r}")
        if v not in fam.categories[k]:
            raise ParameterValidationError(f"category {k}={v!r} not in {list(fam.categories[k])}")
        cats[k] = v
    return TileParams({**base.values, **values}, fam.bounds, cats)


# ----------------------------------------------------------------- builders


def instantiate(family, tile_params: TileParams | Mapping | None = None, check: bool = True) -> MicroTile:
    """Build a validated tile of ``family`` for parameters ``tile_params``.

    Raises :class:`ParameterValidationError` for out-of-bound values and
    :class:`GeometryError` when a block folds (non-positive Jacobian at a
    5^3 sample grid) or leaves the unit cube.
    """
    fam = get_family(family)
    if tile_params is None:
        tile_params = fam.defaults()
    elif not isinstance(tile_params, TileParams):
        tile_params = make_params(fam, tile_params)
    else:
        for name in tile_params.values:
            fam.spec(name)
        missing = [p.name for p in fam.params if p.name not in tile_params.values]
        if missing:
            tile_params = make_params(fam, {**tile_params.values}, tile_params.categories)
    for p in fam.params:
        if not p.blend and isinstance(tile_params.values[p.name], tuple):
            raise ParameterValidationError(f"parameter {p.name!r} of {fam.name!r} takes a single value")
    attrs = fam.attributes(tile_params)
    raw = fam.build(tile_params)
    blocks = tuple(hex_block(verts, tuple(attrs.values())) for _, verts in raw)
    tile = MicroTile(
        fam.name,
        blocks,
        tuple(r for r, _ in raw),
        tuple(tile_boundary_sides(b) for b in blocks),
        tile_params,
        fam.periodic(tile_params),
        tuple(attrs),
    )
    if check:
        validate_tile(tile)
    return tile


def validate_tile(tile: MicroTile, samples: int = 5, tol: float = 1e-9) -> None:
    from .validation import jacobian_minima

    for b in tile.blocks:
        if b.control[..., :3].min() < -tol or b.control[..., :3].max() > 1 + tol:
            raise GeometryError(f"{tile.family}: block leaves the unit cube")
    for n, (det, where) in enumerate(jacobian_minima(tile.blocks, samples)):
        if not det > 0:
            raise GeometryError(
                f"{tile.family}: block {n} ({tile.roles[n]}) has det(J)={det:.3e} at {where.tolist()}; "
                f"parameter combination {tile.params.to_dict()['values']} rejected"
            )
    if tile.params.is_scalar:
        for axis in tile.periodic:
            dev = periodicity_deviation(tile, axis)
            if dev > tol:
                raise GeometryError(f"{tile.family}: faces normal to {'xyz'[axis]} do not coincide (deviation {dev:.3e})")


def face_nets_on(tile: MicroTile, tile_face: int) -> list[np.ndarray]:
    nets = []
    for b, sides in zip(tile.blocks, tile.sides):
        for side, tf in sides.items():
            if tf == tile_face:
                nets.append(face_net(b, side))
    return nets


def periodicity_deviation(tile: MicroTile, axis: int) -> float:
    """Max control-net mismatch between the min and unit-translated max faces."""
    lo = face_nets_on(tile, 2 * axis)
    shift = np.zeros(3)
    shift[axis] = 1.0
    lo = [n + shift for n in lo]
    hi = face_nets_on(tile, 2 * axis + 1)
    if len(lo) != len(hi):
        return np.inf
    if not lo:
        return 0.0
    pairs, ua, ub = match_faces(lo, hi, tol=1e-6)
    if ua or ub:
        return np.inf
    return max(dev for _, _, dev in pairs)


def params_from_fields(family, fields: Mapping[str, SplineMap], index, dims, edges=None,
                       fixed: Mapping | None = None, categories: Mapping | None = None) -> TileParams:
    """Per-tile parameters sampled from scalar fields over the macro domain.

    Blendable parameters take the eight cell-corner values, the rest the
    value at the cell centre.  ``edges`` gives the cell boundaries per
    direction (default: uniform over the fields' domain).
    """
    fam = get_family(family)
    names = {p.name for p in fam.params}
    unknown = sorted(set(fields) - names)
    if unknown:
        raise ConfigError(f"fields {unknown} do not name parameters of {fam.name!r} (has {sorted(names)})")
    if any(not 0 <= i < n for i, n in zip(index, dims)):
        raise ConfigError(f"cell index {tuple(index)} outside grid {tuple(dims)}")
    values = dict(fixed or {})
    for name, fld in fields.items():
        if fld.domain_dim != 3 or fld.range_dim != 1:
            raise ConfigError(f"field {name!r} must be a trivariate scalar map")
        ed = edges if edges is not None else [np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(fld.domain, dims)]
        lo = np.array([ed[j][index[j]] for j in range(3)])
        hi = np.array([ed[j][index[j] + 1] for j in range(3)])
        if fam.spec(name).blend:
            pts = lo + CORNERS * (hi - lo)
            values[name] = tuple(float(x) for x in evaluate(fld, pts)[:, 0])
        else:
            values[name] = float(evaluate(fld, 0.5 * (lo + hi))[0, 0])
    return make_params(fam, values, categories)
