"""Serialization and export: spline JSON, structure files, OBJ, legacy VTK, CSV.

Spline file format (JSON, keys sorted, floats written with Python's
shortest round-trip repr so values survive a save/load cycle bit for bit)::

    {"format": "microsynth-spline/1",
     "degrees": [p0, ...], "knots": [[...], ...], "range_dim": k,
     "shape": [n0, ..., k], "control": [flat C-order values],
     "weights": null | [flat C-order values]}

A structure file wraps the macro map and every cell's composed maps with
their provenance.  All writers are deterministic: identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .config import TOL
from .errors import ConfigError
from .spline import KnotVector, SplineMap, evaluate, grid_points
from .synthesis import CellRecord, MicroStructure, grid_adjacency
from .tiles import TileParams, get_family

SPLINE_FORMAT = "microsynth-spline/1"
STRUCTURE_FORMAT = "microsynth-structure/1"


# ---------------------------------------------------------------- splines


def spline_to_dict(m: SplineMap) -> dict:
    return {
        "format": SPLINE_FORMAT,
        "degrees": list(m.degrees),
        "knots": [kv.values.tolist() for kv in m.knots],
        "range_dim": m.range_dim,
        "shape": list(m.control.shape),
        "control": m.control.ravel().tolist(),
        "weights": None if m.weights is None else m.weights.ravel().tolist(),
    }


def spline_from_dict(d: Mapping) -> SplineMap:
    if d.get("format") != SPLINE_FORMAT:
        raise ConfigError(f"not a spline record (format {d.get('format')!r})")
    try:
        knots = tuple(KnotVector(np.array(k, dtype=float), p) for k, p in zip(d["knots"], d["degrees"]))
        shape = tuple(d["shape"])
        ctrl = np.array(d["control"], dtype=float).reshape(shape)
        w = None if d.get("weights") is None else np.array(d["weights"], dtype=float).reshape(shape[:-1])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed spline record: {exc}") from None
    return SplineMap(knots, ctrl, w)


def _dump(obj, path) -> None:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text + "\n")


def _load(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None


def save_spline(m: SplineMap, path) -> None:
    _dump(spline_to_dict(m), path)


def load_spline(path) -> SplineMap:
    return spline_from_dict(_load(path))


# -------------------------------------------------------------- structures


def structure_to_dict(ms: MicroStructure) -> dict:
    cells = []
    for idx in sorted(ms.cells):
        rec = ms.cells[idx]
        cells.append({
            "index": list(idx),
            "box": rec.box.tolist(),
            "params": rec.params.to_dict(),
            "roles": list(rec.roles),
            "sides": [{str(k): v for k, v in sorted(s.items())} for s in rec.sides],
            "maps": [spline_to_dict(m) for m in rec.maps],
            "placed": [spline_to_dict(m) for m in rec.placed],
        })
    return {
        "format": STRUCTURE_FORMAT,
        "family": ms.family,
        "dims": list(ms.dims),
        "edges": [e.tolist() for e in ms.edges],
        "attributes": list(ms.attributes),
        "macro": spline_to_dict(ms.macro),
        "cells": cells,
    }


def structure_from_dict(d: Mapping) -> MicroStructure:
    if d.get("format") != STRUCTURE_FORMAT:
        raise ConfigError(f"not a structure file (format {d.get('format')!r})")
    fam = get_family(d["family"])
    cells = {}
    for c in d["cells"]:
        idx = tuple(c["index"])
        values = {k: (tuple(v) if isinstance(v, list) else v) for k, v in c["params"]["values"].items()}
        tile_params = TileParams(values, fam.bounds, c["params"].get("categories", {}))
        cells[idx] = CellRecord(
            idx,
            tuple(spline_from_dict(m) for m in c["maps"]),
            tuple(spline_from_dict(m) for m in c.get("placed", [])),
            tuple(c["roles"]),
            tuple({int(k): v for k, v in s.items()} for s in c["sides"]),
            tile_params,
            np.array(c["box"], dtype=float),
        )
    dims = tuple(d["dims"])
    return MicroStructure(fam.name, spline_from_dict(d["macro"]), dims, tuple(np.array(e) for e in d["edges"]),
                          cells, grid_adjacency(dims), tuple(d.get("attributes", ())))


def save_structure(ms: MicroStructure, path) -> None:
    _dump(structure_to_dict(ms), path)


def load_structure(path) -> MicroStructure:
    return structure_from_dict(_load(path))


# --------------------------------------------------------------------- OBJ


def _face_grid(m: SplineMap, side: int, resolution: int) -> tuple[np.ndarray, int, int]:
    """Points on one face, ``resolution`` samples per direction per span."""
    axis, end = divmod(side, 2)
    axes = []
    for j, kv in enumerate(m.knots):
        if j == axis:
            axes.append(np.array([kv.domain[end]]))
            continue
        br = kv.breaks
        pts = np.concatenate([np.linspace(a, b, resolution) for a, b in zip(br[:-1], br[1:])])
        axes.append(np.unique(pts))
    free = [a for j, a in enumerate(axes) if j != axis]
    pts = evaluate(m, grid_points(*axes))[:, :3]
    return pts, free[0].size, free[1].size


def _outward(side: int) -> bool:
    # for a right-handed map, the cross product of the two remaining tangents points outward on these sides
    axis, end = divmod(side, 2)
    return end == (0 if axis == 1 else 1)


def tessellate(maps: Sequence[SplineMap], faces: Iterable[tuple[int, int]], resolution: int):
    """Triangles of the given ``(map, side)`` faces as ``(points, triangles)``."""
    points, tris = [], []
    base = 0
    for i, side in faces:
        pts, na, nb = _face_grid(maps[i], side, resolution)
        g = np.arange(na * nb).reshape(na, nb) + base
        a, b, c, d = g[:-1, :-1].ravel(), g[1:, :-1].ravel(), g[1:, 1:].ravel(), g[:-1, 1:].ravel()
        t = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
        if not _outward(side):
            t = t[:, ::-1]
        points.append(pts)
        tris.append(t)
        base += pts.shape[0]
    if not points:
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=int)
    return np.concatenate(points), np.concatenate(tris)


def merge_vertices(points: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge points closer than ``tol``; returns (unique points, old -> new index).

    Clusters are formed by union-find over all close pairs and numbered in
    order of first occurrence, so the result is deterministic.
    """
    n = points.shape[0]
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(cKDTree(points).query_pairs(r=tol)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(n)])
    uniq, first = np.unique(roots, return_index=True)
    order = np.argsort(first)
    new_of_root = np.empty(n, dtype=int)
    new_of_root[uniq[order]] = np.arange(uniq.size)
    remap = new_of_root[roots]
    return points[uniq[order]], remap


def _groups(obj):
    """(group name, maps) per tile of a structure, grain or map list."""
    if isinstance(obj, MicroStructure):
        return [(f"tile_{i}_{j}_{k}", list(obj.cells[(i, j, k)].maps)) for i, j, k in sorted(obj.cells)]
    if hasattr(obj, "tiles") and hasattr(obj, "n_layers"):
        return [(f"tile_{i}_{j}_{k}", [r.map]) for (i, j, k), r in sorted(obj.tiles.items(), key=lambda kv: kv[0][::-1])]
    maps = [obj] if isinstance(obj, SplineMap) else list(obj)
    return [(f"block_{n}", [m]) for n, m in enumerate(maps)]


def export_obj(obj, path, resolution: int = 4, tol: float | None = None) -> dict:
    """Boundary triangulation as OBJ, one group per tile.

    Faces shared by two blocks of the same tile are interior and skipped.
    Returns counts ``{"groups", "vertices", "triangles"}``.
    """
    from .validation import _diag, exterior_faces

    if resolution < 2:
        raise ConfigError("resolution must be >= 2 samples per direction per span")
    groups = _groups(obj)
    all_maps = [m for _, ms in groups for m in ms]
    if tol is None:
        tol = TOL.merge_rel * _diag(all_maps)
    pts_all, tris_all, spans = [], [], []
    base = 0
    for name, maps in groups:
        faces = exterior_faces(maps, tol)
        pts, tris = tessellate(maps, faces, resolution)
        pts_all.append(pts)
        tris_all.append(tris + base)
        spans.append((name, tris.shape[0]))
        base += pts.shape[0]
    points = np.concatenate(pts_all) if pts_all else np.zeros((0, 3))
    uniq, remap = merge_vertices(points, tol) if points.size else (points, np.zeros(0, dtype=int))
    lines = ["# microsynth OBJ export", f"# groups {len(groups)}"]
    lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in uniq.tolist()]
    ntri = 0
    for (name, count), tris in zip(spans, tris_all):
        lines.append(f"g {name}")
        for a, b, c in remap[tris].tolist() if count else []:
            if a == b or b == c or a == c:
                continue
            lines.append(f"f {a + 1} {b + 1} {c + 1}")
            ntri += 1
    Path(path).write_text("\n".join(lines) + "\n")
    return {"groups": len(groups), "vertices": int(uniq.shape[0]), "triangles": ntri}


# --------------------------------------------------------------------- VTK

HEX_CORNERS = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]


def _cell_table(obj) -> tuple[list[SplineMap], dict[str, list[float]], set[str]]:
    """Blocks and per-block scalars of a structure or grain."""
    scalars: dict[str, list[float]] = {}
    ints: set[str] = set()
    maps: list[SplineMap] = []
    if isinstance(obj, MicroStructure):
        attrs = list(obj.attributes)
        first = obj.cells[min(obj.cells)] if obj.cells else None
        params = sorted(first.params.values) if first else []
        for idx in sorted(obj.cells):
            rec = obj.cells[idx]
            for n, m in enumerate(rec.maps):
                maps.append(m)
                centre = m.control[(0,) * m.domain_dim] if m.range_dim > 3 else None
                for a, name in enumerate(attrs):
                    scalars.setdefault(name, []).append(float(centre[3 + a]))
                for p in params:
                    scalars.setdefault(p, []).append(rec.params.center(p))
                for j, name in enumerate(("i", "j", "k")):
                    scalars.setdefault(f"cell_{name}", []).append(float(idx[j]))
        ints.update({"material", "cell_i", "cell_j", "cell_k"})
    elif hasattr(obj, "tiles") and hasattr(obj, "n_layers"):
        for key in sorted(obj.tiles, key=lambda t: t[::-1]):
            r = obj.tiles[key]
            maps.append(r.map)
            scalars.setdefault("ar", []).append(r.ar)
            scalars.setdefault("layer", []).append(float(key[2]))
            scalars.setdefault("depth", []).append(r.depth)
            scalars.setdefault("front_area", []).append(r.area)
        ints.add("layer")
    else:
        raise ConfigError("field export needs a micro-structure or a grain model")
    return maps, scalars, ints


def export_vtk(obj, path, names: Sequence[str] | None = None) -> dict:
    """Legacy-VTK unstructured grid, one hexahedron per block, with cell scalars.

    ``names`` selects scalars (default: all available).  Asking for a
    scalar that does not exist raises :class:`ConfigError` listing the
    available ones.
    """
    maps, scalars, ints = _cell_table(obj)
    available = sorted(scalars)
    wanted = available if names is None else list(names)
    missing = [n for n in wanted if n not in scalars]
    if missing or not wanted:
        raise ConfigError(f"attributes {missing or wanted} not available; available channels: {available}")
    pts = []
    for m in maps:
        dom = m.domain
        corners = np.array([[dom[j, c[j]] for j in range(3)] for c in HEX_CORNERS])
        pts.append(evaluate(m, corners)[:, :3])
    points = np.concatenate(pts) if pts else np.zeros((0, 3))
    n = len(maps)
    lines = ["# vtk DataFile Version 3.0", "microsynth cells", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {points.shape[0]} double"]
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in points.tolist()]
    lines.append(f"CELLS {n} {9 * n}")
    lines += ["8 " + " ".join(str(8 * c + q) for q in range(8)) for c in range(n)]
    lines.append(f"CELL_TYPES {n}")
    lines += ["12"] * n
    lines.append(f"CELL_DATA {n}")
    for name in wanted:
        vals = scalars[name]
        if name in ints:
            lines += [f"SCALARS {name} int 1", "LOOKUP_TABLE default"]
            lines += [str(int(round(v))) for v in vals]
        else:
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [repr(float(v)) for v in vals]
    Path(path).write_text("\n".join(lines) + "\n")
    return {"cells": n, "scalars": wanted}


export_fields = export_vtk


# --------------------------------------------------------------------- CSV


def write_thrust_csv(times, thrust, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "thrust"])
        for t, f in zip(np.asarray(times).tolist(), np.asarray(thrust).tolist()):
            w.writerow([repr(float(t)), repr(float(f))])


def write_trace_csv(trace, path) -> None:
    names = sorted({k for _, tile_params, _ in trace for k in tile_params})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", *names, "objective"])
        for it, tile_params, value in trace:
            w.writerow([it, *(repr(float(tile_params[n])) for n in names), repr(float(value))])
