"""Geometric verification: C0 conformity, Jacobian sign, volume and area.

Integrals use Gauss-Legendre quadrature per Bezier span.  Polynomial
volumes pick the order that integrates det(J) exactly; directions along
which a rational map's weights vary use ``TOL.rational_order`` points per
span.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .config import TOL
from .errors import ArgumentError
from .faces import face_net, nearest_deviation, pair_coincident
from .spline import SplineMap, extract_face, tensor_apply

log = logging.getLogger(__name__)


# ------------------------------------------------------------- quadrature


def gauss_nodes(kv, order: int) -> tuple[np.ndarray, np.ndarray]:
    """GL nodes and weights on every span of a knot vector."""
    x, w = np.polynomial.legendre.leggauss(order)
    br = kv.breaks
    nodes, weights = [], []
    for a, b in zip(br[:-1], br[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _stack_partials(knots, hom: np.ndarray, axes_nodes) -> tuple[np.ndarray, list[np.ndarray]]:
    """Homogeneous values and first partials on a tensor grid, batched.

    ``hom`` is ``(B, n_0, ..., k)``; returns arrays of shape ``(B, m_0, ..., k)``.
    """
    vals = [kv.collocation(t) for kv, t in zip(knots, axes_nodes)]
    ders = [kv.collocation(t, deriv=1) for kv, t in zip(knots, axes_nodes)]
    h = tensor_apply(vals, hom, first_axis=1)
    dh = []
    for j in range(len(knots)):
        mats = list(vals)
        mats[j] = ders[j]
        dh.append(tensor_apply(mats, hom, first_axis=1))
    return h, dh


def _geometry_partials(knots, ctrl, weights, axes_nodes):
    """Euclidean partials of the geometry channels; list of ``(B, m..., 3)``."""
    if weights is None:
        _, dh = _stack_partials(knots, ctrl[..., :3], axes_nodes)
        return dh
    w = weights[..., None]
    hom = np.concatenate([ctrl[..., :3] * w, w], axis=-1)
    h, dh = _stack_partials(knots, hom, axes_nodes)
    W = h[..., -1:]
    x = h[..., :-1] / W
    return [(d[..., :-1] - d[..., -1:] * x) / W for d in dh]


def rational_axes(weights: np.ndarray | None, d: int) -> list[bool]:
    """Directions along which the weights vary (the integrand is rational there)."""
    if weights is None:
        return [False] * d
    w = weights.reshape((-1,) + weights.shape[-d:]) if weights.ndim > d else weights[None]
    scale = float(np.abs(w).max())
    return [bool(np.ptp(w, axis=1 + j).max() > 1e-13 * scale) for j in range(d)]


def quad_orders(knots, weights: np.ndarray | None, polynomial) -> list[int]:
    """GL points per span and direction: ``polynomial(p)`` where the weights are
    constant, ``TOL.rational_order`` where they vary."""
    rat = rational_axes(weights, len(knots))
    return [TOL.rational_order if r else polynomial(kv.degree) for kv, r in zip(knots, rat)]


def _volume_order(p: int) -> int:
    return max(1, math.ceil(1.5 * p + 0.5))


def _area_order(p: int) -> int:
    return max(TOL.area_order, p + 1)


def _grouped(maps: Sequence[SplineMap]):
    groups: dict = {}
    for i, m in enumerate(maps):
        groups.setdefault((m.knots, m.is_rational), []).append(i)
    return groups


def volumes(maps: Sequence[SplineMap], order: int | None = None) -> np.ndarray:
    """Signed volume of each trivariate, batched over maps sharing knots."""
    out = np.zeros(len(maps))
    for (knots, rational), idx in _grouped(maps).items():
        m0 = maps[idx[0]]
        if m0.domain_dim != 3:
            raise ArgumentError("volume needs trivariates")
        ctrl = np.stack([maps[i].control for i in idx])
        wts = np.stack([maps[i].weights for i in idx]) if rational else None
        orders = [int(order)] * 3 if order is not None else quad_orders(knots, wts, _volume_order)
        nw = [gauss_nodes(kv, n) for kv, n in zip(knots, orders)]
        du, dv, dw = _geometry_partials(knots, ctrl, wts, [n for n, _ in nw])
        det = np.einsum("...i,...i->...", du, np.cross(dv, dw))
        W = np.einsum("i,j,k->ijk", nw[0][1], nw[1][1], nw[2][1])
        if np.any(det < 0):
            log.warning("negative Jacobian encountered; volume is signed")
        out[idx] = np.einsum("bijk,ijk->b", det, W)
    return out


def surface_areas(maps: Sequence[SplineMap], order: int | None = None) -> np.ndarray:
    """Area of each surface map (domain dimension 2)."""
    out = np.zeros(len(maps))
    for (knots, rational), idx in _grouped(maps).items():
        m0 = maps[idx[0]]
        if m0.domain_dim != 2:
            raise ArgumentError("surface area needs bivariate maps")
        ctrl = np.stack([maps[i].control for i in idx])
        wts = np.stack([maps[i].weights for i in idx]) if rational else None
        orders = [int(order)] * 2 if order is not None else quad_orders(knots, wts, _area_order)
        nw = [gauss_nodes(kv, n) for kv, n in zip(knots, orders)]
        du, dv = _geometry_partials(knots, ctrl, wts, [n for n, _ in nw])
        jac = np.linalg.norm(np.cross(du, dv), axis=-1)
        out[idx] = np.einsum("bij,i,j->b", jac, nw[0][1], nw[1][1])
    return out


def _flatten(obj) -> list[SplineMap]:
    if isinstance(obj, SplineMap):
        return [obj]
    if hasattr(obj, "all_maps"):
        return list(obj.all_maps())
    if hasattr(obj, "blocks"):
        return list(obj.blocks)
    return list(obj)


def volume(obj, order: int | None = None) -> float:
    """Total volume of a trivariate, tile, structure or list of trivariates."""
    maps = [m for m in _flatten(obj) if m.domain_dim == 3]
    return float(volumes(maps, order).sum()) if maps else 0.0


def surface_area(obj, order: int | None = None, tol: float | None = None) -> float:
    """Boundary area.

    A surface map gives its own area; a trivariate the area of its six
    faces.  For tiles and structures, faces shared by two blocks are
    interior and excluded.
    """
    if isinstance(obj, SplineMap):
        if obj.domain_dim == 2:
            return float(surface_areas([obj], order)[0])
        if obj.domain_dim != 3:
            raise ArgumentError("surface area needs a surface or trivariate")
        faces = [extract_face(obj, s) for s in range(6)]
        return float(surface_areas(faces, order).sum())
    maps = [m for m in _flatten(obj) if m.domain_dim == 3]
    faces = exterior_faces(maps, tol)
    return float(surface_areas([extract_face(maps[i], s) for i, s in faces], order).sum()) if faces else 0.0


def exterior_faces(maps: Sequence[SplineMap], tol: float | None = None) -> list[tuple[int, int]]:
    """(map, side) of every face not coincident with another block's face."""
    keys = [(i, s) for i in range(len(maps)) for s in range(6)]
    nets = [face_net(maps[i], s) for i, s in keys]
    if tol is None:
        tol = TOL.merge_rel * _diag(maps)
    internal = set()
    for a, b, _ in pair_coincident(nets, [k[0] for k in keys], tol):
        internal.update((a, b))
    return [k for n, k in enumerate(keys) if n not in internal and not _degenerate(nets[n], tol)]


def _degenerate(net: np.ndarray, tol: float) -> bool:
    pts = net.reshape(-1, 3)
    return float(np.ptp(pts, axis=0).max()) <= tol


def _diag(maps: Iterable[SplineMap]) -> float:
    boxes = np.array([m.bbox() for m in maps])
    if boxes.size == 0:
        return 1.0
    lo, hi = boxes[:, 0].min(axis=0), boxes[:, 1].max(axis=0)
    return max(float(np.linalg.norm(hi - lo)), 1e-300)


# ---------------------------------------------------------------- Jacobian


def _sample_axes(m: SplineMap, n: int) -> list[np.ndarray]:
    axes = []
    for kv in m.knots:
        br = kv.breaks
        pts = np.concatenate([np.linspace(a, b, n) for a, b in zip(br[:-1], br[1:])])
        axes.append(np.unique(pts))
    return axes


def jacobian_minima(maps: Sequence[SplineMap], samples: int | None = None) -> list[tuple[float, np.ndarray]]:
    """Minimum det(J) and its parameter location for each trivariate."""
    n = samples or TOL.jacobian_samples
    out: list = [None] * len(maps)
    for (knots, rational), idx in _grouped(maps).items():
        m0 = maps[idx[0]]
        if m0.domain_dim != 3 or m0.range_dim < 3:
            raise ArgumentError("Jacobian check needs geometry-bearing trivariates")
        axes = _sample_axes(m0, n)
        ctrl = np.stack([maps[i].control for i in idx])
        wts = np.stack([maps[i].weights for i in idx]) if rational else None
        du, dv, dw = _geometry_partials(knots, ctrl, wts, axes)
        det = np.einsum("...i,...i->...", du, np.cross(dv, dw))
        flat = det.reshape(len(idx), -1)
        arg = flat.argmin(axis=1)
        shape = det.shape[1:]
        for b, i in enumerate(idx):
            loc = np.unravel_index(arg[b], shape)
            out[i] = (float(flat[b, arg[b]]), np.array([axes[j][loc[j]] for j in range(3)]))
    return out


def check_jacobian(m: SplineMap, samples: int | None = None) -> tuple[float, np.ndarray]:
    """Minimum det(J) over a per-span sample grid (a sampling certificate, not a proof)."""
    return jacobian_minima([m], samples)[0]


# ------------------------------------------------------------- conformity


@dataclass(frozen=True)
class InterfaceRecord:
    cell_a: tuple[int, int, int]
    cell_b: tuple[int, int, int]
    axis: int
    max_deviation: float
    faces_a: int
    faces_b: int


@dataclass
class ConformityReport:
    tol: float
    interfaces: list[InterfaceRecord] = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max((r.max_deviation for r in self.interfaces), default=0.0)

    @property
    def failures(self) -> list[InterfaceRecord]:
        return [r for r in self.interfaces if not r.max_deviation <= self.tol]

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> dict:
        return {
            "interfaces": len(self.interfaces),
            "failures": len(self.failures),
            "max_deviation": self.max_deviation,
            "tol": self.tol,
            "passed": self.passed,
        }

    def lines(self) -> list[str]:
        out = [f"conformity: {len(self.interfaces)} interfaces, tol={self.tol:.3e}, max deviation={self.max_deviation:.3e}"]
        for r in self.failures:
            out.append(f"  FAIL {r.cell_a} -> {r.cell_b} axis {'xyz'[r.axis]}: deviation {r.max_deviation:.3e}")
        out.append("PASS" if self.passed else "FAIL")
        return out


def interface_nets(ms, cell, tile_face: int) -> list[np.ndarray]:
    """Composed control nets of the faces of ``cell`` lying on one tile face."""
    rec = ms.cells[cell]
    nets = []
    for m, sides in zip(rec.maps, rec.sides):
        for side, tf in sides.items():
            if tf == tile_face:
                nets.append(face_net(m, side))
    return nets


def check_c0(ms, tol: float | None = None) -> ConformityReport:
    """Compare the composed face nets across every interior grid interface.

    Every face on one side of an interface must coincide (after orientation
    alignment) with a face on the other side, and vice versa.
    """
    if tol is None:
        tol = TOL.merge_rel * ms.diagonal()
    if tol <= 0:
        raise ArgumentError("tol must be positive")
    report = ConformityReport(tol)
    for a, b, axis in ms.adjacency:
        na = interface_nets(ms, a, 2 * axis + 1)
        nb = interface_nets(ms, b, 2 * axis)
        devs = nearest_deviation(na, nb, stop=tol) + nearest_deviation(nb, na, stop=tol)
        if len(na) != len(nb) or not devs:
            worst = np.inf if (na or nb) else 0.0
        else:
            worst = max(devs)
        report.interfaces.append(InterfaceRecord(a, b, axis, float(worst), len(na), len(nb)))
    return report
