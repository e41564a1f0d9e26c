"""Exact functional composition of a tile map into a trivariate macro map.

``compose(macro_map, micro)`` returns the spline map ``p -> macro_map(micro(p))``.
The macro map is first localised to the single knot span containing the
image of the tile, so the outer function is one Bezier piece.  Each Bezier
piece of the tile is then substituted symbolically: with ``X, Y, Z`` the
(span-normalised) geometry channels of the tile in Bernstein form,

    macro(X, Y, Z) = sum_i B_i(X) sum_j B_j(Y) sum_k c_ijk B_k(Z),

where every ``B_i(X) = C(a, i) X^i (1 - X)^(a - i)`` is built from Bernstein
products.  Products only combine coefficients with positive binomial
weights, so the result is exact up to round-off even at composed degree 27,
where collocation at Greville points is hopelessly ill-conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import comb

from .config import TOL
from .errors import CompositionError, DomainError
from .spline import KnotVector, SplineMap, bezier_patches, restrict

AXES = "xyz"


@dataclass(frozen=True)
class CompositionPlan:
    """Where and at which degree a tile map is composed."""

    span: tuple[int, ...]
    span_box: np.ndarray
    degrees: tuple[int, ...]
    knots: tuple[KnotVector, ...]

    @property
    def degree_bound(self) -> tuple[int, ...]:
        return self.degrees


def localize(macro_map: SplineMap, box) -> SplineMap:
    """Restriction of the macro map to ``box`` (a ``3 x 2`` array of intervals).

    When the box lies inside one knot span the result is a single Bezier
    piece; a box straddling knots yields the restricted B-spline.
    """
    box = np.asarray(box, dtype=float)
    dom = macro_map.domain
    if box.shape != dom.shape:
        raise DomainError(f"box must have shape {dom.shape}")
    eps = TOL.domain_eps * np.maximum(1.0, np.abs(dom).max(axis=1))
    if np.any(box[:, 1] - box[:, 0] <= 0):
        raise DomainError(f"degenerate box {box.tolist()}")
    if np.any(box[:, 0] < dom[:, 0] - eps) or np.any(box[:, 1] > dom[:, 1] + eps):
        raise DomainError(f"box {box.tolist()} outside domain {dom.tolist()}")
    box = np.clip(box, dom[:, :1], dom[:, 1:])
    return restrict(macro_map, box)


def span_of(macro_map: SplineMap, lo, hi) -> tuple[tuple[int, ...], np.ndarray]:
    """Knot-span index per direction whose box contains [lo, hi]."""
    idx, box = [], []
    for j, kv in enumerate(macro_map.knots):
        br = kv.breaks
        slack = TOL.span_rel * (br[-1] - br[0])
        if lo[j] < br[0] - slack or hi[j] > br[-1] + slack:
            raise CompositionError(
                f"tile image leaves the macro domain in direction {AXES[j]}: "
                f"[{lo[j]:.6g}, {hi[j]:.6g}] not in [{br[0]:.6g}, {br[-1]:.6g}]"
            )
        s = int(np.clip(np.searchsorted(br, lo[j] + slack, side="right") - 1, 0, br.size - 2))
        if hi[j] > br[s + 1] + slack:
            raise CompositionError(
                f"tile image straddles a knot of the macro map in direction {AXES[j]}: "
                f"[{lo[j]:.6g}, {hi[j]:.6g}] crosses {br[s + 1]:.6g}"
            )
        idx.append(s)
        box.append((br[s], br[s + 1]))
    return tuple(idx), np.array(box)


@lru_cache(maxsize=1024)
def composed_knots(kv: KnotVector, q: int) -> KnotVector:
    """Tile breakpoints at degree q; interior breaks become C0 (multiplicity q)."""
    lo, hi = kv.domain
    inner = np.repeat(kv.breaks[1:-1], max(q, 1))
    return KnotVector(np.concatenate([[lo] * (q + 1), inner, [hi] * (q + 1)]), q)


def plan(macro_map: SplineMap, micro: SplineMap) -> CompositionPlan:
    if macro_map.domain_dim != 3 or macro_map.range_dim < 3:
        raise CompositionError("macro map must be a trivariate with geometry channels")
    if macro_map.is_rational or micro.is_rational:
        raise CompositionError("composition with rational maps is not supported")
    if micro.range_dim < 3:
        raise CompositionError("tile map carries no geometry channels")
    lo, hi = micro.bbox()
    span, box = span_of(macro_map, lo, hi)
    total = sum(macro_map.degrees)
    degrees = tuple(p * total for p in micro.degrees)
    knots = tuple(composed_knots(kv, q) for kv, q in zip(micro.knots, degrees))
    return CompositionPlan(span, box, degrees, knots)


# ------------------------------------------------------- Bernstein algebra


@lru_cache(maxsize=None)
def _binom_tensor(degrees: tuple[int, ...]) -> np.ndarray:
    out = np.ones(())
    for n in degrees:
        out = np.multiply.outer(out, comb(n, np.arange(n + 1)))
    return out


def bern_mul(f: np.ndarray, g: np.ndarray, d: int) -> np.ndarray:
    """Product of tensor Bernstein polynomials on their last ``d`` axes.

    Leading axes broadcast.  Uses scaled coefficients, where the product is
    a plain discrete convolution.
    """
    m = tuple(s - 1 for s in f.shape[-d:])
    n = tuple(s - 1 for s in g.shape[-d:])
    fs = f * _binom_tensor(m)
    gs = g * _binom_tensor(n)
    if np.prod(f.shape[-d:]) > np.prod(g.shape[-d:]):
        fs, gs, m, n = gs, fs, n, m
    lead = np.broadcast_shapes(fs.shape[:-d], gs.shape[:-d])
    out_deg = tuple(a + b for a, b in zip(m, n))
    h = np.zeros(lead + tuple(k + 1 for k in out_deg))
    for idx in np.ndindex(*(a + 1 for a in m)):
        sl = (Ellipsis,) + tuple(slice(i, i + b + 1) for i, b in zip(idx, n))
        h[sl] += fs[(Ellipsis,) + idx + (None,) * d] * gs
    return h / _binom_tensor(out_deg)


def elevate(f: np.ndarray, target: tuple[int, ...], d: int) -> np.ndarray:
    """Degree elevation by multiplication with the constant 1."""
    have = tuple(s - 1 for s in f.shape[-d:])
    if have == tuple(target):
        return f
    one = np.ones(tuple(t - h + 1 for t, h in zip(target, have)))
    return bern_mul(f, one, d)


def _basis_of(x: np.ndarray, degree: int, d: int) -> list[np.ndarray]:
    """Bernstein polynomials ``B_i^degree(x)`` composed with Bernstein-form ``x``."""
    one = np.ones(x.shape[:-d] + (1,) * d)
    pw, cw = [one], [one]
    for _ in range(degree):
        pw.append(bern_mul(pw[-1], x, d))
        cw.append(bern_mul(cw[-1], 1.0 - x, d))
    return [comb(degree, i) * bern_mul(pw[i], cw[degree - i], d) for i in range(degree + 1)]


def compose_bezier_batch(Tb: SplineMap, box: np.ndarray, ctrl: np.ndarray) -> np.ndarray:
    """Compose Bezier pieces sharing one shape through the Bezier trivariate ``Tb``.

    ``ctrl`` has shape ``(B, n_0, ..., n_{d-1}, k)``; returns the composed
    Bernstein coefficients ``(B, ..., k)`` at degree ``deg(tile) * sum(deg(macro))``.
    """
    d = ctrl.ndim - 2
    geo = np.moveaxis(ctrl[..., :3], -1, 1)  # (B, 3, n...)
    geo = (geo - box[None, :, 0].reshape((1, 3) + (1,) * d)) / (box[:, 1] - box[:, 0]).reshape((1, 3) + (1,) * d)
    a, b, c = Tb.degrees
    Bx = _basis_of(geo[:, 0], a, d)
    By = _basis_of(geo[:, 1], b, d)
    Bz = np.stack(_basis_of(geo[:, 2], c, d), axis=1)  # (B, c+1, ...)
    Tc = Tb.control[..., :3]
    out = 0.0
    for i in range(a + 1):
        R = 0.0
        for j in range(b + 1):
            section = np.einsum("kc,bk...->bc...", Tc[i, j], Bz)  # (B, 3, ...)
            R = R + bern_mul(By[j][:, None], section, d)
        out = out + bern_mul(Bx[i][:, None], R, d)
    out = np.moveaxis(out, 1, -1)
    if ctrl.shape[-1] > 3:
        target = tuple(s - 1 for s in out.shape[1:-1])
        attrs = np.moveaxis(ctrl[..., 3:], -1, 1)
        attrs = np.moveaxis(elevate(attrs, target, d), 1, -1)
        out = np.concatenate([out, attrs], axis=-1)
    return out


# ------------------------------------------------------------- public API


def compose(macro_map: SplineMap, micro: SplineMap, cache: dict | None = None) -> SplineMap:
    """The spline map of ``macro_map(micro(p))``; the tile's attribute channels pass through unchanged."""
    return compose_many(macro_map, [micro], cache)[0]


def _localized(macro_map: SplineMap, pl: CompositionPlan, cache: dict | None) -> SplineMap:
    if cache is None:
        return localize(macro_map, pl.span_box)
    key = (id(macro_map), pl.span)
    if key not in cache:
        cache[key] = localize(macro_map, pl.span_box)
    return cache[key]


def compose_many(macro_map: SplineMap, maps: Sequence[SplineMap], cache: dict | None = None,
                 labels: Sequence | None = None) -> list[SplineMap]:
    """Compose a batch of tile maps; pieces sharing shape and span are batched.

    ``labels`` (one per map) are prefixed to composition errors.
    """
    cache = {} if cache is None else cache
    plans = []
    for i, micro in enumerate(maps):
        try:
            plans.append(plan(macro_map, micro))
        except CompositionError as exc:
            if labels is None:
                raise
            raise CompositionError(f"{labels[i]}: {exc}") from exc
    # (map index, patch key, patch) for every Bezier piece
    jobs: dict = {}
    patches = []
    for i, micro in enumerate(maps):
        pieces = [((0,) * micro.domain_dim, micro)] if micro.is_bezier else bezier_patches(micro)
        patches.append(pieces)
        for pk, piece in pieces:
            key = (plans[i].span, piece.shape, piece.range_dim)
            jobs.setdefault(key, []).append((i, pk, piece))
    results: dict = {}
    for (span, _, _), members in jobs.items():
        pl = plans[members[0][0]]
        Tb = _localized(macro_map, pl, cache)
        stack = np.stack([piece.control for _, _, piece in members])
        out = compose_bezier_batch(Tb, pl.span_box, stack)
        for b, (i, pk, _) in enumerate(members):
            results[(i, pk)] = out[b]
    composed = []
    for i, micro in enumerate(maps):
        pl = plans[i]
        if micro.is_bezier:
            composed.append(SplineMap(pl.knots, results[(i, patches[i][0][0])]))
            continue
        shape = tuple(kv.n_basis for kv in pl.knots)
        ctrl = np.zeros(shape + (micro.range_dim,))
        for pk, _ in patches[i]:
            sl = tuple(slice(s * q if q else s, (s * q if q else s) + q + 1) for s, q in zip(pk, pl.degrees))
            ctrl[sl] = results[(i, pk)]
        composed.append(SplineMap(pl.knots, ctrl))
    return composed
