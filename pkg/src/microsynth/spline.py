"""Tensor-product B-spline maps of domain dimension 1 to 3.

A :class:`SplineMap` is an immutable tensor-product B-spline from a box in
R^d into R^k.  The first three range channels are geometry, anything beyond
is an attribute channel carried along by every operation.  Rational maps
store a separate weight grid and are evaluated projectively.

Only clamped (open) knot vectors are supported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import TOL
from .errors import ArgumentError, DomainError, NumericalError

SIDES = ("u_min", "u_max", "v_min", "v_max", "w_min", "w_max")


def side_index(side: str | int | tuple[int, int]) -> tuple[int, int]:
    """Normalise ``"w_min"`` style names (or side numbers 0..5) to ``(axis, 0|1)``."""
    if isinstance(side, tuple):
        return side
    if isinstance(side, (int, np.integer)) and 0 <= side < 6:
        return int(side) // 2, int(side) % 2
    try:
        i = SIDES.index(side)
    except ValueError:
        raise ArgumentError(f"unknown side {side!r}; expected one of {SIDES}") from None
    return i // 2, i % 2


@dataclass(frozen=True, eq=False)
class KnotVector:
    values: np.ndarray
    degree: int

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        p = int(self.degree)
        if p < 0:
            raise ArgumentError("degree must be non-negative")
        if v.ndim != 1 or v.size < 2 * p + 2:
            raise ArgumentError(f"need at least {2 * p + 2} knots for degree {p}")
        if np.any(np.diff(v) < 0):
            raise ArgumentError("knot values must be non-decreasing")
        if not (np.all(v[: p + 1] == v[0]) and np.all(v[-p - 1 :] == v[-1])):
            raise ArgumentError("knot vector must be clamped (end knots repeated degree+1 times)")
        if v[0] >= v[-1]:
            raise ArgumentError("knot vector has an empty domain")
        interior = v[p + 1 : v.size - p - 1]
        if interior.size:
            _, counts = np.unique(interior, return_counts=True)
            if counts.max() > max(p, 1):
                raise ArgumentError("interior knot multiplicity exceeds the degree")
        v.flags.writeable = False
        br = np.unique(v)
        br.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "degree", p)
        object.__setattr__(self, "_breaks", br)

    @classmethod
    def uniform(cls, degree: int, spans: int = 1, lo: float = 0.0, hi: float = 1.0) -> "KnotVector":
        inner = np.linspace(lo, hi, spans + 1)[1:-1]
        return cls(np.concatenate([[lo] * (degree + 1), inner, [hi] * (degree + 1)]), degree)

    @classmethod
    def from_breaks(cls, degree: int, breaks: Sequence[float], multiplicity: int | None = None) -> "KnotVector":
        """Clamped knots on ``breaks``; interior knots repeated ``multiplicity`` times (default 1)."""
        b = np.asarray(breaks, dtype=float)
        m = 1 if multiplicity is None else multiplicity
        inner = np.repeat(b[1:-1], m)
        return cls(np.concatenate([[b[0]] * (degree + 1), inner, [b[-1]] * (degree + 1)]), degree)

    @property
    def n_basis(self) -> int:
        return self.values.size - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.values[0]), float(self.values[-1])

    @property
    def breaks(self) -> np.ndarray:
        return self._breaks

    @property
    def n_spans(self) -> int:
        return self.breaks.size - 1

    def multiplicity(self, t: float) -> int:
        return int(np.count_nonzero(self.values == t))

    def greville(self) -> np.ndarray:
        p = self.degree
        if p == 0:
            return 0.5 * (self.values[:-1] + self.values[1:])
        v = self.values
        return np.array([v[i + 1 : i + p + 1].mean() for i in range(self.n_basis)])

    def find_span(self, t: np.ndarray) -> np.ndarray:
        """Index s with ``U[s] <= t < U[s+1]``; the right end maps to the last span."""
        v, p = self.values, self.degree
        s = np.searchsorted(v, t, side="right") - 1
        return np.clip(s, p, self.n_basis - 1)

    def basis(self, t, deriv: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Non-zero basis values (and optionally first derivatives) at ``t``.

        Returns ``(span, N)``; ``N[m, r]`` belongs to basis function
        ``span[m] - degree + r``.  With ``deriv=1`` the result has shape
        ``(m, 2, p+1)`` holding values then derivatives.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        span = self.find_span(t)
        table = _basis_table(self.values, self.degree, span, t)
        vals = table[-1]
        if deriv == 0:
            return span, vals
        p = self.degree
        out = np.zeros((t.size, 2, p + 1))
        out[:, 0] = vals
        if p > 0:
            U = self.values
            low = table[-2]
            for r in range(p + 1):
                i = span - p + r
                d = np.zeros(t.size)
                if r >= 1:
                    den = U[i + p] - U[i]
                    d += np.divide(low[:, r - 1], den, out=np.zeros(t.size), where=den > 0)
                if r <= p - 1:
                    den = U[i + p + 1] - U[i + 1]
                    d -= np.divide(low[:, r], den, out=np.zeros(t.size), where=den > 0)
                out[:, 1, r] = p * d
        return span, out

    def collocation(self, params, deriv: int = 0) -> np.ndarray:
        """Dense ``(len(params), n_basis)`` matrix of basis values (or first derivatives)."""
        params = np.asarray(params, dtype=float)
        span, N = self.basis(params, deriv=deriv)
        if deriv:
            N = N[:, 1]
        B = np.zeros((params.size, self.n_basis))
        rows = np.arange(params.size)[:, None]
        cols = span[:, None] - self.degree + np.arange(self.degree + 1)
        B[rows, cols] = N
        return B

    def __eq__(self, other):
        return (
            isinstance(other, KnotVector)
            and self.degree == other.degree
            and self.values.shape == other.values.shape
            and bool(np.all(self.values == other.values))
        )

    def __hash__(self):
        return hash((self.degree, self.values.tobytes()))

    def __repr__(self):
        return f"KnotVector(degree={self.degree}, values={self.values.tolist()})"


def _basis_table(U: np.ndarray, p: int, span: np.ndarray, t: np.ndarray) -> list[np.ndarray]:
    """Triangular Cox-de Boor table; entry q holds the degree-q values."""
    m = t.size
    table = [np.ones((m, 1))]
    left = np.zeros((p + 1, m))
    right = np.zeros((p + 1, m))
    for j in range(1, p + 1):
        left[j] = t - U[span + 1 - j]
        right[j] = U[span + j] - t
        prev = table[-1]
        cur = np.empty((m, j + 1))
        saved = np.zeros(m)
        for r in range(j):
            temp = prev[:, r] / (right[r + 1] + left[j - r])
            cur[:, r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        cur[:, j] = saved
        table.append(cur)
    return table


def _as_knots(k, degree=None) -> KnotVector:
    if isinstance(k, KnotVector):
        return k
    if degree is None:
        raise ArgumentError("raw knot arrays need an explicit degree")
    return KnotVector(np.asarray(k, dtype=float), degree)


@dataclass(frozen=True, eq=False)
class SplineMap:
    """Immutable tensor-product B-spline map.

    ``control`` has shape ``(n_0, ..., n_{d-1}, k)``.  ``weights`` (rational
    maps only) has shape ``(n_0, ..., n_{d-1})``; control points are stored
    in Euclidean (not homogeneous) form.
    """

    knots: tuple[KnotVector, ...]
    control: np.ndarray
    weights: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        knots = tuple(self.knots)
        if not 1 <= len(knots) <= 3:
            raise ArgumentError("domain dimension must be 1, 2 or 3")
        ctrl = np.array(self.control, dtype=float)
        d = len(knots)
        if ctrl.ndim == d:
            ctrl = ctrl[..., None]
        if ctrl.ndim != d + 1:
            raise ArgumentError(f"control grid must have {d + 1} axes, got {ctrl.ndim}")
        expect = tuple(kv.n_basis for kv in knots)
        if ctrl.shape[:d] != expect:
            raise ArgumentError(f"control grid extents {ctrl.shape[:d]} do not match basis counts {expect}")
        ctrl.flags.writeable = False
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "control", ctrl)
        if self.weights is not None:
            w = np.array(self.weights, dtype=float)
            if w.shape != expect:
                raise ArgumentError("weight grid shape must match the control grid")
            if np.any(w <= 0):
                raise ArgumentError("weights must be positive")
            w.flags.writeable = False
            object.__setattr__(self, "weights", w)

    @classmethod
    def bezier(cls, control, weights=None, domain=None) -> "SplineMap":
        """Single-span map; degrees follow from the control grid extents."""
        ctrl = np.asarray(control, dtype=float)
        d = ctrl.ndim - 1
        domain = domain or [(0.0, 1.0)] * d
        knots = tuple(KnotVector.uniform(n - 1, 1, lo, hi) for n, (lo, hi) in zip(ctrl.shape[:d], domain))
        return cls(knots, ctrl, weights)

    @property
    def domain_dim(self) -> int:
        return len(self.knots)

    @property
    def range_dim(self) -> int:
        return self.control.shape[-1]

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(kv.degree for kv in self.knots)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.control.shape[:-1]

    @property
    def domain(self) -> np.ndarray:
        return np.array([kv.domain for kv in self.knots])

    @property
    def is_rational(self) -> bool:
        return self.weights is not None

    @property
    def is_bezier(self) -> bool:
        return all(kv.n_spans == 1 for kv in self.knots)

    def homogeneous(self) -> np.ndarray:
        """Control grid as ``(w*ctrl, w)`` (or ``ctrl`` for polynomial maps)."""
        if self.weights is None:
            return self.control
        w = self.weights[..., None]
        return np.concatenate([self.control * w, w], axis=-1)

    @classmethod
    def from_homogeneous(cls, knots, hom: np.ndarray, rational: bool) -> "SplineMap":
        if not rational:
            return cls(tuple(knots), hom)
        w = hom[..., -1]
        return cls(tuple(knots), hom[..., :-1] / w[..., None], w)

    def bbox(self, channels=slice(0, 3)) -> np.ndarray:
        pts = self.control[..., channels].reshape(-1, self.control[..., channels].shape[-1])
        return np.stack([pts.min(axis=0), pts.max(axis=0)])

    def diagonal(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def __repr__(self):
        kind = "rational " if self.is_rational else ""
        return f"<SplineMap {kind}d={self.domain_dim} k={self.range_dim} degrees={self.degrees} shape={self.shape}>"


# ---------------------------------------------------------------- evaluation


def _check_points(m: SplineMap, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != m.domain_dim:
        raise DomainError(f"points have {pts.shape[-1]} coordinates, map has domain dimension {m.domain_dim}")
    dom = m.domain
    eps = TOL.domain_eps * np.maximum(1.0, np.abs(dom).max(axis=1))
    bad = (pts < dom[:, 0] - eps) | (pts > dom[:, 1] + eps)
    if np.any(bad):
        row = int(np.argwhere(bad)[0][0])
        raise DomainError(f"point {pts[row].tolist()} outside domain {dom.tolist()}")
    return np.clip(pts, dom[:, 0], dom[:, 1])


def _contract(hom: np.ndarray, knots, spans, bases) -> np.ndarray:
    """Sum_{i} N_i(p) C_i for per-direction local bases; returns (m, k)."""
    d = len(knots)
    m = spans[0].size
    idx = []
    for j, kv in enumerate(knots):
        ij = spans[j][:, None] - kv.degree + np.arange(kv.degree + 1)
        shape = [m] + [1] * d
        shape[j + 1] = kv.degree + 1
        idx.append(ij.reshape(shape))
    local = hom[tuple(idx)]  # (m, p0+1, ..., k)
    for j in range(d):
        # contract the leading remaining local axis each time
        local = np.einsum("mi,mi...->m...", bases[j], local)
    return local


def _eval_raw(m: SplineMap, pts: np.ndarray, order: tuple[int, ...] | None = None) -> np.ndarray:
    """Homogeneous value (or partial derivative of given per-direction order)."""
    hom = m.homogeneous()
    out = []
    for start in range(0, pts.shape[0], TOL.chunk):
        chunk = pts[start : start + TOL.chunk]
        spans, bases = [], []
        for j, kv in enumerate(m.knots):
            o = 0 if order is None else order[j]
            s, N = kv.basis(chunk[:, j], deriv=o)
            spans.append(s)
            bases.append(N if o == 0 else N[:, 1])
        out.append(_contract(hom, m.knots, spans, bases))
    if not out:
        return np.zeros((0, hom.shape[-1]))
    return np.concatenate(out, axis=0)


def evaluate(m: SplineMap, pts) -> np.ndarray:
    """Vectorised evaluation at an ``(n, d)`` array of domain points."""
    pts = _check_points(m, pts)
    h = _eval_raw(m, pts)
    if m.is_rational:
        return h[:, :-1] / h[:, -1:]
    return h


def eval(m: SplineMap, p) -> np.ndarray:  # noqa: A001 - mirrors the operation name
    """Evaluate a single domain point; returns a length-k vector."""
    p = np.asarray(p, dtype=float)
    if p.ndim == 0:
        p = p[None]
    return evaluate(m, p[None, :])[0]


def partials(m: SplineMap, pts) -> tuple[np.ndarray, np.ndarray]:
    """Values ``(n, k)`` and first partials ``(n, d, k)`` at domain points."""
    pts = _check_points(m, pts)
    d = m.domain_dim
    h = _eval_raw(m, pts)
    dh = np.stack([_eval_raw(m, pts, tuple(int(i == j) for i in range(d))) for j in range(d)], axis=1)
    if not m.is_rational:
        return h, dh
    w = h[:, -1:]
    val = h[:, :-1] / w
    der = (dh[:, :, :-1] - dh[:, :, -1:] * val[:, None, :]) / w[:, None, :]
    return val, der


def jacobians(m: SplineMap, pts) -> np.ndarray:
    """Partials of the geometry channels, shape ``(n, d, 3)``; row j is d/du_j."""
    if m.range_dim < 3:
        raise ArgumentError("map carries no geometry (range dimension < 3)")
    return partials(m, pts)[1][:, :, :3]


def jacobian(m: SplineMap, p) -> np.ndarray:
    """``d x 3`` matrix of partials at one point; row j is the derivative along u_j."""
    return jacobians(m, np.asarray(p, dtype=float)[None, :])[0]


def grid_points(*axes) -> np.ndarray:
    """Tensor grid of parameter values, first axis slowest, shape (n, d)."""
    mesh = np.meshgrid(*[np.asarray(a, dtype=float) for a in axes], indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def evaluate_grid(m: SplineMap, *axes) -> np.ndarray:
    """Evaluate on a tensor grid; result shape ``(len(a0), ..., k)``."""
    pts = grid_points(*axes)
    return evaluate(m, pts).reshape(tuple(len(a) for a in axes) + (-1,))


def basis_sum(m: SplineMap, pts) -> np.ndarray:
    """Sum of all tensor basis values at each point (partition-of-unity check)."""
    pts = _check_points(m, pts)
    ones = SplineMap(m.knots, np.ones(m.shape + (1,)))
    return _eval_raw(ones, pts)[:, 0]


# ------------------------------------------------------------ knot insertion


def _insert_axis(kv: KnotVector, ctrl: np.ndarray, t: float, times: int) -> tuple[KnotVector, np.ndarray]:
    """Boehm insertion of ``t`` ``times`` times along axis 0 of ``ctrl``."""
    U = kv.values.copy()
    p = kv.degree
    for _ in range(times):
        k = int(np.searchsorted(U, t, side="right") - 1)
        k = min(max(k, p), U.size - p - 2)
        s = int(np.count_nonzero(U == t))
        n = ctrl.shape[0]
        Q = np.empty((n + 1,) + ctrl.shape[1:])
        Q[: k - p + 1] = ctrl[: k - p + 1]
        Q[k - s + 1 :] = ctrl[k - s :]
        for i in range(k - p + 1, k - s + 1):
            a = (t - U[i]) / (U[i + p] - U[i])
            Q[i] = a * ctrl[i] + (1.0 - a) * ctrl[i - 1]
        U = np.insert(U, k + 1, t)
        ctrl = Q
    return KnotVector(U, p), ctrl


def insert_knot(m: SplineMap, direction: int, t: float, times: int = 1) -> SplineMap:
    """Insert ``t`` into the knot vector of ``direction`` ``times`` times (exact)."""
    kv = m.knots[direction]
    lo, hi = kv.domain
    if not lo < t < hi:
        raise ArgumentError(f"knot {t} must lie strictly inside the domain ({lo}, {hi})")
    room = kv.degree - kv.multiplicity(t)
    times = min(times, room)
    if times <= 0:
        return m
    hom = np.moveaxis(m.homogeneous(), direction, 0)
    nkv, tile_params = _insert_axis(kv, hom, t, times)
    knots = list(m.knots)
    knots[direction] = nkv
    return SplineMap.from_homogeneous(knots, np.moveaxis(tile_params, 0, direction), m.is_rational)


def subdivide(m: SplineMap, direction: int, t: float) -> tuple[SplineMap, SplineMap]:
    """Split at parameter ``t`` of ``direction``; the pieces keep their parameter ranges."""
    kv = m.knots[direction]
    lo, hi = kv.domain
    if not lo < t < hi:
        raise ArgumentError(f"split parameter {t} must lie strictly inside ({lo}, {hi})")
    p = kv.degree
    if p == 0:
        raise ArgumentError("cannot subdivide a degree-0 direction")
    hom = np.moveaxis(m.homogeneous(), direction, 0)
    nkv, tile_params = _insert_axis(kv, hom, t, p - kv.multiplicity(t))
    U = nkv.values
    a = int(np.searchsorted(U, t, side="left"))
    left_k = KnotVector(np.concatenate([U[:a], [t] * (p + 1)]), p)
    right_k = KnotVector(np.concatenate([[t] * (p + 1), U[a + p :]]), p)
    left_P, right_P = tile_params[:a], tile_params[a - 1 :]
    out = []
    for kk, PP in ((left_k, left_P), (right_k, right_P)):
        knots = list(m.knots)
        knots[direction] = kk
        out.append(SplineMap.from_homogeneous(knots, np.moveaxis(PP, 0, direction), m.is_rational))
    return out[0], out[1]


def split_many(m: SplineMap, direction: int, params: Sequence[float]) -> list[SplineMap]:
    """Subdivide at every value of ``params`` (sorted, interior); returns len+1 pieces."""
    pieces = []
    rest = m
    for t in sorted(params):
        left, rest = subdivide(rest, direction, t)
        pieces.append(left)
    pieces.append(rest)
    return pieces


def restrict(m: SplineMap, box) -> SplineMap:
    """Restriction to a sub-box of the domain (exact, by subdivision)."""
    box = np.asarray(box, dtype=float)
    out = m
    for j in range(m.domain_dim):
        lo, hi = out.knots[j].domain
        a, b = box[j]
        if a > lo:
            out = subdivide(out, j, a)[1]
        if b < hi:
            out = subdivide(out, j, b)[0]
    return out


def bezier_patches(m: SplineMap) -> list[tuple[tuple[int, ...], SplineMap]]:
    """All Bezier pieces, keyed by their span index per direction."""
    pieces = [((), m)]
    for j in range(m.domain_dim):
        nxt = []
        for key, piece in pieces:
            br = piece.knots[j].breaks[1:-1]
            for s, sub in enumerate(split_many(piece, j, br) if br.size else [piece]):
                nxt.append((key + (s,), sub))
        pieces = nxt
    return pieces


def reparametrize(m: SplineMap, domain) -> SplineMap:
    """Affinely relabel each direction's knots onto new intervals (same image)."""
    knots = []
    for kv, (a, b) in zip(m.knots, np.asarray(domain, dtype=float)):
        lo, hi = kv.domain
        knots.append(KnotVector(a + (kv.values - lo) * (b - a) / (hi - lo), kv.degree))
    return SplineMap(tuple(knots), m.control, m.weights)


# ---------------------------------------------------------- faces & helpers


def extract_face(m: SplineMap, side) -> SplineMap:
    """Boundary map of a trivariate (or curve of a surface) on ``side``."""
    axis, end = side_index(side)
    if axis >= m.domain_dim or m.domain_dim < 2:
        raise ArgumentError(f"side {side!r} invalid for domain dimension {m.domain_dim}")
    idx = 0 if end == 0 else -1
    ctrl = np.take(m.control, idx, axis=axis)
    w = None if m.weights is None else np.take(m.weights, idx, axis=axis)
    knots = tuple(kv for j, kv in enumerate(m.knots) if j != axis)
    return SplineMap(knots, ctrl, w)


def embed_face_point(m: SplineMap, side, ab) -> np.ndarray:
    """Map face parameters back to the full domain point of ``m``."""
    axis, end = side_index(side)
    ab = list(np.atleast_1d(ab))
    ab.insert(axis, m.knots[axis].domain[end])
    return np.array(ab, dtype=float)


def affine_transform(m: SplineMap, A, b) -> SplineMap:
    """Apply ``x -> A x + b`` to the geometry channels (attributes untouched)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    ctrl = np.array(m.control)
    ctrl[..., :3] = ctrl[..., :3] @ A.T + b
    return SplineMap(m.knots, ctrl, m.weights)


def with_channels(m: SplineMap, values) -> SplineMap:
    """Append constant attribute channels (exact under any weights)."""
    values = np.atleast_1d(np.asarray(values, dtype=float))
    extra = np.broadcast_to(values, m.shape + values.shape)
    return SplineMap(m.knots, np.concatenate([m.control, extra], axis=-1), m.weights)


def identity_map(domain=((0.0, 1.0),) * 3, spans=(1, 1, 1), degrees=(1, 1, 1)) -> SplineMap:
    """The identity trivariate over ``domain`` (any degree and span count)."""
    knots = [KnotVector.uniform(p, s, lo, hi) for p, s, (lo, hi) in zip(degrees, spans, domain)]
    axes = [kv.greville() for kv in knots]
    ctrl = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return SplineMap(tuple(knots), ctrl)


# ------------------------------------------------------------- interpolation


def tensor_solve(mats: Sequence[np.ndarray], data: np.ndarray, first_axis: int = 0) -> np.ndarray:
    """Solve ``(B_0 x ... x B_{d-1}) X = data`` one axis at a time.

    The d solve axes start at ``first_axis``; any leading batch axes and the
    trailing channel axis are carried along.
    """
    X = data
    for j, B in enumerate(mats):
        ax = first_axis + j
        X = np.moveaxis(X, ax, 0)
        shp = X.shape
        X = np.linalg.solve(B, X.reshape(shp[0], -1)).reshape(shp)
        X = np.moveaxis(X, 0, ax)
    return X


def tensor_apply(mats: Sequence[np.ndarray], data: np.ndarray, first_axis: int = 0) -> np.ndarray:
    X = data
    for j, B in enumerate(mats):
        X = np.moveaxis(np.tensordot(B, X, axes=([1], [first_axis + j])), 0, first_axis + j)
    return X


def interpolate_tensor(samples, degrees, knots=None, params=None) -> SplineMap:
    """Tensor-product interpolant through a grid of samples.

    ``samples`` has shape ``(n_0, ..., n_{d-1}, k)``.  ``knots`` defaults to
    uniform single-span (Bezier) vectors on [0, 1]; ``params`` default to the
    Greville abscissae.  The collocation residual is checked against
    ``TOL.solve_residual``.
    """
    samples = np.asarray(samples, dtype=float)
    d = len(degrees)
    if samples.ndim == d:
        samples = samples[..., None]
    if knots is None:
        knots = [KnotVector.uniform(p, 1) for p in degrees]
    knots = [_as_knots(k, p) for k, p in zip(knots, degrees)]
    for j, kv in enumerate(knots):
        if kv.n_basis != samples.shape[j]:
            raise ArgumentError(f"direction {j}: {samples.shape[j]} samples but {kv.n_basis} basis functions")
    if params is None:
        params = [kv.greville() for kv in knots]
    params = [np.asarray(t, dtype=float) for t in params]
    for j, t in enumerate(params):
        if np.any(np.diff(t) <= 0):
            raise ArgumentError(f"direction {j}: parameters must be strictly increasing")
    mats = [kv.collocation(t) for kv, t in zip(knots, params)]
    try:
        ctrl = tensor_solve(mats, samples)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular collocation system: {exc}") from None
    check_residual(mats, ctrl, samples)
    return SplineMap(tuple(knots), ctrl)


def check_residual(mats, ctrl, samples, first_axis: int = 0, tol: float | None = None) -> float:
    tol = TOL.solve_residual if tol is None else tol
    back = tensor_apply(mats, ctrl, first_axis)
    scale = max(1.0, float(np.abs(samples).max()))
    res = float(np.abs(back - samples).max()) / scale
    if res > tol:
        raise NumericalError(f"collocation residual {res:.3e} exceeds {tol:.1e}")
    return res
