"""Boundary-face bookkeeping and control-net face matching.

A face is addressed by ``(map index, side)`` with ``side`` in 0..5 meaning
``(axis, end) = divmod(side, 2)``.  Two faces coincide when their control
nets agree point by point under one of the eight orientation alignments of
a quadrilateral parameter domain.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .spline import SplineMap


def face_net(m: SplineMap, side: int) -> np.ndarray:
    """Geometry control net of one face, shape ``(n_a, n_b, 3)``."""
    axis, end = divmod(side, 2)
    return np.take(m.control[..., :3], 0 if end == 0 else -1, axis=axis)


def face_weights(m: SplineMap, side: int) -> np.ndarray | None:
    if m.weights is None:
        return None
    axis, end = divmod(side, 2)
    return np.take(m.weights, 0 if end == 0 else -1, axis=axis)


def orientations(net: np.ndarray) -> list[np.ndarray]:
    """All eight re-indexings of a 2D control net (flips and transpose)."""
    out = []
    bases = [net]
    if net.shape[0] == net.shape[1]:
        bases.append(np.swapaxes(net, 0, 1))
    for b in bases:
        for fa in (False, True):
            for fb in (False, True):
                v = b[::-1] if fa else b
                v = v[:, ::-1] if fb else v
                out.append(v)
    return out


def net_deviation(a: np.ndarray, b: np.ndarray, stop: float = 0.0) -> float:
    """Smallest max point distance between two nets over all alignments.

    The search ends early once an alignment within ``stop`` is found.
    """
    best = np.inf
    for v in orientations(b):
        if v.shape != a.shape:
            continue
        dev = float(np.sqrt(((a - v) ** 2).sum(axis=-1)).max())
        if dev < best:
            best = dev
            if dev <= stop:
                break
    return best


def tile_boundary_sides(m: SplineMap, tol: float = 1e-12) -> dict[int, int]:
    """Sides of a tile-local block lying on the unit-cube boundary.

    Maps block side -> tile face (same 0..5 encoding over x, y, z).
    """
    out = {}
    for side in range(2 * m.domain_dim):
        net = face_net(m, side)
        for axis in range(3):
            for end in (0, 1):
                if np.all(np.abs(net[..., axis] - end) <= tol):
                    out[side] = 2 * axis + end
    return out


def match_faces(nets_a, nets_b, tol: float) -> tuple[list[tuple[int, int, float]], list[int], list[int]]:
    """Pair faces of two lists whose control nets coincide within ``tol``.

    Returns ``(pairs, unmatched_a, unmatched_b)``; each pair is
    ``(index_a, index_b, deviation)``.  Candidates are screened by
    centroid distance, the final test is the full net comparison.  Greedy
    in index order, so the result is deterministic.
    """
    if not nets_a or not nets_b:
        return [], list(range(len(nets_a))), list(range(len(nets_b)))
    ca = np.array([n.reshape(-1, 3).mean(axis=0) for n in nets_a])
    cb = np.array([n.reshape(-1, 3).mean(axis=0) for n in nets_b])
    tree = cKDTree(cb)
    taken = np.zeros(len(nets_b), dtype=bool)
    pairs, un_a = [], []
    for i, c in enumerate(ca):
        cands = sorted(tree.query_ball_point(c, r=max(tol, 0.0) * 2 + 1e-300))
        found = None
        for j in cands:
            if taken[j] or nets_a[i].size != nets_b[j].size:
                continue
            dev = net_deviation(nets_a[i], nets_b[j], stop=tol)
            if dev <= tol:
                found = (j, dev)
                break
        if found is None:
            un_a.append(i)
        else:
            taken[found[0]] = True
            pairs.append((i, found[0], found[1]))
    return pairs, un_a, [j for j in range(len(nets_b)) if not taken[j]]


def nearest_deviation(nets_a, nets_b, stop: float = 0.0) -> list[float]:
    """For each net in ``nets_a``, the deviation to its best nearby partner.

    The centroid-nearest candidate is tried first; up to four neighbours are
    searched when it is not within ``stop``.
    """
    if not nets_b:
        return [np.inf] * len(nets_a)
    cb = np.array([n.reshape(-1, 3).mean(axis=0) for n in nets_b])
    tree = cKDTree(cb)
    out = []
    for n in nets_a:
        k = min(4, len(nets_b))
        _, idx = tree.query(n.reshape(-1, 3).mean(axis=0), k=k)
        best = np.inf
        for j in np.atleast_1d(idx):
            best = min(best, net_deviation(n, nets_b[j], stop=stop))
            if best <= stop:
                break
        out.append(best)
    return out


def pair_coincident(nets, owners, tol: float) -> list[tuple[int, int, float]]:
    """Pair coincident faces within one list, never pairing a face with its own owner.

    Each face joins at most one pair; candidates are visited in sorted
    index order, so the result is deterministic and independent of how
    often it is recomputed.
    """
    if len(nets) < 2:
        return []
    cent = np.array([n.reshape(-1, 3).mean(axis=0) for n in nets])
    cands = sorted(cKDTree(cent).query_pairs(r=tol * 2 + 1e-300))
    taken = np.zeros(len(nets), dtype=bool)
    pairs = []
    for i, j in cands:
        if taken[i] or taken[j] or owners[i] == owners[j] or nets[i].size != nets[j].size:
            continue
        dev = net_deviation(nets[i], nets[j], stop=tol)
        if dev <= tol:
            taken[i] = taken[j] = True
            pairs.append((i, j, dev))
    return pairs
