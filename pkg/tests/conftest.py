"""Shared builders and independent oracles for the test suite."""

from __future__ import annotations

from math import comb

import numpy as np
import pytest

from microsynth.spline import KnotVector, SplineMap


def random_knots(rng, degree: int, spans: int, lo=0.0, hi=1.0) -> KnotVector:
    inner = np.sort(rng.uniform(lo, hi, spans - 1))
    inner = lo + (hi - lo) * (0.1 + 0.8 * (inner - lo) / (hi - lo)) if spans > 1 else inner
    return KnotVector(np.concatenate([[lo] * (degree + 1), inner, [hi] * (degree + 1)]), degree)


def random_map(rng, degrees, spans=None, k=3, scale=1.0, domain=None) -> SplineMap:
    spans = spans or (1,) * len(degrees)
    domain = domain or [(0.0, 1.0)] * len(degrees)
    knots = tuple(random_knots(rng, p, s, lo, hi) for p, s, (lo, hi) in zip(degrees, spans, domain))
    shape = tuple(kv.n_basis for kv in knots)
    return SplineMap(knots, scale * rng.standard_normal(shape + (k,)))


def random_macro(rng, degrees=(3, 3, 3), spans=(1, 1, 1), amplitude=0.08) -> SplineMap:
    """Identity plus a small random perturbation: a valid, non-folding trivariate."""
    knots = tuple(KnotVector.uniform(p, s) for p, s in zip(degrees, spans))
    g = [kv.greville() for kv in knots]
    X, Y, Z = np.meshgrid(*g, indexing="ij")
    ctrl = np.stack([X, Y, Z], axis=-1) + amplitude * rng.uniform(-1, 1, X.shape + (3,))
    return SplineMap(knots, ctrl)


def bernstein_to_monomial(ctrl: np.ndarray, axis: int) -> np.ndarray:
    """Monomial coefficients along one axis of a Bezier control grid on [0, 1]."""
    p = ctrl.shape[axis] - 1
    B = np.zeros((p + 1, p + 1))
    for j in range(p + 1):
        for i in range(j + 1):
            B[j, i] = comb(p, j) * comb(j, i) * (-1) ** (j - i)
    return np.moveaxis(np.tensordot(B, np.moveaxis(ctrl, axis, 0), axes=1), 0, axis)


def horner_eval(bez: SplineMap, pts: np.ndarray) -> np.ndarray:
    """Evaluate a polynomial Bezier map on the unit box via nested Horner on monomials."""
    coef = bez.control
    for a in range(bez.domain_dim):
        coef = bernstein_to_monomial(coef, a)
    out = []
    for p in np.atleast_2d(pts):
        c = coef
        for a in reversed(range(bez.domain_dim)):
            acc = np.zeros(c.shape[:a] + c.shape[a + 1 :])
            for j in reversed(range(c.shape[a])):
                acc = acc * p[a] + np.take(c, j, axis=a)
            c = acc
        out.append(c)
    return np.array(out)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
