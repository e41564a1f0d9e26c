import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_macro, random_map
from microsynth.composition import compose, compose_many, localize, plan
from microsynth.errors import CompositionError, DomainError
from microsynth.spline import KnotVector, SplineMap, evaluate, identity_map, with_channels
from microsynth.shapes import scaled_identity

seeds = st.integers(0, 2**31 - 1)


def tile_map(rng, degrees, spans=(1, 1, 1), k=3):
    """Random polynomial map whose geometry lies in (0.05, 0.95)^3."""
    m = random_map(rng, degrees, spans, k)
    ctrl = np.array(m.control)
    ctrl[..., :3] = rng.uniform(0.05, 0.95, ctrl[..., :3].shape)
    return SplineMap(m.knots, ctrl)


def direct(macro_map, micro, pts):
    return evaluate(macro_map, evaluate(micro, pts)[:, :3])


def test_identity_macro_reproduces_tile(rng):
    micro = tile_map(rng, (2, 1, 3))
    C = compose(identity_map(), micro)
    pts = rng.uniform(size=(100, 3))
    np.testing.assert_allclose(evaluate(C, pts), evaluate(micro, pts), atol=1e-12)


def test_scale_by_two(rng):
    micro = tile_map(rng, (2, 2, 2))
    C = compose(scaled_identity((2, 2, 2)), micro)
    pts = rng.uniform(size=(100, 3))
    np.testing.assert_allclose(evaluate(C, pts), 2 * evaluate(micro, pts), atol=1e-12)


def test_random_cubic_macro_quadratic_tile(rng):
    macro_map = random_macro(rng, (3, 3, 3))
    micro = tile_map(rng, (2, 2, 2))
    C = compose(macro_map, micro)
    pts = rng.uniform(size=(500, 3))
    assert np.abs(evaluate(C, pts) - direct(macro_map, micro, pts)).max() < 1e-10


@settings(max_examples=15, deadline=None)
@given(seeds, st.tuples(*[st.integers(1, 3)] * 3), st.tuples(*[st.integers(1, 3)] * 3))
def test_exactness_property(seed, t_deg, m_deg):
    rng = np.random.default_rng(seed)
    macro_map = random_macro(rng, t_deg)
    micro = tile_map(rng, m_deg, (1, 2, 1))
    C = compose(macro_map, micro)
    pts = rng.uniform(size=(200, 3))
    assert np.abs(evaluate(C, pts) - direct(macro_map, micro, pts)).max() < 1e-10


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_degree_bound(seed):
    rng = np.random.default_rng(seed)
    t_deg = tuple(int(x) for x in rng.integers(1, 4, 3))
    m_deg = tuple(int(x) for x in rng.integers(1, 4, 3))
    macro_map, micro = random_macro(rng, t_deg), tile_map(rng, m_deg)
    C = compose(macro_map, micro)
    bound = plan(macro_map, micro).degree_bound
    assert all(c <= b for c, b in zip(C.degrees, bound))
    assert bound == tuple(p * sum(t_deg) for p in m_deg)


def test_attribute_channels_pass_through(rng):
    micro = with_channels(tile_map(rng, (2, 1, 1)), [3.5, -1.0])
    micro = SplineMap(micro.knots, np.concatenate([micro.control[..., :3], rng.standard_normal(micro.shape + (2,))], -1))
    macro_map = random_macro(rng, (2, 2, 2))
    C = compose(macro_map, micro)
    assert C.range_dim == 5
    pts = rng.uniform(size=(60, 3))
    np.testing.assert_allclose(evaluate(C, pts)[:, 3:], evaluate(micro, pts)[:, 3:], atol=1e-12)


def test_locality(rng):
    macro_map = random_macro(rng, (2, 3, 2), (2, 2, 2))
    micro = SplineMap(tile_map(rng, (2, 2, 2)).knots, 0.05 + 0.4 * rng.uniform(size=(3, 3, 3, 3)))
    box = np.array([[0, 0.5]] * 3)
    pts = rng.uniform(size=(100, 3))
    np.testing.assert_allclose(evaluate(compose(localize(macro_map, box), micro), pts), evaluate(compose(macro_map, micro), pts), atol=1e-12)


def test_localize_bezier_full_box_is_unchanged(rng):
    macro_map = random_macro(rng, (2, 2, 2))
    L = localize(macro_map, macro_map.domain)
    np.testing.assert_array_equal(L.control, macro_map.control)


def test_localize_extracts_a_span(rng):
    macro_map = random_macro(rng, (2, 2, 2), (2, 1, 1))
    L = localize(macro_map, [[0, 0.5], [0, 0.5], [0, 0.5]])
    assert L.knots[0].n_spans == 1
    pts = rng.uniform(0, 0.5, (50, 3))
    np.testing.assert_allclose(evaluate(L, pts), evaluate(macro_map, pts), atol=1e-12)


@pytest.mark.parametrize("box", [[[0.2, 0.2], [0, 1], [0, 1]], [[0, 1.5], [0, 1], [0, 1]]])
def test_localize_bad_boxes(box):
    with pytest.raises(DomainError):
        localize(identity_map(), box)


def test_straddling_image_is_rejected_with_direction():
    macro_map = identity_map(spans=(1, 2, 1))
    micro = SplineMap.bezier(np.stack(np.meshgrid(*[[0.3, 0.7]] * 3, indexing="ij"), -1))
    with pytest.raises(CompositionError, match="direction y"):
        compose(macro_map, micro)


def test_image_leaving_domain_is_rejected():
    micro = SplineMap.bezier(np.stack(np.meshgrid(*[[0.5, 1.2]] * 3, indexing="ij"), -1))
    with pytest.raises(CompositionError, match="leaves"):
        compose(identity_map(), micro)


def test_rational_operands_rejected():
    w = np.ones((2, 2, 2))
    R = SplineMap(identity_map().knots, identity_map().control, w)
    with pytest.raises(CompositionError):
        compose(R, identity_map())


def test_multi_span_tile_is_c0_at_interior_knots(rng):
    micro = tile_map(rng, (2, 2, 1), (3, 1, 1))
    macro_map = random_macro(rng, (2, 2, 2))
    C = compose(macro_map, micro)
    pts = rng.uniform(size=(200, 3))
    assert np.abs(evaluate(C, pts) - direct(macro_map, micro, pts)).max() < 1e-10
    np.testing.assert_allclose(C.knots[0].breaks, micro.knots[0].breaks)


def test_batch_equals_individual(rng):
    macro_map = random_macro(rng, (2, 2, 2), (2, 2, 2))
    maps = [SplineMap.bezier(0.05 + 0.4 * rng.uniform(size=(2, 3, 2, 3))) for _ in range(6)]
    batch = compose_many(macro_map, maps)
    for micro, C in zip(maps, batch):
        np.testing.assert_array_equal(C.control, compose(macro_map, micro).control)


def test_batch_error_carries_label():
    micro = SplineMap.bezier(np.stack(np.meshgrid(*[[0.3, 0.7]] * 3, indexing="ij"), -1))
    with pytest.raises(CompositionError, match=r"cell \(1, 2, 3\)"):
        compose_many(identity_map(spans=(2, 1, 1)), [micro], labels=["cell (1, 2, 3)"])
