import dataclasses

import numpy as np
import pytest
from scipy.optimize import least_squares

from microsynth.errors import ArgumentError, GeometryError
from microsynth.fields import constant_field, field_from_function, linear_field
from microsynth.heat_exchanger import (
    build_hx,
    channel_areas,
    corner_samples,
    inverse_thickness,
    respace,
    separator_thickness,
    sew,
)
from microsynth.shapes import curved_duct, scaled_identity
from microsynth.spline import evaluate, extract_face, identity_map
from microsynth.synthesis import MicroStructure, synthesize
from microsynth.tiles import instantiate
from microsynth.validation import check_c0


# ----------------------------------------------------------------- respace


def test_uniform_weights_leave_map_unchanged():
    macro_map = curved_duct(spans=(3, 3, 3))
    R = respace(macro_map, [[1, 1, 1], None, [2, 2, 2]])
    assert R is macro_map


def test_weights_one_two_put_knot_at_a_third():
    macro_map = identity_map(spans=(2, 1, 1), degrees=(2, 1, 1))
    R = respace(macro_map, [[1, 2], None, None])
    np.testing.assert_allclose(R.knots[0].breaks, [0, 1 / 3, 1], atol=1e-15)


def test_respace_relabels_parameters_exactly():
    macro_map = curved_duct(spans=(4, 4, 4))
    R = respace(macro_map, [[1, 2, 3, 4], [4, 1, 1, 1], [1, 1, 2, 3]])
    rng = np.random.default_rng(1)
    u = rng.uniform(size=(100, 3))
    old = [macro_map.knots[j].breaks for j in range(3)]
    new = [R.knots[j].breaks for j in range(3)]
    v = np.stack([np.interp(u[:, j], old[j], new[j]) for j in range(3)], -1)
    np.testing.assert_allclose(evaluate(R, v), evaluate(macro_map, u), atol=1e-13)


def test_respaced_surface_points_lie_on_original_surface():
    macro_map = curved_duct(spans=(4, 4, 4))
    R = respace(macro_map, [[1, 2, 3, 4], [4, 1, 1, 1], [1, 1, 2, 3]])
    rng = np.random.default_rng(7)
    worst = 0.0
    for n in range(200):
        side = n % 6
        fR, fT = extract_face(R, side), extract_face(macro_map, side)
        q = evaluate(fR, rng.uniform(size=(1, 2)))[0]
        starts = np.stack(np.meshgrid(np.linspace(0.1, 0.9, 3), np.linspace(0.1, 0.9, 3)), -1).reshape(-1, 2)
        x0 = starts[np.argmin(np.linalg.norm(evaluate(fT, starts) - q, axis=1))]
        sol = least_squares(lambda ab: evaluate(fT, np.clip(ab, 0, 1)[None])[0] - q, x0,
                            bounds=([0, 0], [1, 1]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        worst = max(worst, float(np.linalg.norm(sol.fun)))
    assert worst < 1e-8


def test_respace_argument_errors():
    macro_map = curved_duct(spans=(2, 2, 2))
    with pytest.raises(ArgumentError):
        respace(macro_map, [[1, 0], None, None])
    with pytest.raises(ArgumentError):
        respace(macro_map, [[1, 2, 3], None, None])
    with pytest.raises(ArgumentError):
        respace(macro_map, [None, None])


# ------------------------------------------------------------ corner samples


def test_constant_field_corners():
    np.testing.assert_allclose(corner_samples(constant_field(2.5), (1, 2, 0), (3, 3, 2)), 2.5)


def test_x_field_corners_alternate():
    fld = field_from_function(lambda p: p[:, 0], degrees=(1, 1, 1))
    np.testing.assert_allclose(corner_samples(fld, (1, 0, 0), (2, 1, 1)), [0.5, 1.0] * 4, atol=1e-15)


def test_linear_field_corner_mean_is_centre_value():
    fld = linear_field(0.7, (0.3, -0.2, 0.5))
    c = corner_samples(fld, (2, 1, 3), (4, 3, 5))
    centre = np.array([2.5 / 4, 1.5 / 3, 3.5 / 5])
    assert c.mean() == pytest.approx(evaluate(fld, centre[None])[0, 0], abs=1e-14)


# --------------------------------------------------------- inverse thickness


def test_inverse_thickness_identity_and_scale():
    p = [0.3, 0.3, 0.3]
    assert inverse_thickness(identity_map(), 0.04, p) == pytest.approx(0.04)
    assert inverse_thickness(scaled_identity((2, 2, 2)), 0.04, p) == pytest.approx(0.02)
    assert inverse_thickness(scaled_identity((1, 3, 1)), 0.04, p, (0, 1, 0)) == pytest.approx(0.04 / 3)


def test_singular_macro_rejected():
    flat = scaled_identity((0.0, 1.0, 1.0))
    with pytest.raises(GeometryError):
        inverse_thickness(flat, 0.04, [0.5, 0.5, 0.5])
    with pytest.raises(GeometryError):
        inverse_thickness(scaled_identity((-1.0, 1.0, 1.0)), 0.04, [0.5, 0.5, 0.5])


# ------------------------------------------------------------------ build


def test_identity_ratio_one_is_symmetric():
    solid = build_hx(identity_map(), constant_field(1.0), constant_field(0.05), (2, 2, 2))
    assert solid.ok and solid.summary()["unmatched"] == 0
    for idx in solid.structure.cells:
        hot, cold = channel_areas(solid.structure, idx)
        assert hot == pytest.approx(cold, rel=1e-12)


def test_ratio_two_per_tile():
    solid = build_hx(curved_duct(), constant_field(2.0), constant_field(0.03), (4, 4, 4))
    ratios = [np.divide(*channel_areas(solid.structure, idx)) for idx in solid.structure.cells]
    assert np.allclose(ratios, 2.0, rtol=0.01)


def test_thickness_tracks_k_on_curved_duct():
    wall_thickness = 0.03
    solid = build_hx(curved_duct(), constant_field(2.0), constant_field(wall_thickness), (4, 4, 4))
    t = np.array([separator_thickness(solid.structure, idx) for idx in solid.structure.cells])
    assert np.all(np.abs(t / wall_thickness - 1) <= 0.05)


def test_every_interior_face_matched_once():
    solid = build_hx(curved_duct(spans=(2, 2, 2)), constant_field(2.0), constant_field(0.03), (4, 4, 4))
    # x interfaces join one cold wall to one hot wall; y and z interfaces join all 3 blocks
    x_faces, yz_faces = 3 * 4 * 4, 2 * 4 * 3 * 4
    assert len(solid.pairs) == x_faces + 3 * yz_faces
    assert solid.interior_faces == 2 * len(solid.pairs)
    partners = [b for _, b in solid.pairs] + [a for a, _ in solid.pairs]
    assert len(partners) == len(set(partners))


def test_nonpositive_fields_rejected():
    with pytest.raises(ArgumentError):
        build_hx(identity_map(), constant_field(-1.0), constant_field(0.03), (1, 1, 1))


def test_respacing_inside_build():
    macro_map = curved_duct(spans=(2, 2, 2))
    solid = build_hx(macro_map, constant_field(2.0), constant_field(0.03), (2, 2, 2), spacings=[[1, 3], None, [2, 1]])
    assert solid.ok
    np.testing.assert_allclose(solid.structure.edges[0], [0, 0.25, 1])
    np.testing.assert_allclose(solid.structure.edges[2], [0, 2 / 3, 1])


# ------------------------------------------------------------------- sew


@pytest.fixture(scope="module")
def pair_structure():
    return build_hx(identity_map(), constant_field(1.0), constant_field(0.05), (2, 1, 1)).structure


def replace_cell(ms: MicroStructure, idx, maps) -> MicroStructure:
    cells = dict(ms.cells)
    cells[idx] = dataclasses.replace(cells[idx], maps=tuple(maps))
    return dataclasses.replace(ms, cells=cells)


def test_sew_periodic_synthesis_matches_all():
    ms = synthesize(instantiate("shelled_box", {"wall": 0.1}), curved_duct(spans=(2, 2, 2)), (2, 2, 2))
    solid = sew(ms)
    assert solid.ok and solid.interior_faces > 0
    assert check_c0(ms).passed


def test_sew_symmetric_and_idempotent(pair_structure):
    a = sew(pair_structure)
    for x, y in a.merge.items():
        assert a.merge[y] == x
    assert sew(a.structure).pairs == a.pairs


def test_disjoint_tiles_have_no_matches(pair_structure):
    from microsynth.spline import affine_transform

    far = [affine_transform(m, np.eye(3), [10.0, 0, 0]) for m in pair_structure.cells[(1, 0, 0)].maps]
    solid = sew(replace_cell(pair_structure, (1, 0, 0), far))
    assert solid.pairs == []
    assert len(solid.unmatched) == solid.interior_faces == 2


def test_perturbed_face_reported_unmatched(pair_structure):
    tol = 1e-6
    maps = list(pair_structure.cells[(0, 0, 0)].maps)
    cold = maps[2]
    ctrl = np.array(cold.control)
    ctrl[-1, 0, 0, 0] += 10 * tol  # corner on the x_max face shared with cell (1, 0, 0)
    maps[2] = dataclasses.replace(cold, control=ctrl, _cache={})
    ms = replace_cell(pair_structure, (0, 0, 0), maps)
    solid = sew(ms, tol)
    assert sorted(solid.unmatched) == [((0, 0, 0), 2, 1), ((1, 0, 0), 0, 0)]
    assert not check_c0(ms, tol).passed
    assert "UNMATCHED" in "\n".join(solid.lines())


def test_sew_tolerance_must_be_positive(pair_structure):
    with pytest.raises(ArgumentError):
        sew(pair_structure, 0.0)
