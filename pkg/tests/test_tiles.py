import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microsynth.errors import ConfigError, GeometryError, ParameterValidationError
from microsynth.fields import constant_field, field_from_function, linear_field
from microsynth.spline import SplineMap, evaluate
from microsynth.tiles import (
    CORNERS,
    FAMILIES,
    TileParams,
    get_family,
    hx_positions,
    instantiate,
    make_params,
    params_from_fields,
    periodicity_deviation,
)
from microsynth.validation import check_jacobian, volume


def box_corners_and_centre(fam):
    names = [p.name for p in fam.params]
    bounds = [(p.lo, p.hi) for p in fam.params]
    pts = [dict(zip(names, combo)) for combo in itertools.product(*bounds)]
    pts.append({p.name: 0.5 * (p.lo + p.hi) for p in fam.params})
    return pts


def category_choices(fam):
    keys = sorted(fam.categories)
    for combo in itertools.product(*(fam.categories[k] for k in keys)):
        yield dict(zip(keys, combo))


def test_shelled_box_full_wall_is_solid_cube():
    assert volume(instantiate("shelled_box", {"wall": 0.5})) == pytest.approx(1.0, rel=1e-12)


def test_shelled_box_wall_point_one():
    assert volume(instantiate("shelled_box", {"wall": 0.1})) == pytest.approx(1 - 0.8**3, rel=1e-12)


def test_tube_diameter_zero_rejected():
    with pytest.raises(ParameterValidationError, match="d_x"):
        instantiate("tube_lattice", {"d_x": 0.0, "d_y": 0.0, "d_z": 0.0})


def test_tube_lattice_volume_matches_union_of_struts():
    d = 0.3
    expect = 3 * d * d * 1.0 - 2 * d**3  # three unit-length square struts, node counted once
    assert volume(instantiate("tube_lattice", {"d_x": d, "d_y": d, "d_z": d})) == pytest.approx(expect, rel=1e-12)


def test_unknown_family_and_parameter():
    with pytest.raises(ConfigError):
        get_family("lattice")
    with pytest.raises(ConfigError, match="thickness"):
        make_params("shelled_box", {"thickness": 0.1})
    with pytest.raises(ConfigError):
        make_params("shelled_box", categories={"colour": "red"})
    with pytest.raises(ParameterValidationError):
        make_params("shelled_box", categories={"shell": "open"})


def test_bounds_need_positive_width():
    with pytest.raises(ParameterValidationError):
        TileParams({"a": 0.1}, {"a": (0.1, 0.1)})


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_parameter_box_corners_valid_and_periodic(name):
    fam = FAMILIES[name]
    for values in box_corners_and_centre(fam):
        for cats in category_choices(fam):
            tile = instantiate(fam, make_params(fam, values, cats))
            for b in tile.blocks:
                assert check_jacobian(b, 5)[0] > 0
                assert b.control[..., :3].min() >= -1e-12 and b.control[..., :3].max() <= 1 + 1e-12
            for axis in tile.periodic:
                assert periodicity_deviation(tile, axis) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_random_corner_parameters_valid(data):
    # mixed corners stay inside the box: a corner at the closing wall (0.5) pinches the cavity
    fam = FAMILIES[data.draw(st.sampled_from(["shelled_box", "tube_lattice", "hx"]))]
    values = {}
    for p in fam.params:
        top = p.lo + 0.95 * (p.hi - p.lo)
        values[p.name] = tuple(data.draw(st.floats(p.lo, top)) for _ in range(8))
    tile = instantiate(fam, make_params(fam, values))
    for b in tile.blocks:
        assert check_jacobian(b, 5)[0] > 0


def test_pinched_cavity_rejected():
    with pytest.raises(GeometryError, match="rejected"):
        instantiate("shelled_box", {"wall": (0.5,) * 7 + (0.25,)})


def test_shelled_box_volume_strictly_increasing():
    walls = np.linspace(0.02, 0.5, 10)
    vols = [volume(instantiate("shelled_box", {"wall": w})) for w in walls]
    assert np.all(np.diff(vols) > 0)
    np.testing.assert_allclose(vols, 1 - (1 - 2 * walls) ** 3, rtol=1e-12)


def test_single_shell_keeps_one_wall():
    tile = instantiate("shelled_box", make_params("shelled_box", {"wall": 0.2}, {"shell": "single"}))
    assert len(tile.blocks) == 1
    assert volume(tile) == pytest.approx(0.2)
    assert tile.periodic == (1, 2)


@pytest.mark.parametrize("h", [0.5, 1.0, 2.0, 3.7])
def test_hx_channel_ratio(h):
    x = hx_positions(0.1, 0.1, h)
    assert (x[2] - x[1]) / (x[4] - x[3]) == pytest.approx(h, rel=1e-14)


def test_hx_tile_has_three_conforming_blocks():
    tile = instantiate("hx", {"h": 2.0, "m": 0.1})
    assert tile.roles == ("hot_wall", "separator", "cold_wall")
    assert volume(tile) == pytest.approx(0.2, rel=1e-12)


def test_material_channel_attached():
    tile = instantiate("solid", make_params("solid", {"ar": 2.5}, {"material": "insulator"}))
    assert tile.attributes == ("ar", "material")
    np.testing.assert_allclose(tile.blocks[0].control[..., 3], 2.5)
    np.testing.assert_allclose(tile.blocks[0].control[..., 4], 0.0)


def test_solid_rejects_corner_values():
    with pytest.raises(ParameterValidationError):
        instantiate("solid", {"ar": (1.0,) * 8})


def test_corner_values_shape_face_geometry_only_locally():
    base = [0.1] * 8
    bumped = list(base)
    bumped[7] = 0.3  # corner (1, 1, 1)
    a = instantiate("shelled_box", {"wall": tuple(base)})
    b = instantiate("shelled_box", {"wall": tuple(bumped)})
    from microsynth.tiles import face_nets_on

    for face in (0, 2, 4):  # faces not touching corner (1,1,1)
        for na, nb in zip(face_nets_on(a, face), face_nets_on(b, face)):
            np.testing.assert_array_equal(na, nb)


# ------------------------------------------------------- params_from_fields


def test_constant_field_gives_constant_value():
    tile_params = params_from_fields("shelled_box", {"wall": constant_field(0.17)}, (1, 0, 2), (3, 1, 3))
    np.testing.assert_allclose(tile_params.corners("wall"), 0.17)


def test_corner_samples_of_x_field():
    fld = field_from_function(lambda p: 0.05 + 0.1 * p[:, 0], degrees=(1, 1, 1))
    n = 4
    tile_params = params_from_fields("shelled_box", {"wall": fld}, (0, 0, 0), (n, 2, 2))
    np.testing.assert_allclose(tile_params.corners("wall"), 0.05 + 0.1 * CORNERS[:, 0] / n, atol=1e-15)


def test_linear_field_grading_is_monotone():
    fld = linear_field(0.3, (-0.2, 0.0, 0.0))
    centres = [params_from_fields("shelled_box", {"wall": fld}, (i, 3, 1), (15, 80, 3)).center("wall") for i in range(15)]
    assert np.all(np.diff(centres) < 0)


def test_non_blend_parameter_sampled_at_centre():
    fld = linear_field(1.0, (2.0, 0.0, 0.0))
    tile_params = params_from_fields("solid", {"ar": fld}, (1, 0, 0), (2, 1, 1))
    assert tile_params.values["ar"] == pytest.approx(1.0 + 2.0 * 0.75)


def test_field_name_mismatch():
    with pytest.raises(ConfigError, match="thick"):
        params_from_fields("shelled_box", {"thick": constant_field(0.1)}, (0, 0, 0), (1, 1, 1))


def test_field_must_be_scalar_trivariate():
    from microsynth.shapes import from_function

    vec = from_function(lambda p: p, (1, 1, 1))
    with pytest.raises(ConfigError):
        params_from_fields("shelled_box", {"wall": vec}, (0, 0, 0), (1, 1, 1))


def test_out_of_bounds_field_value_reported():
    with pytest.raises(ParameterValidationError, match="wall"):
        params_from_fields("shelled_box", {"wall": constant_field(0.9)}, (0, 0, 0), (1, 1, 1))
