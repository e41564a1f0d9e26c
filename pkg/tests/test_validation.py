import logging

import numpy as np
import pytest

from conftest import random_macro
from microsynth.composition import compose
from microsynth.fields import linear_field
from microsynth.rocket import annulus_section, volume_of_revolution
from microsynth.shapes import bent_block, from_function, scaled_identity
from microsynth.spline import SplineMap, affine_transform, identity_map, split_many
from microsynth.synthesis import synthesize, synthesize_graded
from microsynth.heat_exchanger import sew
from microsynth.tiles import instantiate
from microsynth.validation import (
    check_c0,
    check_jacobian,
    jacobian_minima,
    surface_area,
    volume,
    volumes,
)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    return q if np.linalg.det(q) > 0 else -q


# --------------------------------------------------------------- Jacobian


def test_identity_and_scale_minimum_det():
    assert check_jacobian(identity_map())[0] == pytest.approx(1.0)
    assert check_jacobian(scaled_identity((2, 1, 1)))[0] == pytest.approx(2.0)


def test_fold_map_detected_in_composed_tile():
    # x' = 2 x (1 - x) folds back at x = 1/2
    fold = from_function(lambda p: np.stack([2 * p[:, 0] * (1 - p[:, 0]), p[:, 1], p[:, 2]], -1), (2, 1, 1))
    tile = instantiate("solid", {"ar": 1.0})
    composed = compose(fold, tile.blocks[0])
    det, where = check_jacobian(composed)
    assert det < 0
    assert where[0] > 0.5
    assert check_jacobian(split_many(composed, 0, [0.5])[0])[0] >= 0


def test_minima_reported_per_block():
    out = jacobian_minima([identity_map(), scaled_identity((1, 3, 1))])
    assert [round(v, 12) for v, _ in out] == [1.0, 3.0]


# ------------------------------------------------------------ integrals


def test_unit_cube_volume_and_area():
    assert volume(identity_map()) == pytest.approx(1.0, rel=1e-14)
    assert surface_area(identity_map()) == pytest.approx(6.0, rel=1e-14)


def test_shell_volume_and_area():
    tile = instantiate("shelled_box", {"wall": 0.1})
    assert volume(tile) == pytest.approx(0.488, rel=1e-12)
    # outer cube plus inner cavity surface
    assert surface_area(tile) == pytest.approx(6 + 6 * 0.8**2, rel=1e-12)


def test_annulus_volume():
    assert volume(volume_of_revolution(annulus_section())) == pytest.approx(3 * np.pi, rel=1e-6)


def test_annulus_boundary_area():
    revolved = volume_of_revolution(annulus_section())
    # inner and outer cylinders, two flat rings, and the two unit-square seam faces
    expect = 2 * np.pi * 1 + 2 * np.pi * 2 + 2 * np.pi * 3 + 2.0
    assert surface_area([revolved]) == pytest.approx(expect, rel=1e-6)


def test_volume_additive_under_subdivision(rng):
    macro_map = random_macro(rng, (3, 2, 3), (2, 1, 2))
    pieces = split_many(macro_map, 1, [0.3, 0.55, 0.9])
    assert volumes(pieces).sum() == pytest.approx(volume(macro_map), rel=1e-9)


def test_metrics_invariant_under_rigid_motion(rng):
    ms = synthesize(instantiate("shelled_box", {"wall": 0.15}), bent_block(), (2, 1, 1))
    maps = ms.all_maps()
    R, b = random_rotation(rng), rng.standard_normal(3)
    moved = [affine_transform(m, R, b) for m in maps]
    assert volume(moved) == pytest.approx(volume(maps), rel=1e-10)
    assert surface_area(moved) == pytest.approx(surface_area(maps), rel=1e-10)


def test_polynomial_volume_matches_high_order_oracle(rng):
    macro_map = random_macro(rng, (3, 3, 3), amplitude=0.1)
    from microsynth.spline import jacobians

    x, w = np.polynomial.legendre.leggauss(12)
    x, w = 0.5 * (x + 1), 0.5 * w
    pts = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3)
    W = np.einsum("i,j,k->ijk", w, w, w).ravel()
    assert volume(macro_map) == pytest.approx(float(W @ np.linalg.det(jacobians(macro_map, pts))), rel=1e-12)


def test_negative_region_warns_and_is_signed(caplog):
    mirrored = scaled_identity((-1.0, 1.0, 1.0))
    with caplog.at_level(logging.WARNING):
        assert volume(mirrored) == pytest.approx(-1.0)
    assert "negative" in caplog.text.lower()


# ------------------------------------------------------------ conformity


def test_periodic_synthesis_conforms():
    ms = synthesize(instantiate("tube_lattice", {}), bent_block(), (2, 2, 2))
    rep = check_c0(ms)
    assert rep.passed and rep.max_deviation < 1e-9 and len(rep.interfaces) == 12


def test_each_interface_reported_once():
    ms = synthesize(instantiate("shelled_box", {}), identity_map(), (3, 2, 2))
    rep = check_c0(ms)
    keys = [(r.cell_a, r.cell_b) for r in rep.interfaces]
    assert len(keys) == len(set(keys)) == 3 * 2 * 2 * 3 - (2 * 2 + 3 * 2 + 3 * 2)


def test_uncoordinated_thickness_fails():
    # per-cell scalar walls without corner blending: neighbours disagree on the shared face
    from microsynth.synthesis import _build, cell_edges

    macro_map = identity_map()
    dims = (2, 1, 1)
    tiles = {(0, 0, 0): instantiate("shelled_box", {"wall": 0.1}), (1, 0, 0): instantiate("shelled_box", {"wall": 0.2})}
    ms = _build("shelled_box", macro_map, dims, tiles, cell_edges(macro_map, dims))
    rep = check_c0(ms)
    assert not rep.passed and rep.max_deviation > 0
    assert any("FAIL" in line for line in rep.lines())
    assert not sew(ms, rep.tol).ok


def test_single_tile_has_no_interfaces():
    rep = check_c0(synthesize(instantiate("shelled_box", {}), identity_map(), (1, 1, 1)))
    assert rep.interfaces == [] and rep.passed


def test_check_c0_agrees_with_sew():
    ms = synthesize_graded("shelled_box", bent_block(), (2, 2, 1), {"wall": linear_field(0.2, (0.1, -0.1, 0))})
    rep = check_c0(ms)
    assert rep.passed == sew(ms, rep.tol).ok == True
