"""End-to-end acceptance criteria, each printing one PASS/FAIL line."""

import time

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from conftest import random_macro
from microsynth.cli import main
from microsynth.composition import compose
from microsynth.fields import constant_field
from microsynth.heat_exchanger import build_hx, channel_areas, separator_thickness
from microsynth.io import export_obj
from microsynth.rocket import annulus_section, assign_ar, decaying_profile, simulate_burn, volume_of_revolution
from microsynth.shapes import bent_block, curved_duct, from_function, wing, wing_thickness_field
from microsynth.spline import SplineMap, evaluate, identity_map
from microsynth.synthesis import optimize, synthesize, synthesize_graded, target_volume_objective
from microsynth.tiles import instantiate
from microsynth.validation import check_c0, check_jacobian, surface_area, volume


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail, elapsed, limit=None):
        timed = ok and (limit is None or elapsed < limit)
        budget = f" (limit {limit:g} s)" if limit else ""
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {'PASS' if timed else 'FAIL'}: {title}: {detail}; {elapsed:.2f} s{budget}")
        assert ok, detail
        assert limit is None or elapsed < limit, f"runtime {elapsed:.1f} s over {limit} s"

    return emit


def test_1_composition_exactness(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240101)
    worst = 0.0
    for _ in range(20):
        macro_map = random_macro(rng, tuple(int(p) for p in rng.integers(1, 4, 3)))
        tdeg = tuple(int(p) for p in rng.integers(1, 4, 3))
        ctrl = rng.uniform(0.05, 0.95, tuple(p + 1 for p in tdeg) + (3,))
        micro = SplineMap.bezier(ctrl)
        pts = rng.uniform(size=(500, 3))
        err = np.abs(evaluate(compose(macro_map, micro), pts) - evaluate(macro_map, evaluate(micro, pts))).max()
        worst = max(worst, float(err))
    report(1, "composition exactness", worst < 1e-10, f"max error {worst:.2e} over 20 pairs x 500 points (< 1e-10)",
           time.perf_counter() - t0, 10)


def test_2_bent_paving_reproduction(report, tmp_path):
    t0 = time.perf_counter()
    ms = synthesize(instantiate("tube_lattice", {}), bent_block(), (2, 2, 2))
    rep = check_c0(ms, 1e-9)
    stats = export_obj(ms, tmp_path / "bent_paving.obj")
    ok = ms.n_tiles == 8 and len(rep.interfaces) == 12 and rep.passed and stats["groups"] == 8
    report(2, "2x2x2 paving through a bent block",
           ok, f"{ms.n_tiles} tiles, {len(rep.interfaces)} interfaces, max deviation {rep.max_deviation:.1e} "
               f"(tol 1e-9), OBJ groups {stats['groups']}", time.perf_counter() - t0, 5)


def test_3_wing_scale_generation(report):
    t0 = time.perf_counter()
    macro_map = wing()
    dims = (15, 80, 3)
    vols = {}
    for case in "abcd":
        ms = synthesize_graded("shelled_box", macro_map, dims, {"wall": wing_thickness_field(case)})
        if case == "a":
            rep = check_c0(ms)
            tiles = ms.n_tiles
        vols[case] = volume(ms)
        del ms
    ok = tiles == 3600 and rep.passed and vols["a"] < vols["c"] < vols["d"] < vols["b"]
    rel = ", ".join(f"{c} {vols[c] / vols['a']:.2f}" for c in "acdb")
    report(3, "wing 15x80x3", ok, f"{tiles} tiles, conformity {'ok' if rep.passed else 'broken'}, "
                                  f"relative volume {rel} (need a < c < d < b)", time.perf_counter() - t0, 300)


def test_4_rocket_grain(report):
    t0 = time.perf_counter()
    revolved = volume_of_revolution(annulus_section())
    prof = decaying_profile()
    errs, spreads, violations = [], [], []
    for n in (8, 16, 32):
        g = assign_ar(revolved, n, prof)
        b = simulate_burn(g)
        violations.append(g.identity_violation())
        spreads.append(b.burnout_spread(g))
        errs.append(float(np.abs(b.relative_midpoint_thrust / prof(np.arange(1, n + 1) / n) - 1).max()))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = (max(violations) == 0.0 and max(spreads) <= 1e-12
          and all(e <= 2 / n for e, n in zip(errs, (8, 16, 32))) and orders.min() >= 1 - 1e-6)
    report(4, "rocket grain", ok, f"identity violation {max(violations):.1e}, burnout spread {max(spreads):.1e}, "
                                  f"midpoint errors {', '.join(f'{e:.4f}' for e in errs)}, "
                                  f"order {orders.min():.6f}", time.perf_counter() - t0, 60)


def test_5_heat_exchanger(report):
    t0 = time.perf_counter()
    wall_thickness = 0.03
    solid = build_hx(curved_duct(), constant_field(2.0), constant_field(wall_thickness), (4, 4, 4))
    cells = sorted(solid.structure.cells)
    ratios = np.array([np.divide(*channel_areas(solid.structure, i)) for i in cells])
    thick = np.array([separator_thickness(solid.structure, i) for i in cells])
    ratio_err = float(np.abs(ratios / 2 - 1).max())
    thick_err = float(np.abs(thick / wall_thickness - 1).max())
    ok = ratio_err <= 0.01 and thick_err <= 0.05 and solid.ok and not solid.unmatched
    report(5, "heat exchanger on a 4x4x4 duct", ok,
           f"area ratio error {ratio_err:.2e} (<= 1%), thickness error {thick_err:.2e} (<= 5%), "
           f"{len(solid.pairs)} face pairs, {len(solid.unmatched)} unmatched", time.perf_counter() - t0, 60)


def test_6_optimization_loop(report):
    t0 = time.perf_counter()
    wall = 0.2
    res = optimize("shelled_box", identity_map(), (1, 1, 1), target_volume_objective(1 - (1 - 2 * wall) ** 3),
                   budget=50)
    found = res.params.values["wall"]
    ok = abs(found - wall) <= 1e-3 and res.iterations <= 50 and res.value <= res.initial_value
    report(6, "optimization loop", ok, f"wall {found:.6f} vs {wall} in {res.iterations} iterations, "
                                       f"objective {res.initial_value:.3e} -> {res.value:.3e}",
           time.perf_counter() - t0, 30)


def test_7_validation_suite(report):
    t0 = time.perf_counter()
    fold = from_function(lambda p: np.stack([2 * p[:, 0] * (1 - p[:, 0]), p[:, 1], p[:, 2]], -1), (2, 1, 1))
    folded = check_jacobian(compose(fold, instantiate("solid", {}).blocks[0]))[0]
    cube = identity_map()
    checks = {
        "cube volume": (volume(cube), 1.0),
        "cube area": (surface_area(cube), 6.0),
        "shell volume": (volume(instantiate("shelled_box", {"wall": 0.1})), 1 - 0.8**3),
        "annulus volume": (volume(volume_of_revolution(annulus_section())), 3 * np.pi),
    }
    rel = {k: abs(v / ref - 1) for k, (v, ref) in checks.items()}
    ok = folded < 0 and max(rel.values()) <= 1e-6
    report(7, "validation suite", ok, f"fold min det {folded:.3f} (< 0), worst quadrature error "
                                      f"{max(rel.values()):.1e} (<= 1e-6)", time.perf_counter() - t0)


def test_8_determinism(report, tmp_path):
    t0 = time.perf_counter()
    configs = {
        "synthesize": {"macro": {"kind": "bent_block"}},
        "optimize": {"optimize": {"target": 0.784, "budget": 10}, "dims": [1, 1, 1]},
        "hx": {},
        "rocket": {"rocket": {"n_layers": 4, "n_u": 2, "n_v": 4}},
    }
    differing = []
    for pipeline, extra in configs.items():
        runs = []
        for tag in ("first", "second"):
            out = tmp_path / pipeline / tag
            cfg = tmp_path / f"{pipeline}_{tag}.yaml"
            cfg.write_text(yaml.safe_dump({"pipeline": pipeline, "seed": 7, "out": str(out), **extra}))
            res = CliRunner().invoke(main, [pipeline, "--config", str(cfg)])
            assert res.exit_code == 0, res.output
            runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        if runs[0] != runs[1]:
            differing.append(pipeline)
    n_files = sum(len(list((tmp_path / p / "first").iterdir())) for p in configs)
    report(8, "determinism", not differing, f"{n_files} files across {len(configs)} pipelines, "
                                            f"differing: {differing or 'none'}", time.perf_counter() - t0)
