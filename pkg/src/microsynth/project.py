"""Declarative project configuration (YAML) and the pipeline runners behind the CLI.

Schema (every key optional unless noted; unknown keys are rejected with
their dotted path)::

    pipeline: synthesize | optimize | hx | rocket      # required
    seed: 0
    dims: [2, 2, 2]
    out: out
    tile:     {family: shelled_box, params: {wall: 0.1}, categories: {}, fields: {}}
    macro:    {kind: identity | bent_block | curved_duct | wing | scaled | file, args: {}, file: null}
    export:   {obj: true, vtk: true, resolution: 4}
    optimize: {objective: target_volume, target: null, field: null, variables: [], budget: 50}
    hx:       {area_ratio: <field>, wall_thickness: <field>, spacings: null}
    rocket:   {section: {r_in: 1, r_out: 2, height: 1}, profile: {kind: decay, args: {}},
               n_layers: 8, n_u: null, n_v: null, base_rate: 1.0, steps: 8}

A field is ``{constant: c}``, ``{linear: {value: v, gradient: [gx, gy, gz]}}``
or ``{file: path}`` (a spline file, relative to the config file).
"""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass
from dataclasses import field as dc_field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError

PIPELINES = ("synthesize", "optimize", "hx", "rocket")


@dataclass
class TileConfig:
    family: str = "shelled_box"
    params: dict = dc_field(default_factory=dict)
    categories: dict = dc_field(default_factory=dict)
    fields: dict = dc_field(default_factory=dict)


@dataclass
class MacroConfig:
    kind: str = "identity"
    args: dict = dc_field(default_factory=dict)
    file: str | None = None


@dataclass
class ExportConfig:
    obj: bool = True
    vtk: bool = True
    resolution: int = 4


@dataclass
class OptimizeConfig:
    objective: str = "target_volume"
    target: float | None = None
    field: dict | None = None
    variables: list = dc_field(default_factory=list)
    budget: int = 50


@dataclass
class HXConfig:
    area_ratio: dict = dc_field(default_factory=lambda: {"constant": 1.0})
    wall_thickness: dict = dc_field(default_factory=lambda: {"constant": 0.03})
    spacings: list | None = None


@dataclass
class RocketConfig:
    section: dict = dc_field(default_factory=lambda: {"r_in": 1.0, "r_out": 2.0, "height": 1.0})
    profile: dict = dc_field(default_factory=lambda: {"kind": "decay", "args": {}})
    n_layers: int = 8
    n_u: int | None = None
    n_v: int | None = None
    base_rate: float = 1.0
    steps: int = 8


@dataclass
class ProjectConfig:
    pipeline: str
    seed: int = 0
    dims: list = dc_field(default_factory=lambda: [2, 2, 2])
    out: str = "out"
    tile: TileConfig = dc_field(default_factory=TileConfig)
    macro: MacroConfig = dc_field(default_factory=MacroConfig)
    export: ExportConfig = dc_field(default_factory=ExportConfig)
    optimize: OptimizeConfig = dc_field(default_factory=OptimizeConfig)
    hx: HXConfig = dc_field(default_factory=HXConfig)
    rocket: RocketConfig = dc_field(default_factory=RocketConfig)
    base_dir: str = dc_field(default=".", metadata={"internal": True})


# ------------------------------------------------------------------ loading


def _check_type(value, hint, path: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if hint is Any:
        return value
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _check_type(value, inner[0], path)
    if dataclasses.is_dataclass(hint):
        return _from_dict(hint, value, path)
    base = origin or hint
    if base is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if base is int and isinstance(value, bool):
        raise ConfigError(f"{path}: expected int, got bool")
    if not isinstance(value, base):
        raise ConfigError(f"{path}: expected {base.__name__}, got {type(value).__name__}")
    return value


def _from_dict(cls, data, path: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if not f.metadata.get("internal")}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown field {where}{unknown[0]} (allowed: {sorted(names)})")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            kwargs[f.name] = _check_type(data[f.name], hints[f.name], f"{path}.{f.name}" if path else f.name)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


def config_from_dict(data: Mapping, base_dir: str = ".") -> ProjectConfig:
    cfg = _from_dict(ProjectConfig, data, "")
    cfg.base_dir = str(base_dir)
    validate(cfg)
    return cfg


def load_config(path) -> ProjectConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: invalid YAML ({exc})") from None
    return config_from_dict(data or {}, str(p.parent))


def config_to_dict(cfg: ProjectConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d.pop("base_dir", None)
    return d


def echo_config(cfg: ProjectConfig) -> str:
    """The full effective configuration as YAML (loadable again unchanged)."""
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=True, default_flow_style=False)


def validate(cfg: ProjectConfig) -> None:
    from .tiles import get_family, make_params

    if cfg.pipeline not in PIPELINES:
        raise ConfigError(f"pipeline: {cfg.pipeline!r} not one of {list(PIPELINES)}")
    if len(cfg.dims) != 3 or any(not isinstance(n, int) or n < 1 for n in cfg.dims):
        raise ConfigError(f"dims: expected three positive integers, got {cfg.dims}")
    fam = get_family(cfg.tile.family if cfg.pipeline != "hx" else "hx")
    if cfg.pipeline != "hx":
        fixed = {k: v for k, v in cfg.tile.params.items()}
        for name in cfg.tile.fields:
            fam.spec(name)
        make_params(fam, {k: (tuple(v) if isinstance(v, list) else v) for k, v in fixed.items()},
                    cfg.tile.categories)
    if cfg.macro.kind == "file":
        if not cfg.macro.file:
            raise ConfigError("macro.file: required when macro.kind is 'file'")
        resolve(cfg, cfg.macro.file, "macro.file")
    else:
        from .shapes import MACROS

        if cfg.macro.kind not in MACROS:
            raise ConfigError(f"macro.kind: {cfg.macro.kind!r} not one of {sorted(MACROS)} or 'file'")
    for name, spec in cfg.tile.fields.items():
        _check_field(cfg, spec, f"tile.fields.{name}")
    if cfg.pipeline == "hx":
        _check_field(cfg, cfg.hx.area_ratio, "hx.area_ratio")
        _check_field(cfg, cfg.hx.wall_thickness, "hx.wall_thickness")
    if cfg.pipeline == "optimize":
        if cfg.optimize.budget < 0:
            raise ConfigError("optimize.budget: must be >= 0")
        if cfg.optimize.objective not in ("volume", "surface_area", "target_volume", "field_matching"):
            raise ConfigError(f"optimize.objective: unknown objective {cfg.optimize.objective!r}")
        if cfg.optimize.objective == "target_volume" and cfg.optimize.target is None:
            raise ConfigError("optimize.target: required for the target_volume objective")
        if cfg.optimize.objective == "field_matching":
            if cfg.optimize.field is None:
                raise ConfigError("optimize.field: required for the field_matching objective")
            _check_field(cfg, cfg.optimize.field, "optimize.field")
        for v in cfg.optimize.variables:
            fam.spec(v)
    if cfg.pipeline == "rocket":
        r = cfg.rocket
        if r.n_layers < 1 or (r.n_u is not None and r.n_u < 1) or (r.n_v is not None and r.n_v < 1):
            raise ConfigError("rocket: layer and tile counts must be >= 1")
        if r.profile.get("kind") not in ("decay", "constant", "table"):
            raise ConfigError(f"rocket.profile.kind: {r.profile.get('kind')!r} not one of decay, constant, table")


def resolve(cfg: ProjectConfig, ref: str, path: str) -> Path:
    p = Path(ref)
    if not p.is_absolute():
        p = Path(cfg.base_dir) / p
    if not p.is_file():
        raise ConfigError(f"{path}: referenced file {ref!r} not found")
    return p


def _check_field(cfg, spec, path: str) -> None:
    if not isinstance(spec, Mapping) or len(spec) != 1:
        raise ConfigError(f"{path}: a field is one of {{constant: c}}, {{linear: {{...}}}}, {{file: path}}")
    (kind, value), = spec.items()
    if kind == "file":
        resolve(cfg, value, f"{path}.file")
    elif kind == "linear":
        if not isinstance(value, Mapping) or set(value) - {"value", "gradient"}:
            raise ConfigError(f"{path}.linear: expected keys value, gradient")
    elif kind != "constant":
        raise ConfigError(f"{path}: unknown field kind {kind!r}")


# ----------------------------------------------------------------- building


def build_field(cfg: ProjectConfig, spec: Mapping, domain):
    from .fields import constant_field, linear_field
    from .io import load_spline

    (kind, value), = spec.items()
    if kind == "constant":
        return constant_field(float(value), domain)
    if kind == "linear":
        return linear_field(float(value.get("value", 0.0)), value.get("gradient", [0.0, 0.0, 0.0]), domain)
    return load_spline(resolve(cfg, value, "field.file"))


def build_macro(cfg: ProjectConfig):
    from .io import load_spline
    from .shapes import MACROS

    if cfg.macro.kind == "file":
        return load_spline(resolve(cfg, cfg.macro.file, "macro.file"))
    try:
        return MACROS[cfg.macro.kind](**cfg.macro.args)
    except TypeError as exc:
        raise ConfigError(f"macro.args: {exc}") from None


def build_profile(cfg: ProjectConfig):
    from .rocket import ThrustProfile, decaying_profile

    p = cfg.rocket.profile
    kind, args = p.get("kind"), p.get("args", {}) or {}
    if kind == "decay":
        return decaying_profile(**args)
    if kind == "constant":
        c = float(args.get("value", 1.0))
        return ThrustProfile(lambda t: c + 0.0 * t, f"constant({c:g})")
    return ThrustProfile.from_samples(args.get("t"), args.get("values"))


# ------------------------------------------------------------------ running


def _params(cfg: ProjectConfig) -> dict:
    return {k: (tuple(v) if isinstance(v, list) else v) for k, v in cfg.tile.params.items()}


def run(cfg: ProjectConfig, out: str | Path | None = None) -> dict:
    """Run the configured pipeline and write its outputs; returns a summary."""
    from . import io
    from .validation import check_c0, volume

    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    dims = tuple(cfg.dims)
    summary: dict = {"pipeline": cfg.pipeline, "dims": list(dims), "seed": cfg.seed}
    structure = None

    if cfg.pipeline in ("synthesize", "optimize"):
        from .synthesis import synthesize, synthesize_graded
        from .tiles import instantiate, make_params

        macro_map = build_macro(cfg)
        if cfg.pipeline == "synthesize":
            if cfg.tile.fields:
                fields = {k: build_field(cfg, v, macro_map.domain) for k, v in cfg.tile.fields.items()}
                structure = synthesize_graded(cfg.tile.family, macro_map, dims, fields, _params(cfg), cfg.tile.categories)
            else:
                tile = instantiate(cfg.tile.family, make_params(cfg.tile.family, _params(cfg), cfg.tile.categories))
                structure = synthesize(tile, macro_map, dims)
        else:
            structure = _run_optimize(cfg, macro_map, dims, out, summary)
        report = check_c0(structure)
        summary.update(conformity=report.summary(), volume=volume(structure), tiles=structure.n_tiles)
    elif cfg.pipeline == "hx":
        from .heat_exchanger import build_hx

        macro_map = build_macro(cfg)
        area_ratio = build_field(cfg, cfg.hx.area_ratio, macro_map.domain)
        wall_thickness = build_field(cfg, cfg.hx.wall_thickness, macro_map.domain)
        solid = build_hx(macro_map, area_ratio, wall_thickness, dims, cfg.hx.spacings)
        structure = solid.structure
        summary.update(sew=solid.summary(), tiles=structure.n_tiles)
        (out / "sew.txt").write_text("\n".join(solid.lines()) + "\n")
    else:
        summary.update(_run_rocket(cfg, out))

    if structure is not None:
        io.save_structure(structure, out / "structure.json")
        if cfg.export.obj:
            summary["obj"] = io.export_obj(structure, out / "tiles.obj", cfg.export.resolution)
        if cfg.export.vtk:
            summary["vtk"] = io.export_vtk(structure, out / "fields.vtk")
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1, default=float) + "\n")
    return summary


def _run_optimize(cfg, macro_map, dims, out: Path, summary: dict):
    from . import io
    from .synthesis import (field_matching_objective, optimize, surface_area_objective,
                            target_volume_objective, volume_objective)

    o = cfg.optimize
    if o.objective == "volume":
        obj = volume_objective()
    elif o.objective == "surface_area":
        obj = surface_area_objective()
    elif o.objective == "target_volume":
        obj = target_volume_objective(float(o.target))
    else:
        obj = field_matching_objective(build_field(cfg, o.field, macro_map.domain))
    res = optimize(cfg.tile.family, macro_map, dims, obj, budget=o.budget, variables=o.variables or None,
                   initial=_params(cfg), categories=cfg.tile.categories, seed=cfg.seed)
    io.write_trace_csv(res.trace, out / "trace.csv")
    summary.update(objective=res.value, initial_objective=res.initial_value, iterations=res.iterations,
                   params=res.params.to_dict()["values"])
    return res.structure


def _run_rocket(cfg, out: Path) -> dict:
    from . import io
    from .rocket import annulus_section, assign_ar, simulate_burn, volume_of_revolution

    r = cfg.rocket
    sec = r.section
    if "file" in sec:
        section = io.load_spline(resolve(cfg, sec["file"], "rocket.section.file"))
    else:
        extra = set(sec) - {"r_in", "r_out", "height"}
        if extra:
            raise ConfigError(f"unknown field rocket.section.{sorted(extra)[0]}")
        section = annulus_section(**sec)
    revolved = volume_of_revolution(section)
    grain = assign_ar(revolved, r.n_layers, build_profile(cfg), r.n_u, r.n_v)
    burn = simulate_burn(grain, r.base_rate, r.steps)
    io.write_thrust_csv(burn.times, burn.relative_thrust, out / "thrust.csv")
    summary = {"layers": r.n_layers, "tiles": len(grain.tiles),
               "burnout_spread": burn.burnout_spread(grain), "identity_violation": grain.identity_violation()}
    if cfg.export.vtk:
        summary["vtk"] = io.export_vtk(grain, out / "grain.vtk")
    if cfg.export.obj:
        summary["obj"] = io.export_obj(grain, out / "grain.obj", cfg.export.resolution)
    return summary
