"""Command-line interface: ``microsynth <command> --config cfg.yaml [overrides]``.

Every failure prints one line ``ERROR <code>: <message>`` to stderr and
exits with status 2 (configuration or argument problems) or 1 (anything
raised while running a pipeline).
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .errors import ConfigError, MicrosynthError

EXIT_USAGE = 2
EXIT_FAILURE = 1


def _fail(code: str, message: str, status: int) -> None:
    click.echo(f"ERROR {code}: {' '.join(str(message).split())}", err=True)
    sys.exit(status)


def _load(config: str | None, pipeline: str, dims, out, seed, budget):
    from .project import config_from_dict, config_to_dict, load_config, validate

    if config is None:
        cfg = config_from_dict({"pipeline": pipeline})
    else:
        cfg = load_config(config)
    if cfg.pipeline != pipeline:
        raise ConfigError(f"pipeline: config selects {cfg.pipeline!r} but the command is {pipeline!r}")
    data = config_to_dict(cfg)
    if dims is not None:
        data["dims"] = list(dims)
    if out is not None:
        data["out"] = out
    if seed is not None:
        data["seed"] = seed
    if budget is not None:
        data["optimize"]["budget"] = budget
    cfg = config_from_dict(data, cfg.base_dir)
    validate(cfg)
    return cfg


def _common(fn):
    fn = click.option("--budget", type=int, default=None, help="Optimizer evaluation budget.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Seed for every stochastic path.")(fn)
    fn = click.option("--out", type=str, default=None, help="Output directory.")(fn)
    fn = click.option("--dims", type=int, nargs=3, default=None, help="Grid dimensions NX NY NZ.")(fn)
    fn = click.option("--config", "config", type=str, default=None, help="YAML project config.")(fn)
    return fn


def _run_pipeline(pipeline: str, config, dims, out, seed, budget) -> None:
    from .project import echo_config, run

    try:
        cfg = _load(config, pipeline, dims, out, seed, budget)
    except MicrosynthError as exc:
        _fail(exc.code, exc, EXIT_USAGE)
    click.echo("# effective config")
    click.echo(echo_config(cfg), nl=False)
    try:
        summary = run(cfg)
    except MicrosynthError as exc:
        _fail(exc.code, exc, EXIT_FAILURE)
    except OSError as exc:
        _fail("E_IO", exc, EXIT_FAILURE)
    click.echo("# summary")
    click.echo(json.dumps(summary, sort_keys=True, indent=1, default=float))


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Micro-structure synthesis through exact spline composition."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@main.group()
def tiles() -> None:
    """Inspect the tile library."""


@tiles.command("list")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def tiles_list(as_json: bool) -> None:
    from .tiles import FAMILIES

    info = [FAMILIES[name].describe() for name in sorted(FAMILIES)]
    if as_json:
        click.echo(json.dumps(info, indent=1))
        return
    for f in info:
        click.echo(f"{f['name']}: {f['doc']}")
        for p in f["params"]:
            click.echo(f"  {p['name']} in [{p['lo']:g}, {p['hi']:g}], default {p['default']:g}: {p['doc']}")
        for k, v in f["categories"].items():
            click.echo(f"  {k}: {', '.join(v)}")


@main.command()
@_common
def synthesize(**kw) -> None:
    """Pave a tile (optionally field-graded) through a macro map."""
    _run_pipeline("synthesize", **kw)


@main.command()
@_common
def optimize(**kw) -> None:
    """Optimize tile parameters against an objective."""
    _run_pipeline("optimize", **kw)


@main.command()
@_common
def hx(**kw) -> None:
    """Heat-exchanger micro-structure over a duct."""
    _run_pipeline("hx", **kw)


@main.command()
@_common
def rocket(**kw) -> None:
    """Layered rocket grain with accelerant/retardant assignment and burn simulation."""
    _run_pipeline("rocket", **kw)


@main.command()
@click.argument("path", type=str)
@click.option("--tol", type=float, default=None, help="Conformity tolerance (default relative to size).")
def check(path: str, tol: float | None) -> None:
    """Validate a structure file: Jacobian signs, C0 conformity, volume and area."""
    from .io import load_structure
    from .validation import check_c0, jacobian_minima, surface_area, volume

    try:
        if not Path(path).is_file():
            raise ConfigError(f"structure file not found: {path}")
        ms = load_structure(path)
        report = check_c0(ms, tol)
        minima = jacobian_minima(ms.all_maps())
    except MicrosynthError as exc:
        _fail(exc.code, exc, EXIT_USAGE)
    worst = min(v for v, _ in minima)
    for line in report.lines()[:-1]:
        click.echo(line)
    click.echo(f"jacobian: min {worst:.6e} over {len(minima)} blocks")
    click.echo(f"volume: {volume(ms):.12g}")
    click.echo(f"area: {surface_area(ms):.12g}")
    if not report.passed:
        _fail("E_CONFORMITY", f"{len(report.failures)} interfaces exceed tol {report.tol:.3e}", EXIT_FAILURE)
    if not worst > 0:
        _fail("E_GEOMETRY", f"non-positive Jacobian (min {worst:.3e})", EXIT_FAILURE)
    click.echo("PASS")


if __name__ == "__main__":  # pragma: no cover
    main()
