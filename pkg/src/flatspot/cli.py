"""Command-line client for the experiment service.

Thin wrapper over the service layer: every subcommand assembles a RunConfig
(JSON config file plus flag overrides) and invokes the same function the
HTTP endpoint uses, printing a short summary and writing artifacts to
--out.  Exit status: 0 on success, 1 if an asserted invariant failed,
2 on configuration or runtime errors.
"""

from __future__ import annotations

import json
import sys

import click
from pydantic import ValidationError

from . import __version__
from .geometry import PrecisionExhausted
from .pipeline import RunConfig, TargetSpec, execute
from .rotation import RationalRotationError, TuneSeparationError


def _common_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     default=None, help="JSON config file (flags override it)."),
        click.option("--l", "l", default=None, help="Critical exponent (decimal string, >= 1)."),
        click.option("--u", "u", default=None, help="Flat-interval length in [0, 1)."),
        click.option("--target", "target", default=None,
                     help="Rotation target: golden | silver | cf:1,2,2 | dec:0.59128."),
        click.option("--precision-bits", type=int, default=None, help="Working precision."),
        click.option("--n-max", type=int, default=None, help="Deepest partition level."),
        click.option("--seed", type=int, default=None, help="Seed for sampled checks."),
        click.option("--cf-depth", type=int, default=None,
                     help="Certified continued-fraction depth for tuning."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                     help="Directory for CSV/JSON artifacts and the manifest."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _build_config(config_path, **overrides) -> RunConfig:
    data = {}
    if config_path:
        with open(config_path) as fh:
            data = json.load(fh)
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "target":
            data["target"] = TargetSpec.from_string(value).model_dump()
        else:
            data[key] = value
    try:
        return RunConfig(**data)
    except (ValidationError, ValueError, json.JSONDecodeError) as exc:
        click.echo(f"invalid config: {exc}", err=True)
        sys.exit(2)


def _dispatch(mode: str, config: RunConfig) -> None:
    try:
        response = execute(mode, config)
    except (ValueError, RationalRotationError, TuneSeparationError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except PrecisionExhausted as exc:
        click.echo(f"precision exhausted: {exc}", err=True)
        sys.exit(2)
    _summarize(mode, response)
    passed = bool(getattr(response, "passed", True))
    sys.exit(0 if passed else 1)


def _summarize(mode: str, response) -> None:
    if mode == "tune":
        click.echo(f"omega = {response.omega}")
        click.echo(f"partial quotients ({response.certified_depth} certified): "
                   f"{response.partial_quotients}")
        click.echo(f"q sequence: {response.q_sequence}")
        click.echo(f"closest returns: {response.closest_return_times} "
                   f"(match q: {response.returns_match_q})")
        click.echo(f"order isomorphism: {'pass' if response.order_isomorphism_passed else 'FAIL'}")
    elif mode == "scalings":
        for row in response.rows:
            if row.tau is None:
                continue
            extra = ""
            if row.recursion_pass is not None:
                extra = f"  recursion {'pass' if row.recursion_pass else 'FAIL'}"
            click.echo(f"n={row.level:2d} tau={row.tau[:12]:14s} alpha={row.alpha[:12]:14s}"
                       f" alpha>tau={row.alpha_gt_tau}{extra}")
        click.echo(f"tau slope {response.tau_slope:+.4f}, min settled tau {response.tau_min_settled:.4f}")
    elif mode == "partition":
        for lv in response.levels:
            click.echo(f"n={lv.level:2d} preimages={lv.preimages:4d} long={lv.long_gaps:4d} "
                       f"short={lv.short_gaps:4d} defect={lv.tiling_defect[:10]}")
        click.echo(f"gap decay lambda_hat = {response.gap_decay_lambda:.4f}; "
                   f"two-level split {response.two_level_split_max} <= {response.two_level_split_bound}")
    elif mode == "distortion":
        click.echo(f"cross-ratio: {response.cross_ratio_violations} violations in "
                   f"{response.cross_ratio_samples} samples (min factor {response.cross_ratio_min_factor[:12]})")
        click.echo(f"schwarzian: all negative = {response.schwarzian_all_negative}")
        click.echo(f"koebe C_hat = {response.koebe_c_hat[:12]} over {response.koebe_triples} triples")
    elif mode == "dimension":
        click.echo(f"verdict: {response.verdict} (min tau {response.tau_min:.4f}, "
                   f"slope {response.tau_slope:+.4f})")
        click.echo("s_star: " + ", ".join(f"n={c.level}:{c.s_star[:8]}" for c in response.cover))
        if response.alpha_hat:
            click.echo(f"alpha_hat = {response.alpha_hat[:12]} (C = {response.frostman_c_hat:.3f}); "
                       f"HD lower bound {response.hd_lower_bound[:12]}")
    elif mode == "sweep":
        for row in response.rows:
            if row.error:
                click.echo(f"l={row.l}: ERROR {row.error}")
            else:
                extra = f" alpha_hat={row.alpha_hat[:10]}" if row.alpha_hat else ""
                click.echo(f"l={row.l}: {row.verdict} (min tau {row.tau_min:.4f}, "
                           f"slope {row.tau_slope:+.4f}){extra}")
    elif mode == "cherry":
        click.echo(f"|lambda_2|/lambda_1 = {response.eigenvalue_ratio} > 2: "
                   f"{response.eigenvalue_condition}")
        click.echo(f"HD(quasi-minimal) >= 1 + {response.alpha_hat[:12]} = "
                   f"{response.hd_lower_bound[:14]} > 1: {response.exceeds_one}")
    elif mode == "verify":
        for check in response.checks:
            click.echo(f"{check.status:4s} {check.name}" + (f": {check.detail}" if check.detail else ""))
        click.echo(f"verify: {'all invariants hold' if response.passed else 'FAILURES present'}")


@click.group()
@click.version_option(__version__)
def main():
    """Flat-spot circle maps: partitions, scalings and dimension experiments."""


def _register(mode: str, help_text: str):
    @main.command(name=mode, help=help_text)
    @_common_options
    def _cmd(config_path, **overrides):
        config = _build_config(config_path, **overrides)
        _dispatch(mode, config)
    return _cmd


_register("tune", "Tune the offset to the target rotation number; emit the certified CF data.")
_register("scalings", "Compute tau/alpha/sigma/s per level, with the recursion check for l <= 2.")
_register("partition", "Build the dynamical partitions; export per-level CSVs.")
_register("distortion", "Cross-ratio expansion, Schwarzian sign and Koebe ratio checks.")
_register("dimension", "Cover exponents, mass measure / Frostman bound, transition verdict.")
_register("cherry", "Quasi-minimal set dimension bound for the first-return model (l > 2).")
_register("verify", "Run the full invariant battery; one verdict line per invariant.")


@main.command(name="sweep", help="Run the dimension pipeline over a grid of exponents.")
@_common_options
@click.option("--grid", "grid", default=None,
              help="Comma-separated exponent grid, e.g. 1.5,2,3,4.")
def sweep_cmd(config_path, grid, **overrides):
    config = _build_config(config_path, **overrides)
    if grid:
        config = config.model_copy(update={"l_grid": [g.strip() for g in grid.split(",")]})
    _dispatch("sweep", config)


@main.command(name="serve", help="Serve the HTTP API (uvicorn).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8712, show_default=True, type=int)
def serve_cmd(host, port):
    import uvicorn

    from .api import app
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
