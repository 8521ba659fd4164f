"""Command-line front end.

Subcommands mirror the library surface: plan-bit and plan-block emit plans
as JSON, simulate and compare run Monte Carlo experiments and emit
reports, fbl answers one-off block error model queries, and table
generates or validates rate tables. Exit codes: 0 on success, 2 when a
simulation detects a constraint violation, 1 on usage errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .channel import ChannelSpec, coded_bit_flip_prob
from .fbl import BlerModel, block_error_rate, min_blocklength
from .grouping import (
    DEFAULT_CONSTRAINTS,
    CodebookConstraints,
    RateTable,
    default_rate_table,
    plan_block_uep,
)
from .pipeline import (
    CHANNEL_MODES,
    ExperimentConfig,
    compare_schemes,
    emit_report,
    run_experiment,
)
from .profiles import (
    ProtectionProfile,
    load_profile,
    parse_synth_spec,
    sort_profile,
    synth_profile,
)
from .repetition import assign_repetitions
from .validation import UepError

_EXIT_VIOLATION = 2


def _build_channel(snr_db, power_dbw, noise_var, eps) -> ChannelSpec:
    if eps is not None:
        return ChannelSpec.from_flip_prob(eps, power_dbw)
    if noise_var is not None:
        return ChannelSpec.from_noise(power_dbw, noise_var)
    return ChannelSpec(snr_db=snr_db, p_trans_dbw=power_dbw)


def _load_any_profile(profile_path, synth_spec) -> ProtectionProfile:
    if (profile_path is None) == (synth_spec is None):
        raise click.UsageError("give exactly one of --profile or --synth")
    if profile_path is not None:
        return load_profile(profile_path)
    return synth_profile(parse_synth_spec(synth_spec))


def _parse_constraints(sizes: str, rates: str) -> CodebookConstraints:
    return CodebookConstraints(
        sizes=tuple(int(s) for s in sizes.split(",") if s.strip()),
        rates=tuple(r.strip() for r in rates.split(",") if r.strip()),
    )


def _write_text(text: str, out: str) -> None:
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


_profile_opts = [
    click.option("--profile", "profile_path", type=click.Path(exists=True, dir_okay=False),
                 default=None, help="Profile file (.csv or .json)."),
    click.option("--synth", "synth_spec", default=None,
                 help="Synthetic profile spec: inline JSON or @file."),
]
_channel_opts = [
    click.option("--snr-db", type=float, default=0.0, show_default=True,
                 help="Channel SNR in dB."),
    click.option("--power-dbw", type=float, default=0.0, show_default=True,
                 help="Transmit power in dBW."),
    click.option("--noise-var", type=float, default=None,
                 help="Total complex noise variance; overrides --snr-db."),
    click.option("--eps", type=float, default=None,
                 help="Coded-bit flip probability; overrides --snr-db/--noise-var."),
]
_size_rate_opts = [
    click.option("--sizes", default="128,256,512,1024", show_default=True,
                 help="Allowed codebook sizes, comma separated."),
    click.option("--rates", default="3/4,2/3,15/24,14/24,13/24,1/2,1/3", show_default=True,
                 help="Allowed code rates, comma separated fractions."),
    click.option("--table", "table_path", type=click.Path(exists=True, dir_okay=False),
                 default=None, help="Rate table CSV (k,r,flip_prob); default is the model table."),
]


def _add_options(opts):
    def wrap(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return wrap


@click.group()
def cli() -> None:
    """Unequal error protection planning and simulation."""


@cli.command("plan-bit")
@_add_options(_profile_opts)
@_add_options(_channel_opts)
@click.option("--out", default="-", show_default=True, help="Output path, - for stdout.")
def plan_bit(profile_path, synth_spec, snr_db, power_dbw, noise_var, eps, out) -> None:
    """Plan per-bit repetition counts; emits JSON."""
    prof = _load_any_profile(profile_path, synth_spec)
    channel = _build_channel(snr_db, power_dbw, noise_var, eps)
    sorted_prof, perm = sort_profile(prof)
    plan = assign_repetitions(sorted_prof.mu, coded_bit_flip_prob(channel))
    payload = json.loads(plan.to_json())
    payload["permutation"] = [int(i) for i in perm.forward]
    _write_text(json.dumps(payload) + "\n", out)


@cli.command("plan-block")
@_add_options(_profile_opts)
@_add_options(_channel_opts)
@_add_options(_size_rate_opts)
@click.option("--out", default="-", show_default=True, help="Output path, - for stdout.")
def plan_block(profile_path, synth_spec, snr_db, power_dbw, noise_var, eps,
               sizes, rates, table_path, out) -> None:
    """Plan block-code groups, sizes, and rates; emits JSON."""
    prof = _load_any_profile(profile_path, synth_spec)
    channel = _build_channel(snr_db, power_dbw, noise_var, eps)
    constraints = _parse_constraints(sizes, rates)
    table = RateTable.from_csv(table_path) if table_path else None
    sorted_prof, perm = sort_profile(prof)
    plan = plan_block_uep(
        sorted_prof,
        coded_bit_flip_prob(channel),
        BlerModel.from_channel(channel),
        constraints,
        table=table,
    )
    payload = json.loads(plan.to_json())
    payload["permutation"] = [int(i) for i in perm.forward]
    _write_text(json.dumps(payload) + "\n", out)


def _parse_scheme_token(token: str) -> dict:
    """Scheme tokens: bit_uep, block_uep, rep:<R>, eq:<rate>."""
    if token in ("bit_uep", "block_uep"):
        return {"scheme": token}
    if token.startswith("rep:"):
        return {"scheme": "fixed_repetition", "r_fix": int(token[4:])}
    if token.startswith("eq:"):
        return {"scheme": "equal_rate_block", "rate": token[3:]}
    raise click.UsageError(
        f"unknown scheme {token!r}; use bit_uep, block_uep, rep:<R>, or eq:<rate>"
    )


@cli.command("simulate")
@_add_options(_profile_opts)
@_add_options(_channel_opts)
@_add_options(_size_rate_opts)
@click.option("--scheme", default="bit_uep", show_default=True,
              help="bit_uep, block_uep, rep:<R>, or eq:<rate>.")
@click.option("--trials", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, envvar="UEP_SEED",
              help="Root seed (env UEP_SEED overrides the default).")
@click.option("--channel", "channel_mode", type=click.Choice(CHANNEL_MODES),
              default="bsc", show_default=True)
@click.option("--payload", "payload_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="File with a fixed payload: one line of 0/1 characters.")
@click.option("--out", default="-", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "plotdata"]),
              default="json", show_default=True)
@click.pass_context
def simulate(ctx, profile_path, synth_spec, snr_db, power_dbw, noise_var, eps,
             sizes, rates, table_path, scheme, trials, seed, channel_mode,
             payload_path, out, fmt) -> None:
    """Monte Carlo one scheme; exits 2 if any bit misses its target."""
    prof = _load_any_profile(profile_path, synth_spec)
    channel = _build_channel(snr_db, power_dbw, noise_var, eps)
    payload = None
    if payload_path is not None:
        text = Path(payload_path).read_text().strip()
        payload = np.asarray([int(c) for c in text], dtype=np.uint8)
    cfg = ExperimentConfig(
        profile=prof,
        channel=channel,
        trials=trials,
        seed=seed,
        channel_mode=channel_mode,
        constraints=_parse_constraints(sizes, rates),
        table=RateTable.from_csv(table_path) if table_path else None,
        payload=payload,
        **_parse_scheme_token(scheme),
    )
    report = run_experiment(cfg)
    if out == "-":
        import io

        buf = io.StringIO()
        emit_report(report, buf, fmt)
        click.echo(buf.getvalue(), nl=False)
    else:
        emit_report(report, out, fmt)
    if not report.satisfied:
        ctx.exit(_EXIT_VIOLATION)


@cli.command("compare")
@_add_options(_profile_opts)
@_add_options(_channel_opts)
@_add_options(_size_rate_opts)
@click.option("--scheme", "schemes", multiple=True, required=True,
              help="Repeatable: bit_uep, block_uep, rep:<R>, eq:<rate>.")
@click.option("--trials", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, envvar="UEP_SEED")
@click.option("--channel", "channel_mode", type=click.Choice(CHANNEL_MODES),
              default="bsc", show_default=True)
@click.option("--out", default="-", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "plotdata"]),
              default="json", show_default=True)
@click.pass_context
def compare(ctx, profile_path, synth_spec, snr_db, power_dbw, noise_var, eps,
            sizes, rates, table_path, schemes, trials, seed, channel_mode,
            out, fmt) -> None:
    """Run several schemes on one profile; exits 2 on any violation."""
    prof = _load_any_profile(profile_path, synth_spec)
    channel = _build_channel(snr_db, power_dbw, noise_var, eps)
    constraints = _parse_constraints(sizes, rates)
    table = RateTable.from_csv(table_path) if table_path else None
    configs = [
        ExperimentConfig(
            profile=prof,
            channel=channel,
            trials=trials,
            seed=seed,
            channel_mode=channel_mode,
            constraints=constraints,
            table=table,
            **_parse_scheme_token(token),
        )
        for token in schemes
    ]
    result = compare_schemes(configs)
    if out == "-":
        import io

        buf = io.StringIO()
        emit_report(result, buf, fmt)
        click.echo(buf.getvalue(), nl=False)
    else:
        emit_report(result, out, fmt)
    if any(not row["satisfied"] for row in result.rows):
        ctx.exit(_EXIT_VIOLATION)


@cli.group()
def fbl() -> None:
    """Block error model queries."""


@fbl.command("bler")
@_add_options(_channel_opts)
@click.option("--n", type=int, required=True, help="Blocklength.")
@click.option("--k", type=int, required=True, help="Information bits.")
def fbl_bler(snr_db, power_dbw, noise_var, eps, n, k) -> None:
    """Modeled block error rate of an (n, k) code."""
    channel = _build_channel(snr_db, power_dbw, noise_var, eps)
    model = BlerModel.from_channel(channel)
    click.echo(repr(block_error_rate(model, n, k)))


@fbl.command("min-n")
@_add_options(_channel_opts)
@click.option("--k", type=int, required=True, help="Information bits.")
@click.option("--target", type=float, required=True, help="Target block error rate.")
def fbl_min_n(snr_db, power_dbw, noise_var, eps, k, target) -> None:
    """Shortest blocklength meeting a target block error rate."""
    channel = _build_channel(snr_db, power_dbw, noise_var, eps)
    model = BlerModel.from_channel(channel)
    click.echo(str(min_blocklength(model, k, target)))


@cli.group()
def table() -> None:
    """Rate table utilities."""


@table.command("gen")
@_add_options(_channel_opts)
@click.option("--sizes", default="128,256,512,1024", show_default=True)
@click.option("--rates", default="3/4,2/3,15/24,14/24,13/24,1/2,1/3", show_default=True)
@click.option("--out", default="-", show_default=True)
def table_gen(snr_db, power_dbw, noise_var, eps, sizes, rates, out) -> None:
    """Write the model-backed rate table as CSV."""
    channel = _build_channel(snr_db, power_dbw, noise_var, eps)
    constraints = _parse_constraints(sizes, rates)
    tab = default_rate_table(constraints, BlerModel.from_channel(channel))
    if out == "-":
        import io

        buf = io.StringIO()
        tab.to_csv(buf)
        click.echo(buf.getvalue(), nl=False)
    else:
        tab.to_csv(out)


@table.command("load")
@click.option("--table", "table_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--sizes", default="128,256,512,1024", show_default=True)
@click.option("--rates", default="3/4,2/3,15/24,14/24,13/24,1/2,1/3", show_default=True)
def table_load(table_path, sizes, rates) -> None:
    """Validate a rate table CSV against size/rate constraints."""
    constraints = _parse_constraints(sizes, rates)
    tab = RateTable.from_csv(table_path)
    tab.check_covers(constraints)
    click.echo(f"ok: {len(tab.entries)} entries cover "
               f"{len(constraints.sizes)} sizes x {len(constraints.rates)} rates")


def main(argv=None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        # with standalone_mode off, ctx.exit(code) surfaces as a return value
        rv = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except UepError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return int(rv) if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
