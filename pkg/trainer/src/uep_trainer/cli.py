"""Command-line interface: ``trainer fit | flip-study | ordering-study``."""

from __future__ import annotations

import csv
import io
import json
import sys

import click

from .errors import TrainerError
from .studies import ORDERINGS, run_ordering_study, segment_flip_table
from .training import TrainConfig, TrainedProfileBundle, train
from .uep_cli import load_plan, plan_block

FULL_EPOCHS = 30


def _emit(rows: list[dict], fmt: str, out: str | None, fieldnames: list[str]) -> None:
    if fmt == "json":
        text = json.dumps(rows, indent=2)
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in fieldnames})
        text = buf.getvalue().rstrip("\n")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


@click.group()
def cli() -> None:
    """Train flip-probability profiles and probe what they mean for images."""


@cli.command()
@click.option("--dataset", type=click.Choice(["mnist", "cifar10", "cifar100"]),
              default="mnist", show_default=True)
@click.option("--lam", type=float, default=1e-4, show_default=True,
              help="Weight of the pull of flip probabilities toward 0.5.")
@click.option("--bits", type=int, default=8, show_default=True,
              help="Quantizer bits per feature value.")
@click.option("--epochs", type=int, default=None,
              help=f"Training epochs [default: {TrainConfig.epochs}, "
                   f"or {FULL_EPOCHS} with --full].")
@click.option("--full", is_flag=True,
              help="Run the long training schedule instead of the desk-scale one.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--batch-size", type=int, default=128, show_default=True)
@click.option("--train-samples", type=int, default=24000, show_default=True)
@click.option("--test-samples", type=int, default=512, show_default=True)
@click.option("--data-dir", type=click.Path(), default=None,
              help="Where to look for (or download) the real dataset.")
@click.option("--data-source", type=click.Choice(["auto", "real", "synthetic"]),
              default="auto", show_default=True,
              help="auto falls back to the synthetic stand-in when the real "
                   "dataset is unreachable.")
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Bundle directory to write.")
def fit(dataset: str, lam: float, bits: int, epochs: int | None, full: bool,
        seed: int, batch_size: int, train_samples: int, test_samples: int,
        data_dir: str | None, data_source: str, out_dir: str) -> None:
    """Train the autoencoder and export the learned flip profile."""
    if epochs is None:
        epochs = FULL_EPOCHS if full else TrainConfig.epochs
    cfg = TrainConfig(
        dataset=dataset, lam=lam, bits=bits, epochs=epochs, seed=seed,
        batch_size=batch_size, train_samples=train_samples,
        test_samples=test_samples, data_dir=data_dir, data_source=data_source,
    )
    bundle = train(cfg, progress=lambda line: click.echo(line, err=True))
    path = bundle.save(out_dir)
    click.echo(json.dumps({
        "bundle": str(path),
        "profile": str(path / "profile.json"),
        "semantic_bits": int(bundle.mu.size),
        "mu_min": float(bundle.mu.min()),
        "mu_max": float(bundle.mu.max()),
        "clean_psnr": bundle.meta["clean_psnr"],
        "data_source": bundle.meta["data_source"],
    }, indent=2))


@cli.command("flip-study")
@click.option("--bundle", "bundle_dir", type=click.Path(), required=True)
@click.option("--segments", type=int, default=8, show_default=True)
@click.option("--images", type=int, default=256, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
              default="json", show_default=True)
@click.option("--out", type=click.Path(), default=None)
def flip_study(bundle_dir: str, segments: int, images: int, fmt: str,
               out: str | None) -> None:
    """Flip one mu-sorted segment at a time and report PSNR/SSIM."""
    bundle = TrainedProfileBundle.load(bundle_dir)
    rows = segment_flip_table(bundle, segments=segments, images=images)
    _emit(rows, fmt, out, ["segment", "flipped_bits", "psnr", "ssim"])


@cli.command("ordering-study")
@click.option("--bundle", "bundle_dir", type=click.Path(), required=True)
@click.option("--plan", "plan_path", type=click.Path(), default=None,
              help="Block-plan JSON; computed via `uep plan-block` when omitted.")
@click.option("--snr-db", type=float, default=0.0, show_default=True,
              help="Channel SNR used when the plan is computed here.")
@click.option("--ordering", type=click.Choice([*ORDERINGS, "all"]),
              default="all", show_default=True)
@click.option("--images", type=int, default=256, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--genie", is_flag=True, help="Error-free channel reference.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
              default="json", show_default=True)
@click.option("--out", type=click.Path(), default=None)
def ordering_study(bundle_dir: str, plan_path: str | None, snr_db: float,
                   ordering: str, images: int, seed: int, genie: bool,
                   fmt: str, out: str | None) -> None:
    """Score a block plan with the bits assigned in different orders."""
    bundle = TrainedProfileBundle.load(bundle_dir)
    if plan_path is not None:
        plan = load_plan(plan_path)
    else:
        from pathlib import Path
        plan = plan_block(Path(bundle_dir) / "profile.json", snr_db=snr_db)
    wanted = ORDERINGS if ordering == "all" else (ordering,)
    rows = run_ordering_study(
        bundle, plan, orderings=wanted, images=images, seed=seed, genie=genie
    )
    _emit(rows, fmt, out, ["ordering", "psnr", "mean_flip_prob", "flipped_fraction"])


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=True)
    except TrainerError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except SystemExit as exc:  # click's own exits pass through unchanged
        return int(exc.code or 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
