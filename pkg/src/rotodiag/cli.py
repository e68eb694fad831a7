"""Command-line front end.

Exit codes: 0 success, 1 configuration/validation error, 2 stage failure.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from datetime import datetime, timezone

import click
import numpy as np
import yaml

from .config import PipelineConfig, default_config
from .dataset import read_feature_csv
from .errors import ConfigError, PipelineError
from .gbm import model_from_json
from .metrics import EvalReport
from . import pipeline as pl
from .plots import plot_importance_svg, plot_sweep_svg
from .search import SweepAxis, grid_search, greedy_wrapper
from .synthgen import SynthSpec, generate_corpus

logger = logging.getLogger("rotodiag")

EXIT_CONFIG = 1
EXIT_STAGE = 2


def _load_config(path) -> PipelineConfig:
    if path is None:
        return default_config()
    return PipelineConfig.load(path)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="debug logging")
def cli(verbose):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("-o", "--out", required=True, type=click.Path())
@click.option("--classes", default=6, show_default=True)
@click.option("--files-per-class", default=10, show_default=True)
@click.option("--duration", default=5.0, show_default=True)
@click.option("--rate", default=8000, show_default=True)
@click.option("--seed", default=7, show_default=True)
def synth(out, classes, files_per_class, duration, rate, seed):
    """Generate the deterministic synthetic measurement corpus."""
    spec = SynthSpec(n_classes=classes, files_per_class=files_per_class,
                     duration_s=duration, sample_rate_hz=rate, seed=seed)
    entries = generate_corpus(spec, out)
    click.echo(f"wrote {len(entries)} files under {out}")


@cli.command()
@click.option("-c", "--config", "config_path", type=click.Path(exists=True))
@click.option("-i", "--input", "input_dir", required=True, type=click.Path(exists=True))
@click.option("-o", "--out", required=True, type=click.Path())
@click.option("--resume", is_flag=True)
def convert(config_path, input_dir, out, resume):
    """CSV measurements -> resampled, quantized mono WAVs."""
    cfg = _load_config(config_path)
    entries = pl.stage_convert(cfg, input_dir, out, resume)
    click.echo(f"converted {len(entries)} files")


@cli.command()
@click.option("-c", "--config", "config_path", type=click.Path(exists=True))
@click.option("-i", "--input", "input_dir", required=True, type=click.Path(exists=True))
@click.option("-o", "--out", required=True, type=click.Path())
@click.option("--resume", is_flag=True)
def preprocess(config_path, input_dir, out, resume):
    """Normalize, gate silence, Wiener-filter converted WAVs."""
    cfg = _load_config(config_path)
    entries = pl.stage_preprocess(cfg, input_dir, out, resume)
    click.echo(f"preprocessed {len(entries)} files")


@cli.command()
@click.option("-c", "--config", "config_path", type=click.Path(exists=True))
@click.option("-i", "--input", "input_dir", required=True, type=click.Path(exists=True))
@click.option("-o", "--out", required=True, type=click.Path())
@click.option("--resume", is_flag=True)
def extract(config_path, input_dir, out, resume):
    """Processed WAVs -> 144-feature CSV."""
    cfg = _load_config(config_path)
    ds = pl.stage_extract(cfg, input_dir, out, resume)
    click.echo(f"extracted {len(ds)} rows -> {out}")


@cli.command()
@click.option("-c", "--config", "config_path", type=click.Path(exists=True))
@click.option("--features", required=True, type=click.Path(exists=True))
@click.option("-o", "--out", required=True, type=click.Path())
@click.option("--resume", is_flag=True)
def split(config_path, features, out, resume):
    """File-aware holdout plus train-fitted scaling."""
    cfg = _load_config(config_path)
    ds = read_feature_csv(features)
    train, test = pl.stage_split(cfg, ds, os.path.join(out, "split"), resume)
    pl.stage_scale(cfg, train, test, os.path.join(out, "scaled"), resume)
    click.echo(f"train rows {len(train)}, test rows {len(test)}")


@cli.command()
@click.option("-c", "--config", "config_path", type=click.Path(exists=True))
@click.option("--train", "train_csv", required=True, type=click.Path(exists=True),
              help="scaled training split CSV")
@click.option("-o", "--out", required=True, type=click.Path())
@click.option("--resume", is_flag=True)
def augment(config_path, train_csv, out, resume):
    """Oversample minority classes of the scaled training split."""
    cfg = _load_config(config_path)
    train_s = read_feature_csv(train_csv)
    augmented = pl.stage_augment(cfg, train_s, out, resume)
    click.echo(f"augmented split holds {len(augmented)} rows")


@cli.command()
@click.option("-c", "--config", "config_path", type=click.Path(exists=True))
@click.option("--train", "train_csv", required=True, type=click.Path(exists=True),
              help="augmented (scaled) training CSV")
@click.option("-o", "--out", required=True, type=click.Path())
@click.option("--resume", is_flag=True)
def train(config_path, train_csv, out, resume):
    """Train the boosted-tree model."""
    cfg = _load_config(config_path)
    augmented = read_feature_csv(train_csv)
    pl.stage_train(cfg, augmented, out, resume)
    click.echo(f"model written to {out}")


@cli.command()
@click.option("-c", "--config", "config_path", type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_csv", required=True, type=click.Path(exists=True),
              help="scaled test split CSV")
@click.option("-o", "--out", required=True, type=click.Path())
def evaluate(config_path, model_path, test_csv, out):
    """Score a trained model on the held-out test split."""
    cfg = _load_config(config_path)
    with open(model_path) as fh:
        model = model_from_json(fh.read())
    test_s = read_feature_csv(test_csv)
    report = pl.stage_evaluate(cfg, model, test_s, out)
    click.echo(report.text_block())


@cli.command()
@click.option("-c", "--config", "config_path", type=click.Path(exists=True))
@click.option("-i", "--input", "input_dir", required=True, type=click.Path(exists=True))
@click.option("-o", "--out", required=True, type=click.Path())
@click.option("--stamp/--exact-dir", default=True,
              help="create a run-stamped subdirectory (default) or write into OUT directly")
@click.option("--resume", is_flag=True)
def run(config_path, input_dir, out, stamp, resume):
    """Execute the full pipeline and print the test-split report."""
    cfg = _load_config(config_path)
    if stamp:
        tag = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        out = os.path.join(out, f"run-{tag}-{cfg.config_hash()}")
    report = pl.run_pipeline(cfg, input_dir, out, resume=resume)
    click.echo(f"artifacts under {out}")
    click.echo(report.text_block())


@cli.command()
@click.option("-c", "--config", "config_path", type=click.Path(exists=True))
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="sweep definition YAML: axes, k, metric, seed")
@click.option("--features", type=click.Path(exists=True),
              help="unscaled training-split feature CSV")
@click.option("-i", "--input", "input_dir", type=click.Path(exists=True),
              help="raw corpus dir; required when axes touch pre-feature stages")
@click.option("-o", "--out", required=True, type=click.Path())
@click.option("--workers", default=1, show_default=True)
def sweep(config_path, spec_path, features, input_dir, out, workers):
    """Grid search over config axes with file-aware CV; writes leaderboard + SVGs."""
    cfg = _load_config(config_path)
    with open(spec_path) as fh:
        doc = yaml.safe_load(fh)
    axes = [SweepAxis(a["path"], list(a["values"])) for a in doc["axes"]]
    k = int(doc.get("k", cfg.cv_folds))
    metric = doc.get("metric", cfg.selection_metric)
    seed = int(doc.get("seed", cfg.split.seed))
    builder = None
    ds = None
    if pl.axes_touch_upstream([a.path for a in axes]):
        if input_dir is None:
            raise ConfigError("axes touch signal/preprocess/framing parameters; "
                              "pass -i with the raw corpus")
        builder = pl.make_dataset_builder(input_dir)
        ds = builder(cfg)
    else:
        if features is None:
            raise ConfigError("pass --features with the training-split feature CSV")
        ds = read_feature_csv(features)
    os.makedirs(out, exist_ok=True)
    board = grid_search(axes, cfg, ds, k=k, metric=metric, seed=seed,
                        workers=workers, dataset_builder=builder)
    board.write_csv(os.path.join(out, "leaderboard.csv"))
    for axis in axes:
        name = axis.path.replace(".", "_")
        plot_sweep_svg(board, axis.path, os.path.join(out, f"sweep_{name}.svg"))
    best = board.best()
    click.echo(f"best {metric}: {best.mean_metrics[metric]:.4f} at {best.values}")


@cli.command()
@click.option("-c", "--config", "config_path", type=click.Path(exists=True))
@click.option("--features", required=True, type=click.Path(exists=True),
              help="unscaled training-split feature CSV")
@click.option("--candidates", default="24:144", show_default=True,
              help="feature index range start:stop or comma list")
@click.option("--metric", default="fbeta_macro", show_default=True)
@click.option("--epsilon", default=0.0, show_default=True)
@click.option("--max-features", default=None, type=int)
@click.option("-o", "--out", required=True, type=click.Path())
def wrap(config_path, features, candidates, metric, epsilon, max_features, out):
    """Greedy forward feature selection; writes the wrapper trace CSV."""
    cfg = _load_config(config_path)
    ds = read_feature_csv(features)
    if ":" in candidates:
        start, stop = candidates.split(":")
        cand = list(range(int(start), int(stop)))
    else:
        cand = [int(v) for v in candidates.split(",")]
    trace = greedy_wrapper(ds, cfg, cand, metric=metric, epsilon=epsilon,
                           max_features=max_features)
    trace.write_csv(out)
    click.echo(f"selected {len(trace.steps)} features -> {out}")


@cli.command()
@click.option("-o", "--out", "run_dir", required=True, type=click.Path(exists=True),
              help="a finished run directory")
def report(run_dir):
    """Re-render report tables and importance plot from run artifacts."""
    model_path = os.path.join(run_dir, "model.json")
    report_csv = os.path.join(run_dir, "report", "report.csv")
    if os.path.exists(model_path):
        with open(model_path) as fh:
            model = model_from_json(fh.read())
        from .gbm import feature_importance
        plot_importance_svg(feature_importance(model, "weight"),
                            os.path.join(run_dir, "report", "importance.svg"))
        click.echo("importance plot refreshed")
    if os.path.exists(report_csv):
        with open(report_csv) as fh:
            click.echo(fh.read())
    board_csv = os.path.join(run_dir, "leaderboard.csv")
    if os.path.exists(board_csv):
        with open(board_csv) as fh:
            click.echo(fh.read())


def main():
    try:
        cli(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_CONFIG)
    except click.Abort:
        sys.exit(EXIT_CONFIG)
    except (ConfigError, ValueError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except PipelineError as exc:
        click.echo(f"stage failure: {exc}", err=True)
        sys.exit(EXIT_STAGE)


if __name__ == "__main__":
    main()
