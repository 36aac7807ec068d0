"""Command-line surface: data generation, both training stages, evaluation, prediction, ablation."""

import functools
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable

import click
import numpy as np
from dotenv import load_dotenv

from core.tensor import ShapeError, Tensor
from data.dataset import DatasetError, SceneDataset, generate_dataset_files, make_dataset
from data.formats import FormatError, read_ppm, write_depth_visualization, write_pfm
from database.connection import get_db, init_database, ledger_url
from database.services import EvaluationService
from evaluation.report import format_report, write_report_csv
from models.network import ModelVariant
from training.ablation import run_ablation
from training.checkpoint import CheckpointError, load_checkpoint
from training.config import ConfigError, TrainConfig, load_config
from training.evaluate import (
    EvaluationResult,
    evaluate,
    evaluate_predictions,
    load_predictor,
    predict,
)
from training.trainer import TrainingDivergedError, train_stage1, train_stage2

load_dotenv()

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
DEFAULT_OUT = 'runs'

HANDLED_ERRORS = (
    CheckpointError,
    ConfigError,
    DatasetError,
    FormatError,
    ShapeError,
    TrainingDivergedError,
)

EXISTING_FILE = click.Path(exists=True, dir_okay=False)


def handle_errors(func: Callable) -> Callable:
    """Report domain errors on one line and exit with status 1."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except HANDLED_ERRORS as exc:
            click.echo(f'Error: {exc}', err=True)
            sys.exit(1)

    return wrapper


def common_options(func: Callable) -> Callable:
    options = [
        click.option(
            '--config',
            'config_path',
            type=EXISTING_FILE,
            default=None,
            help='File of "key = value" lines overriding the defaults.',
        ),
        click.option('--seed', type=int, default=None, help='Run seed.'),
        click.option(
            '--out',
            'out_dir',
            type=click.Path(file_okay=False),
            default=DEFAULT_OUT,
            show_default=True,
            help='Output directory.',
        ),
        click.option(
            '--variant',
            type=click.Choice([v.value for v in ModelVariant]),
            default=None,
            help='Stage-2 network variant.',
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _config(config_path: str | None, **overrides: Any) -> TrainConfig:
    return load_config(config_path, overrides)


def _training_set(config: TrainConfig, manifest: str | None) -> SceneDataset:
    """Samples from ``manifest``, or rendered on the fly from the config's split sizes."""
    if manifest is not None:
        return SceneDataset.from_manifest(manifest)
    train_specs, _ = make_dataset(config.n_train, config.n_val, config.seed)
    return SceneDataset(train_specs, height=config.image_size, width=config.image_size)


@click.group()
def cli() -> None:
    """Depth estimation with structure-attention memory."""
    logging.basicConfig(level=os.getenv('LOG_LEVEL', 'INFO').upper(), format=LOG_FORMAT)


@cli.command('gen-data')
@common_options
@click.option('--n-train', type=int, default=None, help='Training samples.')
@click.option('--n-val', type=int, default=None, help='Validation samples.')
@click.option('--image-size', type=int, default=None, help='Square image size (multiple of 32).')
@handle_errors
def gen_data(config_path, seed, out_dir, variant, n_train, n_val, image_size):
    """Render train/validation splits and their manifests."""
    config = _config(
        config_path,
        seed=seed,
        variant=variant,
        n_train=n_train,
        n_val=n_val,
        image_size=image_size,
    )
    train_specs, val_specs = make_dataset(config.n_train, config.n_val, config.seed)
    for split, specs in (('train', train_specs), ('val', val_specs)):
        manifest = generate_dataset_files(
            specs, out_dir, split, config.image_size, config.image_size
        )
        click.echo(f'{split}: {len(specs)} samples -> {manifest}')


@cli.command('train-stage1')
@common_options
@click.option(
    '--manifest',
    type=EXISTING_FILE,
    default=None,
    help='Training manifest; omitted renders the split in memory.',
)
@click.option('--steps', type=int, default=None, help='Optimizer steps.')
@click.option(
    '--resume', type=EXISTING_FILE, default=None, help='Stage-1 checkpoint to continue from.'
)
@handle_errors
def train_stage1_command(config_path, seed, out_dir, variant, manifest, steps, resume):
    """Train the depth auto-encoder."""
    config = _config(config_path, seed=seed, variant=variant, steps=steps)
    dataset = _training_set(config, manifest)
    result = train_stage1(
        config,
        dataset,
        out_dir=out_dir,
        resume=load_checkpoint(resume) if resume else None,
        ledger_url=ledger_url(),
    )
    click.echo(f'stage-1 checkpoint: {result.checkpoint_path}')


@cli.command('train-stage2')
@common_options
@click.option(
    '--stage1',
    'stage1_path',
    type=EXISTING_FILE,
    required=True,
    help='Stage-1 checkpoint providing the depth encoder.',
)
@click.option(
    '--manifest',
    type=EXISTING_FILE,
    default=None,
    help='Training manifest; omitted renders the split in memory.',
)
@click.option('--steps', type=int, default=None, help='Optimizer steps.')
@click.option(
    '--resume', type=EXISTING_FILE, default=None, help='Stage-2 checkpoint to continue from.'
)
@handle_errors
def train_stage2_command(config_path, seed, out_dir, variant, stage1_path, manifest, steps, resume):
    """Train image encoder, memory and depth predictor."""
    config = _config(config_path, seed=seed, variant=variant, steps=steps)
    dataset = _training_set(config, manifest)
    result = train_stage2(
        config,
        dataset,
        load_checkpoint(stage1_path),
        out_dir=out_dir,
        resume=load_checkpoint(resume) if resume else None,
        ledger_url=ledger_url(),
    )
    click.echo(f'stage-2 checkpoint: {result.checkpoint_path}')


def _record_evaluation(result: EvaluationResult) -> None:
    url = ledger_url()
    if not url:
        return
    init_database(url)
    with get_db(url) as db:
        EvaluationService.record(
            db,
            label=result.label,
            metrics=result.report.as_dict(),
            samples=len(result.scored),
            failures=len(result.failures),
        )


@cli.command('eval')
@common_options
@click.option('--manifest', type=EXISTING_FILE, required=True, help='Validation manifest.')
@click.option(
    '--checkpoint',
    'checkpoint_path',
    type=EXISTING_FILE,
    default=None,
    help='Stage-2 checkpoint to evaluate.',
)
@click.option(
    '--predictions',
    'predictions_dir',
    type=click.Path(exists=True, file_okay=False),
    default=None,
    help='Directory of PFM predictions named like the manifest depth files.',
)
@click.option('--label', default=None, help='Row label in the report.')
@handle_errors
def eval_command(
    config_path, seed, out_dir, variant, manifest, checkpoint_path, predictions_dir, label
):
    """Score a checkpoint or a directory of predictions."""
    if (checkpoint_path is None) == (predictions_dir is None):
        raise click.UsageError('give exactly one of --checkpoint or --predictions')
    dataset = SceneDataset.from_manifest(manifest)
    if checkpoint_path is not None:
        result = evaluate(load_checkpoint(checkpoint_path), dataset, label=label)
    else:
        result = evaluate_predictions(dataset, predictions_dir, label=label or 'predictions')
    click.echo(format_report([result.report], [result.label]), nl=False)
    if result.failures:
        click.echo(
            f'{len(result.failures)} of {len(result.samples)} samples could not be evaluated',
            err=True,
        )
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    write_report_csv(Path(out_dir) / f'eval_{result.label}.csv', [result.report], [result.label])
    _record_evaluation(result)


@cli.command('predict')
@common_options
@click.option(
    '--checkpoint', 'checkpoint_path', type=EXISTING_FILE, required=True, help='Stage-2 checkpoint.'
)
@click.argument('image', type=EXISTING_FILE)
@click.option(
    '--output',
    type=click.Path(dir_okay=False),
    default=None,
    help='PFM path; defaults to <out>/<image stem>.pfm.',
)
@handle_errors
def predict_command(config_path, seed, out_dir, variant, checkpoint_path, image, output):
    """Predict depth for one PPM image; writes a PFM and a grayscale PPM preview."""
    predictor, _ = load_predictor(load_checkpoint(checkpoint_path))
    rgb = Tensor(read_ppm(image)[None], copy=False)
    depth = predict(predictor, rgb)
    target = Path(output) if output else Path(out_dir) / f'{Path(image).stem}.pfm'
    target.parent.mkdir(parents=True, exist_ok=True)
    write_pfm(target, depth)
    preview = target.with_name(f'{target.stem}_vis.ppm')
    write_depth_visualization(preview, depth)
    low, high = float(np.min(depth.values)), float(np.max(depth.values))
    click.echo(f'depth: {target} (range {low:.3f}..{high:.3f})')
    click.echo(f'preview: {preview}')


@cli.command('ablate')
@common_options
@click.option('--seeds', default='0,1,2', show_default=True, help='Comma-separated seeds.')
@click.option('--stage1-steps', type=int, default=None, help='Stage-1 steps per seed.')
@click.option('--stage2-steps', type=int, default=None, help='Stage-2 steps per variant and seed.')
@handle_errors
def ablate_command(config_path, seed, out_dir, variant, seeds, stage1_steps, stage2_steps):
    """Run the pure/fpn/align/som ladder over several seeds."""
    config = _config(config_path, seed=seed)
    try:
        seed_list = [int(s) for s in seeds.split(',') if s.strip()]
    except ValueError:
        raise click.BadParameter(
            f'{seeds!r} is not a comma-separated list of integers', param_hint='--seeds'
        ) from None
    result = run_ablation(
        config, seed_list, stage1_steps=stage1_steps, stage2_steps=stage2_steps, out_dir=out_dir
    )
    verdict = 'holds' if result.ordering_holds() else 'does not hold'
    click.echo(result.table(), nl=False)
    click.echo(f'ordering som < align < fpn on rmse_log: {verdict}')
    click.echo(f'stage-1 below half the median baseline: {"yes" if result.stage1_converged() else "no"}')
