"""Scoring trained networks (or saved predictions) on a validation set."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from core.tensor import Tensor, no_grad
from data.dataset import DatasetError, SceneDataset
from data.formats import FormatError, read_pfm
from evaluation.metrics import MetricsReport, compute_metrics, upsample_prediction
from losses.objectives import l_ae
from models.network import AUTOENCODER_PREFIX, PREDICTOR_PREFIX, DepthAutoEncoder, DepthPredictor
from training.checkpoint import Checkpoint, CheckpointError
from training.config import TrainConfig
from training.trainer import build_autoencoder, build_predictor, depth_target

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SampleResult:
    name: str
    report: MetricsReport | None = None
    error: str | None = None


@dataclass
class EvaluationResult:
    label: str
    report: MetricsReport
    samples: list[SampleResult] = field(default_factory=list)

    @property
    def failures(self) -> list[SampleResult]:
        return [s for s in self.samples if s.report is None]

    @property
    def scored(self) -> list[SampleResult]:
        return [s for s in self.samples if s.report is not None]


def checkpoint_config(checkpoint: Checkpoint, stage: int) -> TrainConfig:
    if checkpoint.stage != stage:
        raise CheckpointError(f'expected a stage-{stage} checkpoint, got stage {checkpoint.stage}')
    if 'train' not in checkpoint.config:
        raise CheckpointError('checkpoint has no config echo; its .json sidecar is missing')
    return TrainConfig.from_dict(checkpoint.config['train'])


def load_predictor(checkpoint: Checkpoint) -> tuple[DepthPredictor, TrainConfig]:
    config = checkpoint_config(checkpoint, 2)
    predictor = build_predictor(config)
    try:
        predictor.load_state_dict(checkpoint.tensors, prefix=PREDICTOR_PREFIX)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f'checkpoint does not match its {config.variant.value} predictor: {exc}') from exc
    return predictor, config


def load_autoencoder(checkpoint: Checkpoint) -> tuple[DepthAutoEncoder, TrainConfig]:
    config = checkpoint_config(checkpoint, 1)
    model = build_autoencoder(config)
    try:
        model.load_state_dict(checkpoint.tensors, prefix=AUTOENCODER_PREFIX)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f'checkpoint does not match the auto-encoder: {exc}') from exc
    return model, config


def predict(predictor: DepthPredictor, rgb: Tensor) -> Tensor:
    """Full-resolution depth for ``rgb`` (prediction upsampled from 1/4)."""
    _, _, height, width = rgb.dims
    with no_grad():
        output = predictor(rgb)
    return upsample_prediction(output.depth, height, width)


def _score(
    dataset: SceneDataset,
    label: str,
    score_one: Callable[[int], MetricsReport],
) -> EvaluationResult:
    samples = []
    for index in range(len(dataset)):
        name = dataset.name(index)
        try:
            samples.append(SampleResult(name, report=score_one(index)))
        except (DatasetError, FormatError, OSError) as exc:
            logger.warning('Skipping sample %s: %s', name, exc)
            samples.append(SampleResult(name, error=str(exc)))
    scored = [s.report for s in samples if s.report is not None]
    if not scored:
        raise DatasetError(f'no sample of {len(dataset)} could be evaluated')
    logger.info('Evaluated %s on %d samples (%d failed)', label, len(scored), len(samples) - len(scored))
    return EvaluationResult(label, MetricsReport.mean(scored), samples)


def evaluate(checkpoint: Checkpoint, dataset: SceneDataset, label: str | None = None) -> EvaluationResult:
    """Forward every sample, upsample, score, and average the per-sample reports."""
    predictor, config = load_predictor(checkpoint)

    def score_one(index: int) -> MetricsReport:
        sample = dataset[index]
        return compute_metrics(predict(predictor, sample.rgb), sample.depth)

    return _score(dataset, label or config.variant.value, score_one)


def evaluate_predictions(
    dataset: SceneDataset, predictions_dir: str | Path, label: str = 'predictions'
) -> EvaluationResult:
    """Score PFM files in ``predictions_dir`` named like the manifest's depth files."""
    if dataset.entries is None:
        raise DatasetError('scoring saved predictions needs a manifest-backed dataset')
    predictions_dir = Path(predictions_dir)

    def score_one(index: int) -> MetricsReport:
        entry = dataset.entries[index]  # type: ignore[index]
        prediction = read_pfm(predictions_dir / entry.depth_path.name)
        return compute_metrics(prediction, read_pfm(entry.depth_path))

    return _score(dataset, label, score_one)


def median_baseline(train: SceneDataset, val: SceneDataset) -> float:
    """Validation ``l_ae`` of a constant prediction equal to the training median depth."""
    targets = [depth_target(sample.depth).values for sample in train]
    median = float(np.median(np.concatenate([t.reshape(-1) for t in targets])))
    losses = []
    with no_grad():
        for sample in val:
            target = depth_target(sample.depth)
            constant = Tensor(np.full(target.dims, median), copy=False)
            losses.append(l_ae(constant, target).item())
    return float(np.mean(losses))


def validation_l_ae(checkpoint: Checkpoint, val: SceneDataset) -> float:
    """Mean reconstruction loss of a stage-1 checkpoint over ``val``."""
    model, _ = load_autoencoder(checkpoint)
    losses = []
    with no_grad():
        for sample in val:
            reconstruction, _ = model(sample.depth)
            losses.append(l_ae(reconstruction, depth_target(sample.depth)).item())
    return float(np.mean(losses))
