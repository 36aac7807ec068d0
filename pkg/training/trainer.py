"""Two-stage training.

Stage 1 fits the depth auto-encoder on ground-truth depth alone. Stage 2
freezes the depth encoder, uses its pyramid as alignment targets, and trains
the image encoder, the optional memory stack and the depth predictor.

Every batch and every augmentation draw comes from a generator derived from
``(seed, stage, step)``, so a resumed run replays the same stream as an
uninterrupted one.
"""

from __future__ import annotations

import logging
import math
from contextlib import ExitStack
from dataclasses import dataclass, field
from pathlib import Path

from core import ops
from core.tensor import ComputeGraph, Tensor, no_grad
from data.augment import AugmentConfig, augment
from data.dataset import DatasetError, SceneDataset, collate
from database.recorder import RunRecorder
from losses.objectives import LossParts, l_ae, l_cmrc, l_depth, l_gradient, l_normal, total_stage2
from models.backbone import PYRAMID_STRIDES, DenseEncoder, encode
from models.module import Module
from models.network import (
    AUTOENCODER_PREFIX,
    DEPTH_ENCODER_PREFIX,
    PREDICTOR_PREFIX,
    DepthAutoEncoder,
    DepthPredictor,
)
from monitoring.traces import AttentionTraceWriter, TrainingLogWriter
from training.checkpoint import Checkpoint, CheckpointError, save_checkpoint
from training.config import ConfigError, TrainConfig
from training.optimizer import AdamW
from utils.rng import derive_rng

logger = logging.getLogger(__name__)

AUGMENTATION = AugmentConfig()


class TrainingDivergedError(RuntimeError):
    """A loss became NaN or infinite; ``step`` is the offending step index."""

    def __init__(self, step: int, name: str, value: float):
        super().__init__(f'{name} is {value} at step {step}')
        self.step = step


@dataclass
class StageResult:
    checkpoint: Checkpoint
    history: list[dict[str, float]] = field(default_factory=list)
    cmrc_evaluations: int = 0
    checkpoint_path: Path | None = None
    depth_encoder: DenseEncoder | None = None


def build_autoencoder(config: TrainConfig) -> DepthAutoEncoder:
    return DepthAutoEncoder(config.encoder_config, derive_rng(config.seed, 'init', 'autoencoder'))


def build_predictor(config: TrainConfig) -> DepthPredictor:
    return DepthPredictor(
        config.variant,
        config.encoder_config,
        config.som_config,
        config.image_dims,
        derive_rng(config.seed, 'init', 'predictor'),
    )


def depth_target(depth: Tensor) -> Tensor:
    """Ground truth block-averaged to the network's output resolution."""
    with no_grad():
        return ops.downsample_mean(depth, PYRAMID_STRIDES[0])


def sample_batch(dataset: SceneDataset, config: TrainConfig, stage: int, step: int) -> tuple[Tensor, Tensor]:
    rng = derive_rng(config.seed, 'batch', stage, step)
    indices = rng.integers(0, len(dataset), size=config.batch_size)
    samples = [dataset[int(i)] for i in indices]
    if config.augment:
        # no colour jitter in stage 1: the auto-encoder never sees rgb
        samples = [augment(s, AUGMENTATION, rng, color=stage == 2) for s in samples]
    return collate(samples)


def _finite(step: int, name: str, value: Tensor) -> float:
    scalar = value.item()
    if not math.isfinite(scalar):
        raise TrainingDivergedError(step, name, scalar)
    return scalar


def _make_optimizer(model: Module, prefix: str, config: TrainConfig) -> AdamW:
    return AdamW(
        model.parameter_dict(prefix),
        lr=config.learning_rate,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        eps=config.adam_eps,
        weight_decay=config.weight_decay,
    )


def _restore(checkpoint: Checkpoint, model: Module, prefix: str, optimizer: AdamW) -> int:
    try:
        model.load_state_dict(checkpoint.tensors, prefix=prefix)
        optimizer.load_state_dict(checkpoint.tensors)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f'cannot resume from checkpoint: {exc}') from exc
    logger.info('Resuming at step %d', optimizer.step_count)
    return optimizer.step_count


def _check_dataset(dataset: SceneDataset, config: TrainConfig) -> None:
    if len(dataset) == 0:
        raise DatasetError('training set is empty')
    size = dataset[0].size
    if size != config.image_dims:
        raise ConfigError(f'samples are {size[0]}x{size[1]} but image_size is {config.image_size}')


def _echo(config: TrainConfig, stage: int) -> dict:
    return {'stage': stage, 'train': config.to_dict()}


def _check_resume_variant(resume: Checkpoint, config: TrainConfig, stage: int) -> None:
    if resume.stage is not None and resume.stage != stage:
        raise CheckpointError(f'cannot resume stage {stage} from a stage-{resume.stage} checkpoint')
    stored = resume.config.get('train', {}).get('variant')
    if stage == 2 and stored is not None and stored != config.variant.value:
        raise CheckpointError(
            f'checkpoint was trained as variant {stored!r}, config asks for {config.variant.value!r}'
        )


def train_stage1(
    config: TrainConfig,
    dataset: SceneDataset,
    out_dir: str | Path | None = None,
    resume: Checkpoint | None = None,
    ledger_url: str | None = None,
) -> StageResult:
    """Fit ``(E_d, D_d)`` on ``l_ae`` only."""
    _check_dataset(dataset, config)
    steps = config.steps_for(1)
    model = build_autoencoder(config)
    optimizer = _make_optimizer(model, AUTOENCODER_PREFIX, config)
    start = 0
    if resume is not None:
        _check_resume_variant(resume, config, 1)
        start = _restore(resume, model, AUTOENCODER_PREFIX, optimizer)
    recorder = (
        RunRecorder(ledger_url, 1, config.seed, config.to_dict(), flush_every=config.log_every)
        if ledger_url
        else None
    )
    history: list[dict[str, float]] = []
    logger.info('Stage 1: %d steps from step %d, %d training samples', steps, start, len(dataset))

    with ExitStack() as stack:
        log = None
        if out_dir is not None:
            log = stack.enter_context(TrainingLogWriter(Path(out_dir) / 'stage1_log.csv', append=start > 0))
        try:
            for step in range(start, steps):
                _, depth = sample_batch(dataset, config, 1, step)
                target = depth_target(depth)
                optimizer.zero_grad()
                with ComputeGraph() as graph:
                    reconstruction, _ = model(depth)
                    loss = l_ae(reconstruction, target)
                value = _finite(step, 'l_ae', loss)
                graph.backward(loss)
                optimizer.step(lr=config.learning_rate_at(step, len(dataset)))

                row = {'l_depth': value, 'l_cmrc': 0.0, 'l_gradient': 0.0, 'l_normal': 0.0, 'total': value}
                history.append({'step': step, **row})
                if log is not None:
                    log.write(step, **row)
                if recorder is not None:
                    recorder.log_step(step, row)
                if step % config.log_every == 0 or step == steps - 1:
                    logger.info('stage1 step %d: l_ae=%.5f', step, value)
        except TrainingDivergedError as exc:
            if recorder is not None:
                recorder.finish('diverged', error=str(exc))
            raise

    checkpoint = Checkpoint(
        tensors={**model.state_dict(AUTOENCODER_PREFIX), **optimizer.state_dict()},
        config=_echo(config, 1),
    )
    path = save_checkpoint(Path(out_dir) / 'stage1.ckpt', checkpoint) if out_dir is not None else None
    if recorder is not None:
        recorder.finish('completed', checkpoint_path=str(path) if path else None)
    return StageResult(checkpoint, history, checkpoint_path=path)


def load_depth_encoder(stage1: Checkpoint, config: TrainConfig) -> DenseEncoder:
    """The frozen ``E_d`` of a stage-1 checkpoint."""
    if stage1.stage is not None and stage1.stage != 1:
        raise CheckpointError(f'expected a stage-1 checkpoint, got stage {stage1.stage}')
    encoder = DenseEncoder(1, config.encoder_config, derive_rng(config.seed, 'init', 'depth-encoder'))
    try:
        encoder.load_state_dict(stage1.tensors, prefix=f'{AUTOENCODER_PREFIX}encoder.')
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f'stage-1 checkpoint does not match the encoder configuration: {exc}') from exc
    encoder.freeze()
    return encoder


def train_stage2(
    config: TrainConfig,
    dataset: SceneDataset,
    stage1: Checkpoint,
    out_dir: str | Path | None = None,
    resume: Checkpoint | None = None,
    ledger_url: str | None = None,
) -> StageResult:
    """Train ``(E_i, memory, P_d)`` against the frozen depth encoder's features."""
    _check_dataset(dataset, config)
    steps = config.steps_for(2)
    schedule = config.schedule(steps)
    weights = config.weights
    variant = config.variant
    depth_encoder = load_depth_encoder(stage1, config)
    predictor = build_predictor(config)
    optimizer = _make_optimizer(predictor, PREDICTOR_PREFIX, config)
    start = 0
    if resume is not None:
        _check_resume_variant(resume, config, 2)
        start = _restore(resume, predictor, PREDICTOR_PREFIX, optimizer)
    recorder = (
        RunRecorder(
            ledger_url,
            2,
            config.seed,
            config.to_dict(),
            variant=variant.value,
            flush_every=config.log_every,
        )
        if ledger_url
        else None
    )
    history: list[dict[str, float]] = []
    cmrc_evaluations = 0
    logger.info(
        'Stage 2 (%s): %d steps from step %d, gradient term from %d, normal term from %d',
        variant.value,
        steps,
        start,
        schedule.gradient_on_step,
        schedule.normal_on_step,
    )

    with ExitStack() as stack:
        log = trace = None
        if out_dir is not None:
            stem = Path(out_dir) / f'stage2_{variant.value}'
            log = stack.enter_context(TrainingLogWriter(f'{stem}_log.csv', append=start > 0))
            if variant.uses_memory:
                trace = stack.enter_context(
                    AttentionTraceWriter(f'{stem}_attention.csv', config.memory_size, append=start > 0)
                )
        try:
            for step in range(start, steps):
                rgb, depth = sample_batch(dataset, config, 2, step)
                target = depth_target(depth)
                with no_grad():
                    z_d = list(encode(depth_encoder, depth).levels)
                optimizer.zero_grad()
                with ComputeGraph() as graph:
                    output = predictor(rgb)
                    parts = LossParts(depth=l_depth(output.depth, target))
                    if variant.uses_alignment and weights.lambda_cmrc != 0.0:
                        parts.cmrc = l_cmrc(output.aligned_features, z_d)
                        cmrc_evaluations += 1
                    if schedule.gradient_active(step) and weights.lambda_gradient != 0.0:
                        parts.gradient = l_gradient(output.depth, target)
                    if schedule.normal_active(step) and weights.lambda_normal != 0.0:
                        parts.normal = l_normal(output.depth, target)
                    total = total_stage2(parts, weights, schedule, step)
                total_value = _finite(step, 'stage-2 loss', total)
                graph.backward(total)
                optimizer.step(
                    lr=config.learning_rate_at(step, len(dataset)),
                    scales=predictor.memory_step_scales(output.attention),
                )

                row = {
                    'l_depth': parts.depth.item(),
                    'l_cmrc': parts.cmrc.item() if parts.cmrc is not None else 0.0,
                    'l_gradient': parts.gradient.item() if parts.gradient is not None else 0.0,
                    'l_normal': parts.normal.item() if parts.normal is not None else 0.0,
                    'total': total_value,
                }
                history.append({'step': step, **row})
                if log is not None:
                    log.write(step, **row)
                for level, alpha in enumerate(output.attention):
                    if trace is not None:
                        trace.write(step, level, alpha.as_list())
                    if recorder is not None:
                        recorder.log_attention(step, level, alpha.as_list())
                if recorder is not None:
                    recorder.log_step(step, row)
                if step % config.log_every == 0 or step == steps - 1:
                    logger.info(
                        'stage2 step %d: depth=%.5f cmrc=%.5f grad=%.5f normal=%.5f total=%.5f',
                        step,
                        row['l_depth'],
                        row['l_cmrc'],
                        row['l_gradient'],
                        row['l_normal'],
                        total_value,
                    )
        except TrainingDivergedError as exc:
            if recorder is not None:
                recorder.finish('diverged', error=str(exc))
            raise

    checkpoint = Checkpoint(
        tensors={
            **predictor.state_dict(PREDICTOR_PREFIX),
            **depth_encoder.state_dict(DEPTH_ENCODER_PREFIX),
            **optimizer.state_dict(),
        },
        config=_echo(config, 2),
    )
    path = None
    if out_dir is not None:
        path = save_checkpoint(Path(out_dir) / f'stage2_{variant.value}.ckpt', checkpoint)
    if recorder is not None:
        recorder.finish('completed', checkpoint_path=str(path) if path else None)
    return StageResult(
        checkpoint, history, cmrc_evaluations=cmrc_evaluations, checkpoint_path=path, depth_encoder=depth_encoder
    )
