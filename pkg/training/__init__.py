"""Two-stage training, evaluation, checkpoints and the variant ablation."""

from .ablation import ABLATION_VARIANTS, AblationResult, run_ablation
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, TrainConfig, load_config, parse_config_file
from .evaluate import (
    EvaluationResult,
    SampleResult,
    evaluate,
    evaluate_predictions,
    load_predictor,
    median_baseline,
    predict,
    validation_l_ae,
)
from .optimizer import AdamW
from .trainer import StageResult, TrainingDivergedError, train_stage1, train_stage2

__all__ = [
    'ABLATION_VARIANTS',
    'AblationResult',
    'AdamW',
    'Checkpoint',
    'CheckpointError',
    'ConfigError',
    'EvaluationResult',
    'SampleResult',
    'StageResult',
    'TrainConfig',
    'TrainingDivergedError',
    'evaluate',
    'evaluate_predictions',
    'load_checkpoint',
    'load_config',
    'load_predictor',
    'median_baseline',
    'parse_config_file',
    'predict',
    'run_ablation',
    'save_checkpoint',
    'train_stage1',
    'train_stage2',
    'validation_l_ae',
]
