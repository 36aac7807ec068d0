"""Run configuration: dataclass defaults, ``key = value`` files, and flag overrides."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Callable, Mapping

from losses.objectives import LossSchedule, LossWeights
from models.backbone import EncoderConfig
from models.network import ModelVariant
from models.som import SOMConfig

logger = logging.getLogger(__name__)

STAGE1_DEFAULT_STEPS = 2000
STAGE2_DEFAULT_STEPS = 4000


class ConfigError(ValueError):
    """Raised for unreadable config files and invalid settings."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    lr_decay: float = 0.5
    decay_interval: int = 10
    weight_decay: float = 1e-6
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 2
    steps: int | None = None
    seed: int = 0
    variant: ModelVariant = ModelVariant.SOM
    image_size: int = 64
    n_train: int = 800
    n_val: int = 200
    stage_channels: tuple[int, ...] = (16, 32, 64, 128)
    convs_per_stage: int = 2
    memory_size: int = 8
    lambda_depth: float = 1.0
    lambda_cmrc: float = 2.0
    lambda_gradient: float = 1.0
    lambda_normal: float = 1.0
    gradient_on_step: int | None = None
    normal_on_step: int | None = None
    augment: bool = True
    log_every: int = 50

    def __post_init__(self) -> None:
        object.__setattr__(self, 'variant', ModelVariant(self.variant))
        object.__setattr__(self, 'stage_channels', tuple(int(c) for c in self.stage_channels))
        if self.learning_rate < 0:
            raise ConfigError(f'learning_rate must be non-negative, got {self.learning_rate}')
        if self.steps is not None and self.steps < 1:
            raise ConfigError(f'steps must be >= 1, got {self.steps}')
        for name in ('batch_size', 'decay_interval', 'n_train', 'n_val', 'log_every'):
            if getattr(self, name) < 1:
                raise ConfigError(f'{name} must be >= 1, got {getattr(self, name)}')
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError(f'lr_decay must lie in (0, 1], got {self.lr_decay}')
        if self.image_size < 32 or self.image_size % 32:
            raise ConfigError(f'image_size must be a positive multiple of 32, got {self.image_size}')
        try:
            _ = (self.encoder_config, self.som_config, self.weights)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            stage_channels=self.stage_channels,  # type: ignore[arg-type]
            convs_per_stage=self.convs_per_stage,
        )

    @property
    def som_config(self) -> SOMConfig:
        return SOMConfig(memory_size=self.memory_size)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lambda_depth, self.lambda_cmrc, self.lambda_gradient, self.lambda_normal)

    @property
    def image_dims(self) -> tuple[int, int]:
        return self.image_size, self.image_size

    def steps_for(self, stage: int) -> int:
        if self.steps is not None:
            return self.steps
        return STAGE1_DEFAULT_STEPS if stage == 1 else STAGE2_DEFAULT_STEPS

    def schedule(self, steps: int) -> LossSchedule:
        """Explicit thresholds win; otherwise the proportional schedule over ``steps``."""
        scaled = LossSchedule.scaled(steps)
        gradient_on = self.gradient_on_step
        normal_on = self.normal_on_step
        try:
            return LossSchedule(
                gradient_on_step=scaled.gradient_on_step if gradient_on is None else gradient_on,
                normal_on_step=scaled.normal_on_step if normal_on is None else normal_on,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def steps_per_epoch(self, n_train: int) -> int:
        return math.ceil(n_train / self.batch_size)

    def learning_rate_at(self, step: int, n_train: int) -> float:
        """Step-wise learning rate: decayed once every ``decay_interval`` epochs."""
        epoch = step // self.steps_per_epoch(n_train)
        return self.learning_rate * self.lr_decay ** (epoch // self.decay_interval)

    def replace(self, **changes: Any) -> 'TrainConfig':
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out['variant'] = self.variant.value
        out['stage_channels'] = list(self.stage_channels)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'TrainConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f'unknown config keys: {", ".join(sorted(unknown))}')
        return cls(**dict(data))


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'{text!r} is not a boolean')


def _parse_optional_int(text: str) -> int | None:
    return None if text.strip().lower() in ('', 'none', 'auto') else int(text)


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(',') if part.strip())


_PARSERS: dict[str, Callable[[str], Any]] = {
    'float': float,
    'int': int,
    'bool': _parse_bool,
    'int | None': _parse_optional_int,
    'tuple[int, ...]': _parse_int_list,
    'ModelVariant': ModelVariant,
}

FIELD_PARSERS: dict[str, Callable[[str], Any]] = {f.name: _PARSERS[str(f.type)] for f in fields(TrainConfig)}


def parse_value(key: str, text: str) -> Any:
    if key not in FIELD_PARSERS:
        raise ConfigError(f'unknown config key {key!r}')
    try:
        return FIELD_PARSERS[key](text.strip())
    except ValueError as exc:
        raise ConfigError(f'invalid value for {key}: {exc}') from exc


def parse_config_file(path: str | Path) -> dict[str, Any]:
    """Read ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f'cannot read config file {path}: {exc}') from exc
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f'{path}:{lineno}: expected "key = value", got {raw.strip()!r}')
        key, text = (part.strip() for part in line.split('=', 1))
        try:
            values[key] = parse_value(key, text)
        except ConfigError as exc:
            raise ConfigError(f'{path}:{lineno}: {exc}') from exc
    return values


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> TrainConfig:
    """Defaults, then the file at ``path``, then non-``None`` ``overrides``."""
    values: dict[str, Any] = parse_config_file(path) if path is not None else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    config = TrainConfig.from_dict(values)
    logger.debug('Loaded config: %s', config)
    return config
